#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajx/env.hpp"

namespace trajx {

// Dense (state x action) action-value table, row-major.
class QTable {
 public:
  QTable() = default;
  QTable(int states, int actions, double gamma, double init = 0.0);

  int state_count() const { return states_; }
  int action_count() const { return actions_; }
  double gamma() const { return gamma_; }

  double operator()(StateId s, ActionId a) const { return values_[index(s, a)]; }
  double& operator()(StateId s, ActionId a) { return values_[index(s, a)]; }
  std::span<const double> row(StateId s) const {
    return {values_.data() + index(s, 0), static_cast<std::size_t>(actions_)};
  }

  std::uint64_t visits(StateId s, ActionId a) const { return visits_[index(s, a)]; }
  void add_visit(StateId s, ActionId a) { ++visits_[index(s, a)]; }
  void set_visits(StateId s, ActionId a, std::uint64_t n) { visits_[index(s, a)] = n; }

  const std::vector<double>& values() const { return values_; }
  const std::vector<std::uint64_t>& visit_counts() const { return visits_; }

  // Environment identity carried into persisted files.
  std::string env_name;
  std::string config_hash;

  bool operator==(const QTable&) const = default;

 private:
  std::size_t index(StateId s, ActionId a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(actions_) + static_cast<std::size_t>(a);
  }

  int states_ = 0;
  int actions_ = 0;
  double gamma_ = 1.0;
  std::vector<double> values_;
  std::vector<std::uint64_t> visits_;
};

// Argmax with lowest-index tie-breaking.
ActionId greedy_action(std::span<const double> row);

// softmax(row / temperature), max-shifted for stability.
std::vector<double> softmax(std::span<const double> row, double temperature);

// Read-only policy view over a Q-table that outlives it.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(const QTable& q, double temperature = 1.0);

  const QTable& q() const { return *q_; }
  double temperature() const { return temperature_; }
  std::vector<double> probabilities(StateId s) const { return softmax(q_->row(s), temperature_); }
  ActionId greedy(StateId s) const { return greedy_action(q_->row(s)); }

 private:
  const QTable* q_;
  double temperature_;
};

// V(s) = max_a Q(s,a) with its range over all states.
class ValueView {
 public:
  // |V(s_final)| below this disables the goal-ratio radical for a trajectory.
  static constexpr double kGoalEpsilon = 1e-6;

  explicit ValueView(const QTable& q);

  double value(StateId s) const { return values_[static_cast<std::size_t>(s)]; }
  double v_min() const { return v_min_; }
  double v_max() const { return v_max_; }

 private:
  std::vector<double> values_;
  double v_min_;
  double v_max_;
};

// Persistence. JSON object with header fields and row-major values:
//   {"format":"trajx-qtable","version":1,"env":..,"config_hash":..,
//    "gamma":..,"states":S,"actions":A,"values":[..],"visits":[..]}
nlohmann::json qtable_to_json(const QTable& q);
QTable qtable_from_json(const nlohmann::json& j);
void save_qtable(const QTable& q, const std::filesystem::path& path);
QTable load_qtable(const std::filesystem::path& path);

// Linear decay from `start` to `end` over the first `decay_fraction` of training.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  double decay_fraction = 0.8;

  double at(int episode, int episodes) const;
};

struct TrainConfig {
  int episodes = 2000;
  double alpha = 0.5;
  double gamma = 0.95;
  double init = 0.0;
  EpsilonSchedule epsilon;
  std::uint64_t seed = 0;
  std::vector<double> checkpoint_fractions = {0.1, 0.25, 0.5, 0.75, 1.0};

  void validate() const;
};

struct Checkpoint {
  double fraction = 1.0;
  int episode = 0;  // episodes completed when frozen
  QTable q;
};

struct TrainResult {
  QTable q;
  std::vector<Checkpoint> checkpoints;
};

// `checkpoints.json`: {"format":"trajx-checkpoints","version":1,
//   "checkpoints":[{"fraction":..,"episode":..,"qtable":{..}},..]}
nlohmann::json checkpoints_to_json(const std::vector<Checkpoint>& checkpoints);
std::vector<Checkpoint> checkpoints_from_json(const nlohmann::json& j);
void save_checkpoints(const std::vector<Checkpoint>& checkpoints, const std::filesystem::path& path);
std::vector<Checkpoint> load_checkpoints(const std::filesystem::path& path);

// Tabular epsilon-greedy Q-learning. Bootstraps through step-cap truncation,
// not through terminal states. Reproducible from cfg.seed.
TrainResult train(const Environment& env, const TrainConfig& cfg);

struct OracleResult {
  QTable q;
  double residual = 0.0;
  int iterations = 0;
};

// Synchronous value iteration over the full (state, action) model. Throws
// ConvergenceError when the sup-norm residual stays above `tolerance`.
OracleResult value_iteration_oracle(const Environment& env, double gamma, double tolerance,
                                    int max_iterations = 100000);

}  // namespace trajx
