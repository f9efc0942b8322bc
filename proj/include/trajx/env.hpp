#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace trajx {

using StateId = std::int32_t;
using ActionId = std::int32_t;

struct EnvSpec {
  std::string name;
  int state_count = 0;
  int action_count = 0;
  int max_steps = 0;
  double reward_min = 0.0;
  double reward_max = 0.0;
};

struct Transition {
  StateId state = 0;
  ActionId action = 0;
  double reward = 0.0;
  StateId next_state = 0;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

// How an episode (or a single model step) ended.
enum class TerminalKind { none, success, failure, cap };

const char* to_string(TerminalKind kind);

// Result of the one-step deterministic model, independent of any step counter.
struct ModelStep {
  double reward = 0.0;
  StateId next_state = 0;
  bool terminal = false;
  TerminalKind kind = TerminalKind::none;
};

// Maps real-valued observations to row-major cell ids (first dimension slowest).
//
// Each dimension holds ascending edges e0 < e1 < ... < em describing m bins
// [e0,e1), [e1,e2), ..., [e(m-1),em). Values outside [e0, em) clamp to the
// first or last bin, so the mapping is total. A value exactly on an interior
// edge belongs to the higher bin.
class Discretizer {
 public:
  explicit Discretizer(std::vector<std::vector<double>> edges);

  // `bins` equal-width bins spanning [lo, hi).
  static std::vector<double> linspace_edges(double lo, double hi, int bins);

  std::size_t dims() const { return edges_.size(); }
  int bins(std::size_t dim) const { return static_cast<int>(edges_[dim].size()) - 1; }
  int cell_count() const { return cell_count_; }
  const std::vector<double>& edges(std::size_t dim) const { return edges_[dim]; }

  int bin(std::size_t dim, double x) const;
  int cell(std::span<const double> obs) const;
  std::vector<int> unravel(int cell) const;
  // Bin centres; cell(representative(c)) == c for every c.
  std::vector<double> representative(int cell) const;

 private:
  std::vector<std::vector<double>> edges_;
  int cell_count_ = 1;
};

// A deterministic, fully enumerable environment.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual StateId initial_state() const = 0;
  virtual bool is_terminal(StateId s) const = 0;
  virtual ModelStep model(StateId s, ActionId a) const = 0;
  virtual std::string action_name(ActionId a) const = 0;
  // Rendering description for clients (cells, bins, labels).
  virtual nlohmann::json layout() const = 0;

  const std::string& config_hash() const { return config_hash_; }
  void set_config_hash(std::string hash) { config_hash_ = std::move(hash); }

  int action_count() const { return spec().action_count; }
  int state_count() const { return spec().state_count; }
  bool valid_action(ActionId a) const { return a >= 0 && a < spec().action_count; }
  bool valid_state(StateId s) const { return s >= 0 && s < spec().state_count; }
  std::vector<bool> terminal_mask() const;

 private:
  std::string config_hash_;
};

// Single-writer episode state machine over an immutable environment.
class Episode {
 public:
  explicit Episode(const Environment& env);
  Episode(const Environment& env, StateId start);

  // Throws EpisodeFinished once done, InvalidAction for out-of-range ids.
  Transition step(ActionId a);

  StateId state() const { return state_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }
  TerminalKind outcome() const { return outcome_; }

 private:
  const Environment* env_;
  StateId state_;
  int steps_ = 0;
  bool done_ = false;
  TerminalKind outcome_ = TerminalKind::none;
};

struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

// Four-action gridworld: -1 per step, ends at the goal or the step cap.
// Bumping into a wall or the boundary leaves the agent in place.
class GridWorld final : public Environment {
 public:
  enum Action : ActionId { up = 0, down = 1, left = 2, right = 3 };

  GridWorld(int width, int height, Cell start, Cell goal, std::vector<Cell> walls, int max_steps,
            std::string name = "grid");

  const EnvSpec& spec() const override { return spec_; }
  StateId initial_state() const override { return state_of(start_); }
  bool is_terminal(StateId s) const override { return s == state_of(goal_); }
  ModelStep model(StateId s, ActionId a) const override;
  std::string action_name(ActionId a) const override;
  nlohmann::json layout() const override;

  int width() const { return width_; }
  int height() const { return height_; }
  Cell start() const { return start_; }
  Cell goal() const { return goal_; }
  bool is_wall(Cell c) const;
  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  StateId state_of(Cell c) const { return c.y * width_ + c.x; }
  Cell cell_of(StateId s) const { return {s % width_, s / width_}; }
  Cell move(Cell from, ActionId a) const;

 private:
  int width_;
  int height_;
  Cell start_;
  Cell goal_;
  std::vector<bool> walls_;
  EnvSpec spec_;
};

struct LanderConfig {
  double gravity = 1.0;
  double thrust = 2.0;
  double safe_speed = 1.0;
  double dt = 1.0;
  double max_altitude = 30.0;
  double max_speed = 6.5;
  double start_altitude = 20.0;
  double start_velocity = 0.0;
  int bins_h = 30;
  int bins_v = 13;
  int max_steps = 100;
};

// One-dimensional lander over a discretized (altitude, velocity) space.
//
// Dynamics act on bin centres: v' = v + (thrust*a - gravity)*dt, h' = h + v'*dt,
// then (h', v') is discretized. The lowest altitude bin is the ground band:
// entering it is a touchdown, +100 when |v'| <= safe_speed and -100 otherwise.
// Every other step costs 0.1. Ground cells are terminal; an episode that
// starts on the ground ends on its first step.
class MiniLander final : public Environment {
 public:
  enum Action : ActionId { noop = 0, fire = 1 };

  static constexpr double kStepCost = -0.1;
  static constexpr double kLandBonus = 100.0;
  static constexpr double kCrashPenalty = -100.0;

  explicit MiniLander(const LanderConfig& cfg, std::string name = "lander");

  const EnvSpec& spec() const override { return spec_; }
  StateId initial_state() const override;
  bool is_terminal(StateId s) const override;
  ModelStep model(StateId s, ActionId a) const override;
  std::string action_name(ActionId a) const override;
  nlohmann::json layout() const override;

  const LanderConfig& config() const { return cfg_; }
  const Discretizer& discretizer() const { return disc_; }
  // (altitude, velocity) bin centre of a state.
  std::array<double, 2> observation(StateId s) const;

 private:
  ModelStep touchdown(StateId cell, double velocity) const;

  LanderConfig cfg_;
  Discretizer disc_;
  EnvSpec spec_;
};

}  // namespace trajx
