#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajx/agent.hpp"
#include "trajx/env.hpp"

namespace trajx {

struct Trajectory {
  std::string id;
  std::vector<Transition> transitions;
  double checkpoint_fraction = 1.0;
  std::uint64_t seed = 0;
  int episode = 0;
  double total_reward = 0.0;
  int length = 0;
  TerminalKind outcome = TerminalKind::none;

  // Recomputes total_reward and length from the transitions.
  void refresh_totals();
  StateId final_state() const { return transitions.back().state; }

  bool operator==(const Trajectory&) const = default;
};

struct Dataset {
  std::string env_name;
  std::string config_hash;
  std::string qtable_ref;  // path of the analysis-time Q-table, relative to the dataset
  std::vector<Trajectory> trajectories;

  bool operator==(const Dataset&) const = default;
  std::size_t index_of(const std::string& id) const;  // throws DataError when absent
};

enum class RolloutMode { greedy, epsilon_greedy };

struct CollectConfig {
  int episodes_per_checkpoint = 20;
  RolloutMode mode = RolloutMode::epsilon_greedy;
  double epsilon = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Rolls out every checkpoint policy `episodes_per_checkpoint` times.
// Trajectory ids are "c<checkpoint>-e<episode>"; each episode gets its own
// derived seed, stored on the trajectory.
Dataset collect(const Environment& env, std::span<const Checkpoint> checkpoints, const CollectConfig& cfg);

// Runs one episode from the initial state with the given checkpoint policy.
Trajectory rollout_episode(const Environment& env, const QTable& q, RolloutMode mode, double epsilon,
                           std::uint64_t seed);

// `.traj.jsonl`: a header object followed by one trajectory object per line.
//   {"format":"trajx-traj","version":1,"env":..,"config_hash":..,"qtable":..,"count":N}
//   {"id":..,"checkpoint_fraction":..,"seed":..,"episode":..,"length":..,
//    "total_reward":..,"outcome":..,"transitions":[[s,a,r,s',done],..]}
inline constexpr int kDatasetVersion = 1;

nlohmann::json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

void write_dataset(const Dataset& d, std::ostream& out);
// With `validate`, per-trajectory invariants are checked as lines are read
// and the first failure throws PropertyViolation naming the line.
Dataset read_dataset(std::istream& in, bool validate = true);
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path, bool validate = true);

// Throws HashMismatch when the dataset and Q-table were made for different configs.
void check_compatible(const Dataset& d, const QTable& q);

// Invariant violations of one trajectory (empty when valid): length and
// total_reward re-derivable, transitions chained, done only on the last step.
std::vector<std::string> trajectory_violations(const Trajectory& t);

// All violations in a dataset. With an environment, also replays every
// trajectory and checks actions, states and outcomes against the model.
std::vector<std::string> dataset_violations(const Dataset& d, const Environment* env = nullptr);

}  // namespace trajx
