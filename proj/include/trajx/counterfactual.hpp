#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajx/agent.hpp"
#include "trajx/env.hpp"
#include "trajx/trajectory.hpp"

namespace trajx {

struct CounterfactualRollout {
  int deviation_step = 0;
  ActionId forced_action = 0;
  Trajectory trajectory;  // original prefix, forced step, greedy continuation

  double total_reward() const { return trajectory.total_reward; }
  int length() const { return trajectory.length; }
  TerminalKind outcome() const { return trajectory.outcome; }

  bool operator==(const CounterfactualRollout&) const = default;
};

struct CounterfactualSet {
  std::string original_id;
  std::string config_hash;
  double original_reward = 0.0;
  int original_length = 0;
  TerminalKind original_outcome = TerminalKind::none;
  std::uint64_t seed = 0;
  std::vector<CounterfactualRollout> rollouts;  // ordered by (step, action)
  // Budget subsampling: deviation steps 0, stride, 2*stride, ...
  bool capped = false;
  int stride = 1;
  std::optional<std::size_t> budget;
  // Fractions of rollouts no better than the original.
  double reward_dominance = 0.0;
  double length_dominance = 0.0;

  bool operator==(const CounterfactualSet&) const = default;
};

// Replays `traj` from reset; throws ReplayDivergence at the first mismatch.
void replay_check(const Environment& env, const Trajectory& traj);

// One forbid-and-force rollout. Throws DataError when `step` is outside the
// trajectory and InvalidAction when `forced` is invalid or equals the original.
CounterfactualRollout counterfactual_rollout(const Environment& env, const QTable& q, const Trajectory& original,
                                             int step, ActionId forced);

// Every (step, alternative action) rollout of `target`, after a replay check.
// When steps * (|A|-1) exceeds `budget`, deviation steps are subsampled with a
// fixed stride and the set records it. `seed` is recorded; rollouts are greedy.
CounterfactualSet generate_counterfactuals(const Environment& env, const QTable& q, const Trajectory& target,
                                           std::optional<std::size_t> budget, std::uint64_t seed);

struct ContrastiveSummary {
  int original_length = 0;
  double original_reward = 0.0;
  std::vector<int> lengths;
  std::vector<double> rewards;
  std::vector<int> length_deltas;     // rollout - original
  std::vector<double> reward_deltas;  // rollout - original
  double reward_dominance = 0.0;
  double length_dominance = 0.0;
  int strictly_shorter = 0;
  int strictly_higher_reward = 0;
};

ContrastiveSummary compare(const CounterfactualSet& set);

// One rollout as emitted by `cf` and the service:
//   {"step","action","id","length","total_reward","outcome","transitions":[[s,a,r,s',done],..]}
nlohmann::json rollout_to_json(const CounterfactualRollout& r);

// `.cfset.json` payload.
nlohmann::json cfset_to_json(const CounterfactualSet& set);
CounterfactualSet cfset_from_json(const nlohmann::json& j);
void save_cfset(const CounterfactualSet& set, const std::filesystem::path& path);
CounterfactualSet load_cfset(const std::filesystem::path& path);

}  // namespace trajx
