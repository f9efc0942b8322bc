#include "trajx/counterfactual.hpp"

#include <fstream>

#include "trajx/error.hpp"

namespace trajx {

void replay_check(const Environment& env, const Trajectory& traj) {
  Episode ep(env);
  for (std::size_t i = 0; i < traj.transitions.size(); ++i) {
    const Transition& rec = traj.transitions[i];
    if (ep.done()) throw ReplayDivergence(i, "episode ended early");
    if (!env.valid_action(rec.action)) throw ReplayDivergence(i, "invalid action " + std::to_string(rec.action));
    if (ep.step(rec.action) != rec) throw ReplayDivergence(i, "transition differs from the recorded one");
  }
}

CounterfactualRollout counterfactual_rollout(const Environment& env, const QTable& q, const Trajectory& original,
                                             int step, ActionId forced) {
  if (step < 0 || step >= static_cast<int>(original.transitions.size())) {
    throw DataError("deviation step " + std::to_string(step) + " outside [0, " +
                    std::to_string(original.transitions.size()) + ")");
  }
  if (!env.valid_action(forced)) throw InvalidAction("forced action " + std::to_string(forced) + " is invalid");
  if (forced == original.transitions[static_cast<std::size_t>(step)].action) {
    throw InvalidAction("action equals original");
  }

  CounterfactualRollout out;
  out.deviation_step = step;
  out.forced_action = forced;
  Trajectory& t = out.trajectory;
  t.id = original.id + "/cf-s" + std::to_string(step) + "-a" + std::to_string(forced);

  Episode ep(env);
  for (int i = 0; i < step; ++i) {
    const Transition& rec = original.transitions[static_cast<std::size_t>(i)];
    if (ep.done()) throw ReplayDivergence(static_cast<std::size_t>(i), "episode ended early");
    Transition got = ep.step(rec.action);
    if (got != rec) throw ReplayDivergence(static_cast<std::size_t>(i), "transition differs from the recorded one");
    t.transitions.push_back(got);
  }
  if (ep.done()) throw ReplayDivergence(static_cast<std::size_t>(step), "episode ended before the deviation");
  t.transitions.push_back(ep.step(forced));
  while (!ep.done()) t.transitions.push_back(ep.step(greedy_action(q.row(ep.state()))));
  t.outcome = ep.outcome();
  t.refresh_totals();
  return out;
}

CounterfactualSet generate_counterfactuals(const Environment& env, const QTable& q, const Trajectory& target,
                                           std::optional<std::size_t> budget, std::uint64_t seed) {
  if (target.transitions.empty()) throw DataError("cannot explain an empty trajectory");
  if (q.state_count() != env.state_count() || q.action_count() != env.action_count()) {
    throw DataError("Q-table shape does not match the environment");
  }
  replay_check(env, target);

  CounterfactualSet set;
  set.original_id = target.id;
  set.config_hash = env.config_hash();
  set.original_reward = target.total_reward;
  set.original_length = target.length;
  set.original_outcome = target.outcome;
  set.seed = seed;
  set.budget = budget;

  const int steps = static_cast<int>(target.transitions.size());
  const int alternatives = env.action_count() - 1;
  if (budget && static_cast<std::size_t>(steps) * static_cast<std::size_t>(alternatives) > *budget) {
    std::size_t allowed = *budget / static_cast<std::size_t>(alternatives);
    if (allowed == 0) {
      throw ConfigError("rollout budget " + std::to_string(*budget) + " is below the " +
                        std::to_string(alternatives) + " alternatives of a single step");
    }
    set.capped = true;
    set.stride = static_cast<int>((static_cast<std::size_t>(steps) + allowed - 1) / allowed);
  }

  for (int i = 0; i < steps; i += set.stride) {
    ActionId original = target.transitions[static_cast<std::size_t>(i)].action;
    for (ActionId a = 0; a < env.action_count(); ++a) {
      if (a == original) continue;
      set.rollouts.push_back(counterfactual_rollout(env, q, target, i, a));
    }
  }

  std::size_t reward_ok = 0;
  std::size_t length_ok = 0;
  for (const auto& r : set.rollouts) {
    if (r.total_reward() <= set.original_reward) ++reward_ok;
    if (r.length() >= set.original_length) ++length_ok;
  }
  auto n = static_cast<double>(set.rollouts.size());
  set.reward_dominance = static_cast<double>(reward_ok) / n;
  set.length_dominance = static_cast<double>(length_ok) / n;
  return set;
}

ContrastiveSummary compare(const CounterfactualSet& set) {
  if (set.rollouts.empty()) throw DataError("counterfactual set is empty");
  ContrastiveSummary s;
  s.original_length = set.original_length;
  s.original_reward = set.original_reward;
  std::size_t reward_ok = 0;
  std::size_t length_ok = 0;
  for (const auto& r : set.rollouts) {
    s.lengths.push_back(r.length());
    s.rewards.push_back(r.total_reward());
    s.length_deltas.push_back(r.length() - set.original_length);
    s.reward_deltas.push_back(r.total_reward() - set.original_reward);
    if (r.total_reward() <= set.original_reward) ++reward_ok;
    if (r.length() >= set.original_length) ++length_ok;
    if (r.length() < set.original_length) ++s.strictly_shorter;
    if (r.total_reward() > set.original_reward) ++s.strictly_higher_reward;
  }
  auto n = static_cast<double>(set.rollouts.size());
  s.reward_dominance = static_cast<double>(reward_ok) / n;
  s.length_dominance = static_cast<double>(length_ok) / n;
  return s;
}

// --- persistence ---

nlohmann::json rollout_to_json(const CounterfactualRollout& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& x : r.trajectory.transitions) steps.push_back({x.state, x.action, x.reward, x.next_state, x.done});
  return {{"step", r.deviation_step},
          {"action", r.forced_action},
          {"id", r.trajectory.id},
          {"length", r.length()},
          {"total_reward", r.total_reward()},
          {"outcome", to_string(r.outcome())},
          {"transitions", steps}};
}

nlohmann::json cfset_to_json(const CounterfactualSet& set) {
  nlohmann::json rollouts = nlohmann::json::array();
  for (const auto& r : set.rollouts) rollouts.push_back(rollout_to_json(r));
  return {{"format", "trajx-cfset"},
          {"version", 1},
          {"original_id", set.original_id},
          {"config_hash", set.config_hash},
          {"original_length", set.original_length},
          {"original_reward", set.original_reward},
          {"original_outcome", to_string(set.original_outcome)},
          {"seed", set.seed},
          {"budget", set.budget ? nlohmann::json(*set.budget) : nlohmann::json(nullptr)},
          {"capped", set.capped},
          {"stride", set.stride},
          {"reward_dominance", set.reward_dominance},
          {"length_dominance", set.length_dominance},
          {"rollouts", rollouts}};
}

CounterfactualSet cfset_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "trajx-cfset") throw DataError("not a trajx counterfactual file");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported counterfactual file version");
    CounterfactualSet set;
    set.original_id = j.at("original_id").get<std::string>();
    set.config_hash = j.at("config_hash").get<std::string>();
    set.original_length = j.at("original_length").get<int>();
    set.original_reward = j.at("original_reward").get<double>();
    set.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("budget").is_null()) set.budget = j.at("budget").get<std::size_t>();
    set.capped = j.at("capped").get<bool>();
    set.stride = j.at("stride").get<int>();
    set.reward_dominance = j.at("reward_dominance").get<double>();
    set.length_dominance = j.at("length_dominance").get<double>();
    auto outcome_of = [](const std::string& s) {
      for (auto k : {TerminalKind::none, TerminalKind::success, TerminalKind::failure, TerminalKind::cap}) {
        if (s == to_string(k)) return k;
      }
      throw DataError("unknown outcome '" + s + "'");
    };
    set.original_outcome = outcome_of(j.at("original_outcome").get<std::string>());
    for (const auto& r : j.at("rollouts")) {
      CounterfactualRollout cr;
      cr.deviation_step = r.at("step").get<int>();
      cr.forced_action = r.at("action").get<ActionId>();
      cr.trajectory.id = r.at("id").get<std::string>();
      cr.trajectory.outcome = outcome_of(r.at("outcome").get<std::string>());
      for (const auto& s : r.at("transitions")) {
        cr.trajectory.transitions.push_back(
            {s[0].get<StateId>(), s[1].get<ActionId>(), s[2].get<double>(), s[3].get<StateId>(), s[4].get<bool>()});
      }
      cr.trajectory.refresh_totals();
      set.rollouts.push_back(std::move(cr));
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed counterfactual file: ") + e.what());
  }
}

void save_cfset(const CounterfactualSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << cfset_to_json(set).dump() << '\n';
}

CounterfactualSet load_cfset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return cfset_from_json(j);
}

}  // namespace trajx
