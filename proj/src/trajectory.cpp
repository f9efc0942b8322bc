#include "trajx/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "trajx/error.hpp"
#include "trajx/rng.hpp"

namespace trajx {

void Trajectory::refresh_totals() {
  total_reward = 0.0;
  for (const auto& t : transitions) total_reward += t.reward;
  length = static_cast<int>(transitions.size());
}

std::size_t Dataset::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].id == id) return i;
  }
  throw DataError("unknown trajectory id '" + id + "'");
}

void CollectConfig::validate() const {
  if (episodes_per_checkpoint < 1) throw ConfigError("episodes_per_checkpoint must be >= 1");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("collection epsilon must be in [0, 1]");
}

Trajectory rollout_episode(const Environment& env, const QTable& q, RolloutMode mode, double epsilon,
                           std::uint64_t seed) {
  Rng rng(seed);
  Episode episode(env);
  Trajectory traj;
  traj.seed = seed;
  while (!episode.done()) {
    StateId s = episode.state();
    ActionId a = greedy_action(q.row(s));
    if (mode == RolloutMode::epsilon_greedy && rng.uniform01() < epsilon) a = rng.below(env.action_count());
    traj.transitions.push_back(episode.step(a));
  }
  traj.outcome = episode.outcome();
  traj.refresh_totals();
  return traj;
}

Dataset collect(const Environment& env, std::span<const Checkpoint> checkpoints, const CollectConfig& cfg) {
  cfg.validate();
  if (checkpoints.empty()) throw ConfigError("collect needs at least one checkpoint");
  Dataset d;
  d.env_name = env.spec().name;
  d.config_hash = env.config_hash();
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const auto& ckpt = checkpoints[c];
    if (ckpt.q.state_count() != env.state_count() || ckpt.q.action_count() != env.action_count()) {
      throw ConfigError("checkpoint " + std::to_string(c) + " shape does not match the environment");
    }
    for (int e = 0; e < cfg.episodes_per_checkpoint; ++e) {
      std::string tag = "c" + std::to_string(c) + "-e" + std::to_string(e);
      Trajectory t = rollout_episode(env, ckpt.q, cfg.mode, cfg.epsilon, derive_seed(cfg.seed, tag));
      t.id = tag;
      t.episode = e;
      t.checkpoint_fraction = ckpt.fraction;
      d.trajectories.push_back(std::move(t));
    }
  }
  return d;
}

// --- serialization ---

namespace {

TerminalKind parse_kind(const std::string& s) {
  for (auto k : {TerminalKind::none, TerminalKind::success, TerminalKind::failure, TerminalKind::cap}) {
    if (s == to_string(k)) return k;
  }
  throw DataError("unknown outcome '" + s + "'");
}

}  // namespace

nlohmann::json trajectory_to_json(const Trajectory& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& x : t.transitions) steps.push_back({x.state, x.action, x.reward, x.next_state, x.done});
  return {{"id", t.id},
          {"checkpoint_fraction", t.checkpoint_fraction},
          {"seed", t.seed},
          {"episode", t.episode},
          {"length", t.length},
          {"total_reward", t.total_reward},
          {"outcome", to_string(t.outcome)},
          {"transitions", steps}};
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  try {
    Trajectory t;
    t.id = j.at("id").get<std::string>();
    t.checkpoint_fraction = j.at("checkpoint_fraction").get<double>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.episode = j.at("episode").get<int>();
    t.length = j.at("length").get<int>();
    t.total_reward = j.at("total_reward").get<double>();
    t.outcome = parse_kind(j.at("outcome").get<std::string>());
    for (const auto& s : j.at("transitions")) {
      if (!s.is_array() || s.size() != 5) throw DataError("transition must be [state, action, reward, next, done]");
      t.transitions.push_back(
          {s[0].get<StateId>(), s[1].get<ActionId>(), s[2].get<double>(), s[3].get<StateId>(), s[4].get<bool>()});
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed trajectory: ") + e.what());
  }
}

void write_dataset(const Dataset& d, std::ostream& out) {
  nlohmann::json header = {{"format", "trajx-traj"},       {"version", kDatasetVersion},
                           {"env", d.env_name},            {"config_hash", d.config_hash},
                           {"qtable", d.qtable_ref},       {"count", d.trajectories.size()}};
  out << header.dump() << '\n';
  for (const auto& t : d.trajectories) out << trajectory_to_json(t).dump() << '\n';
}

Dataset read_dataset(std::istream& in, bool validate) {
  Dataset d;
  std::string line;
  int line_no = 0;
  std::size_t expected = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON (truncated or corrupt record)");
    }
    try {
      if (!have_header) {
        if (!j.is_object() || j.value("format", "") != "trajx-traj") {
          throw DataError("line " + std::to_string(line_no) + ": missing trajx-traj header");
        }
        int version = j.at("version").get<int>();
        if (version != kDatasetVersion) {
          throw DataError("line " + std::to_string(line_no) + ": unsupported dataset version " +
                          std::to_string(version) + " (expected " + std::to_string(kDatasetVersion) + ")");
        }
        d.env_name = j.at("env").get<std::string>();
        d.config_hash = j.at("config_hash").get<std::string>();
        d.qtable_ref = j.at("qtable").get<std::string>();
        expected = j.at("count").get<std::size_t>();
        have_header = true;
        continue;
      }
      d.trajectories.push_back(trajectory_from_json(j));
      if (validate) {
        auto v = trajectory_violations(d.trajectories.back());
        if (!v.empty()) throw PropertyViolation("line " + std::to_string(line_no) + ": " + v.front());
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      std::string what = e.what();
      if (what.rfind("line ", 0) == 0) throw;
      throw DataError("line " + std::to_string(line_no) + ": " + what);
    }
  }
  if (!have_header) throw DataError("empty dataset file");
  if (d.trajectories.size() != expected) {
    throw DataError("header declares " + std::to_string(expected) + " trajectories, file holds " +
                    std::to_string(d.trajectories.size()));
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_dataset(d, out);
}

Dataset load_dataset(const std::filesystem::path& path, bool validate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  try {
    return read_dataset(in, validate);
  } catch (const PropertyViolation& e) {
    throw PropertyViolation(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void check_compatible(const Dataset& d, const QTable& q) {
  if (d.config_hash != q.config_hash) {
    throw HashMismatch("environment config hash mismatch: dataset " + d.config_hash + " vs Q-table " +
                       q.config_hash);
  }
}

// --- validation ---

std::vector<std::string> trajectory_violations(const Trajectory& t) {
  std::vector<std::string> out;
  const std::string who = "trajectory '" + t.id + "': ";
  if (t.transitions.empty()) out.push_back(who + "empty trajectory");
  if (t.length != static_cast<int>(t.transitions.size())) {
    out.push_back(who + "length invariant: stored " + std::to_string(t.length) + ", transitions " +
                  std::to_string(t.transitions.size()));
  }
  double sum = 0.0;
  for (const auto& x : t.transitions) sum += x.reward;
  if (sum != t.total_reward) {
    out.push_back(who + "total_reward invariant: stored " + std::to_string(t.total_reward) + ", recomputed " +
                  std::to_string(sum));
  }
  for (std::size_t i = 0; i + 1 < t.transitions.size(); ++i) {
    if (t.transitions[i].next_state != t.transitions[i + 1].state) {
      out.push_back(who + "chain invariant broken between steps " + std::to_string(i) + " and " +
                    std::to_string(i + 1));
    }
    if (t.transitions[i].done) out.push_back(who + "done flag before the final step at " + std::to_string(i));
  }
  if (!t.transitions.empty() && !t.transitions.back().done) out.push_back(who + "final step is not done");
  return out;
}

std::vector<std::string> dataset_violations(const Dataset& d, const Environment* env) {
  std::vector<std::string> out;
  if (d.trajectories.empty()) out.push_back("dataset is empty");
  std::vector<std::string> ids;
  for (const auto& t : d.trajectories) {
    auto v = trajectory_violations(t);
    out.insert(out.end(), v.begin(), v.end());
    ids.push_back(t.id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) out.push_back("trajectory ids are not unique");
  if (env == nullptr) return out;

  if (d.config_hash != env->config_hash()) {
    out.push_back("config hash " + d.config_hash + " does not match environment " + env->config_hash());
  }
  for (const auto& t : d.trajectories) {
    if (t.transitions.empty()) continue;
    const std::string who = "trajectory '" + t.id + "': ";
    if (t.length > env->spec().max_steps) out.push_back(who + "longer than max_steps");
    Episode ep(*env);
    for (std::size_t i = 0; i < t.transitions.size(); ++i) {
      const Transition& rec = t.transitions[i];
      if (ep.done()) {
        out.push_back(who + "replay ended before step " + std::to_string(i));
        break;
      }
      if (!env->valid_action(rec.action)) {
        out.push_back(who + "invalid action at step " + std::to_string(i));
        break;
      }
      Transition got = ep.step(rec.action);
      if (got != rec) {
        out.push_back(who + "replay diverges at step " + std::to_string(i));
        break;
      }
      if (i + 1 == t.transitions.size() && ep.outcome() != t.outcome) {
        out.push_back(who + "stored outcome " + to_string(t.outcome) + " but replay gives " +
                      to_string(ep.outcome()));
      }
    }
  }
  return out;
}

}  // namespace trajx
