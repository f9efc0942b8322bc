#include "trajx/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "trajx/error.hpp"
#include "trajx/rng.hpp"

namespace trajx {

QTable::QTable(int states, int actions, double gamma, double init)
    : states_(states), actions_(actions), gamma_(gamma) {
  if (states < 1 || actions < 1) throw ConfigError("Q-table shape must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
  if (!std::isfinite(init)) throw ConfigError("Q-table init must be finite");
  auto n = static_cast<std::size_t>(states) * static_cast<std::size_t>(actions);
  values_.assign(n, init);
  visits_.assign(n, 0);
}

ActionId greedy_action(std::span<const double> row) {
  ActionId best = 0;
  for (std::size_t a = 1; a < row.size(); ++a) {
    if (row[a] > row[static_cast<std::size_t>(best)]) best = static_cast<ActionId>(a);
  }
  return best;
}

std::vector<double> softmax(std::span<const double> row, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("softmax temperature must be positive");
  double hi = *std::max_element(row.begin(), row.end());
  std::vector<double> p(row.size());
  double z = 0.0;
  for (std::size_t a = 0; a < row.size(); ++a) {
    p[a] = std::exp((row[a] - hi) / temperature);
    z += p[a];
  }
  for (double& x : p) x /= z;
  return p;
}

PolicySnapshot::PolicySnapshot(const QTable& q, double temperature) : q_(&q), temperature_(temperature) {
  if (!(temperature > 0.0)) throw ConfigError("policy temperature must be positive");
}

ValueView::ValueView(const QTable& q) {
  values_.resize(static_cast<std::size_t>(q.state_count()));
  for (StateId s = 0; s < q.state_count(); ++s) {
    auto r = q.row(s);
    values_[static_cast<std::size_t>(s)] = *std::max_element(r.begin(), r.end());
  }
  auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
  v_min_ = *lo;
  v_max_ = *hi;
}

// --- persistence ---

nlohmann::json qtable_to_json(const QTable& q) {
  return {{"format", "trajx-qtable"},
          {"version", 1},
          {"env", q.env_name},
          {"config_hash", q.config_hash},
          {"gamma", q.gamma()},
          {"states", q.state_count()},
          {"actions", q.action_count()},
          {"values", q.values()},
          {"visits", q.visit_counts()}};
}

QTable qtable_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "trajx-qtable") throw DataError("not a trajx Q-table file");
    if (j.at("version").get<int>() != 1) {
      throw DataError("unsupported Q-table version " + std::to_string(j.at("version").get<int>()));
    }
    int states = j.at("states").get<int>();
    int actions = j.at("actions").get<int>();
    QTable q(states, actions, j.at("gamma").get<double>());
    q.env_name = j.at("env").get<std::string>();
    q.config_hash = j.at("config_hash").get<std::string>();
    const auto& values = j.at("values");
    const auto& visits = j.at("visits");
    auto n = static_cast<std::size_t>(states) * static_cast<std::size_t>(actions);
    if (values.size() != n || visits.size() != n) throw DataError("Q-table payload does not match its shape");
    for (StateId s = 0; s < states; ++s) {
      for (ActionId a = 0; a < actions; ++a) {
        auto i = static_cast<std::size_t>(s) * static_cast<std::size_t>(actions) + static_cast<std::size_t>(a);
        double v = values[i].get<double>();
        if (!std::isfinite(v)) throw DataError("Q-table entry is not finite");
        q(s, a) = v;
        q.set_visits(s, a, visits[i].get<std::uint64_t>());
      }
    }
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed Q-table: ") + e.what());
  }
}

void save_qtable(const QTable& q, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << qtable_to_json(q).dump() << '\n';
}

QTable load_qtable(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open Q-table " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return qtable_from_json(j);
}

nlohmann::json checkpoints_to_json(const std::vector<Checkpoint>& checkpoints) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checkpoints) {
    list.push_back({{"fraction", c.fraction}, {"episode", c.episode}, {"qtable", qtable_to_json(c.q)}});
  }
  return {{"format", "trajx-checkpoints"}, {"version", 1}, {"checkpoints", list}};
}

std::vector<Checkpoint> checkpoints_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "trajx-checkpoints") throw DataError("not a trajx checkpoints file");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported checkpoints version");
    std::vector<Checkpoint> out;
    for (const auto& c : j.at("checkpoints")) {
      out.push_back({c.at("fraction").get<double>(), c.at("episode").get<int>(), qtable_from_json(c.at("qtable"))});
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoints file: ") + e.what());
  }
}

void save_checkpoints(const std::vector<Checkpoint>& checkpoints, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << checkpoints_to_json(checkpoints).dump() << '\n';
}

std::vector<Checkpoint> load_checkpoints(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoints " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return checkpoints_from_json(j);
}

// --- training ---

double EpsilonSchedule::at(int episode, int episodes) const {
  double horizon = decay_fraction * episodes;
  if (horizon <= 0.0 || episode >= horizon) return end;
  return start + (end - start) * (episode / horizon);
}

void TrainConfig::validate() const {
  if (episodes < 0) throw ConfigError("episodes must be >= 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in (0, 1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
  if (!(epsilon.start >= 0.0 && epsilon.start <= 1.0 && epsilon.end >= 0.0 && epsilon.end <= 1.0)) {
    throw ConfigError("epsilon values must be in [0, 1]");
  }
  if (!(epsilon.decay_fraction >= 0.0 && epsilon.decay_fraction <= 1.0)) {
    throw ConfigError("epsilon decay fraction must be in [0, 1]");
  }
  for (double f : checkpoint_fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("checkpoint fractions must be in (0, 1]");
  }
}

TrainResult train(const Environment& env, const TrainConfig& cfg) {
  cfg.validate();
  QTable q(env.state_count(), env.action_count(), cfg.gamma, cfg.init);
  q.env_name = env.spec().name;
  q.config_hash = env.config_hash();

  auto fractions = cfg.checkpoint_fractions;
  std::sort(fractions.begin(), fractions.end());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());

  TrainResult result;
  std::size_t next_ckpt = 0;
  auto freeze_due = [&](int completed) {
    while (next_ckpt < fractions.size() &&
           std::llround(fractions[next_ckpt] * cfg.episodes) <= completed) {
      result.checkpoints.push_back({fractions[next_ckpt], completed, q});
      ++next_ckpt;
    }
  };
  freeze_due(0);

  Rng rng(cfg.seed);
  const int actions = env.action_count();
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    double eps = cfg.epsilon.at(ep, cfg.episodes);
    Episode episode(env);
    while (!episode.done()) {
      StateId s = episode.state();
      ActionId a = rng.uniform01() < eps ? rng.below(actions) : greedy_action(q.row(s));
      Transition t = episode.step(a);
      double target = t.reward;
      if (!env.is_terminal(t.next_state)) {
        auto next = q.row(t.next_state);
        target += cfg.gamma * *std::max_element(next.begin(), next.end());
      }
      q(s, a) += cfg.alpha * (target - q(s, a));
      q.add_visit(s, a);
    }
    freeze_due(ep + 1);
  }
  result.q = q;
  return result;
}

OracleResult value_iteration_oracle(const Environment& env, double gamma, double tolerance, int max_iterations) {
  if (!(tolerance > 0.0)) throw ConfigError("oracle tolerance must be positive");
  const int states = env.state_count();
  const int actions = env.action_count();

  std::vector<ModelStep> model(static_cast<std::size_t>(states) * static_cast<std::size_t>(actions));
  for (StateId s = 0; s < states; ++s) {
    for (ActionId a = 0; a < actions; ++a) {
      model[static_cast<std::size_t>(s * actions + a)] = env.model(s, a);
    }
  }
  auto terminal = env.terminal_mask();

  OracleResult out{QTable(states, actions, gamma), 0.0, 0};
  out.q.env_name = env.spec().name;
  out.q.config_hash = env.config_hash();
  std::vector<double> v(static_cast<std::size_t>(states), 0.0);
  for (int it = 1; it <= max_iterations; ++it) {
    double residual = 0.0;
    for (StateId s = 0; s < states; ++s) {
      for (ActionId a = 0; a < actions; ++a) {
        const ModelStep& m = model[static_cast<std::size_t>(s * actions + a)];
        double backup = m.reward;
        if (!terminal[static_cast<std::size_t>(m.next_state)]) backup += gamma * v[static_cast<std::size_t>(m.next_state)];
        residual = std::max(residual, std::abs(backup - out.q(s, a)));
        out.q(s, a) = backup;
      }
    }
    for (StateId s = 0; s < states; ++s) {
      auto r = out.q.row(s);
      v[static_cast<std::size_t>(s)] = *std::max_element(r.begin(), r.end());
    }
    out.residual = residual;
    out.iterations = it;
    if (residual < tolerance) return out;
  }
  throw ConvergenceError(max_iterations, out.residual);
}

}  // namespace trajx
