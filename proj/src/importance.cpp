#include "trajx/importance.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "trajx/error.hpp"

namespace trajx {

const char* to_string(RadicalKind kind) {
  switch (kind) {
    case RadicalKind::classic: return "classic";
    case RadicalKind::naive: return "naive";
    case RadicalKind::bellman: return "bellman";
    case RadicalKind::entropy: return "entropy";
    case RadicalKind::vnorm: return "vnorm";
    case RadicalKind::vgoal: return "vgoal";
    case RadicalKind::kl: return "kl";
  }
  return "classic";
}

RadicalKind parse_radical_kind(std::string_view name) {
  for (auto k : {RadicalKind::classic, RadicalKind::naive, RadicalKind::bellman, RadicalKind::entropy,
                 RadicalKind::vnorm, RadicalKind::vgoal, RadicalKind::kl}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown metric '" + std::string(name) +
                    "' (expected classic, naive, bellman, entropy, vnorm, vgoal or kl)");
}

std::vector<RadicalKind> standard_radical_kinds() {
  return {RadicalKind::classic, RadicalKind::naive, RadicalKind::bellman,
          RadicalKind::entropy, RadicalKind::vnorm, RadicalKind::vgoal};
}

// --- KL reference ---

KlReference KlReference::parse(std::string_view text) {
  KlReference ref;
  if (text == "uniform") return ref;
  auto number = [&](std::string_view s, auto& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ConfigError("bad KL reference '" + std::string(text) + "'");
    }
  };
  if (text.rfind("point:", 0) == 0) {
    ref.kind = Kind::point_mass;
    number(text.substr(6), ref.action);
    return ref;
  }
  if (text.rfind("custom:", 0) == 0) {
    ref.kind = Kind::custom;
    std::string_view rest = text.substr(7);
    while (true) {
      auto comma = rest.find(',');
      double w = 0;
      number(rest.substr(0, comma), w);
      ref.weights.push_back(w);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    return ref;
  }
  throw ConfigError("bad KL reference '" + std::string(text) + "' (uniform | point:<a> | custom:<w,...>)");
}

std::string KlReference::describe() const {
  switch (kind) {
    case Kind::uniform: return "uniform";
    case Kind::point_mass: return "point:" + std::to_string(action);
    case Kind::custom: {
      std::string s = "custom:";
      for (std::size_t i = 0; i < weights.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", weights[i]);
        s += (i ? "," : "") + std::string(buf);
      }
      return s;
    }
  }
  return "uniform";
}

std::vector<double> KlReference::distribution(int action_count) const {
  auto n = static_cast<std::size_t>(action_count);
  switch (kind) {
    case Kind::uniform: return std::vector<double>(n, 1.0 / action_count);
    case Kind::point_mass: {
      if (action < 0 || action >= action_count) throw ConfigError("KL point-mass action out of range");
      std::vector<double> x(n, 0.0);
      x[static_cast<std::size_t>(action)] = 1.0;
      return x;
    }
    case Kind::custom: {
      if (weights.size() != n) throw ConfigError("KL custom weights must have one entry per action");
      double total = 0.0;
      for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("KL custom weights must be finite and >= 0");
        total += w;
      }
      if (!(total > 0.0)) throw ConfigError("KL custom weights must not all be zero");
      std::vector<double> x(weights);
      for (double& w : x) w /= total;
      return x;
    }
  }
  return {};
}

// --- context ---

AnalysisContext::AnalysisContext(const QTable& q_, double temperature, std::vector<bool> terminal_)
    : q(q_), policy(q_, temperature), values(q_), terminal(std::move(terminal_)) {}

bool AnalysisContext::is_terminal(const Transition& t) const {
  if (terminal.empty()) return t.done;
  return terminal[static_cast<std::size_t>(t.next_state)];
}

// --- radicals ---

double delta_q(const QTable& q, StateId s) {
  auto r = q.row(s);
  auto [lo, hi] = std::minmax_element(r.begin(), r.end());
  return *hi - *lo;
}

Radical radical_naive(const QTable& q, StateId s, ActionId a) {
  auto r = q.row(s);
  double n = static_cast<double>(r.size());
  double mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
  double var = 0.0;
  for (double x : r) var += (x - mean) * (x - mean);
  double sigma = std::sqrt(var / n);
  if (sigma < 1e-12) return {0.0, true};
  return {(q(s, a) - mean) / sigma, false};
}

double radical_bellman(const QTable& q, const Transition& t, bool terminal) {
  double target = t.reward;
  if (!terminal) target += q.gamma() * q(t.next_state, greedy_action(q.row(t.next_state)));
  return std::abs(q(t.state, t.action) - target);
}

double entropy_confidence(std::span<const double> probs) {
  if (probs.size() < 2) throw ConfigError("entropy confidence needs at least two actions");
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  double r = 1.0 - h / std::log(static_cast<double>(probs.size()));
  return std::clamp(r, 0.0, 1.0);
}

double radical_entropy(const PolicySnapshot& policy, StateId s) {
  return entropy_confidence(policy.probabilities(s));
}

Radical radical_vnorm(const ValueView& values, StateId s) {
  double range = values.v_max() - values.v_min();
  if (!(range > 0.0)) return {0.0, true};
  return {(values.value(s) - values.v_min()) / range, false};
}

Radical radical_vgoal(const ValueView& values, StateId s, StateId s_final) {
  double goal = values.value(s_final);
  if (std::abs(goal) < ValueView::kGoalEpsilon) {
    Radical r = radical_vnorm(values, s);
    r.fallback = true;
    return r;
  }
  return {std::abs(values.value(s) / goal), false};
}

double kl_divergence(std::span<const double> p, std::span<const double> x) {
  if (p.size() != x.size()) throw DataError("KL divergence needs distributions of equal size");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (x[i] <= 0.0) {
      throw DataError("KL divergence undefined: reference gives zero probability to action " + std::to_string(i) +
                      " which the policy can take");
    }
    kl += p[i] * std::log(p[i] / x[i]);
  }
  return kl;
}

double radical_kl(const PolicySnapshot& policy, StateId s, const KlReference& reference) {
  auto p = policy.probabilities(s);
  auto x = reference.distribution(static_cast<int>(p.size()));
  return kl_divergence(p, x);
}

StepImportance importance(const AnalysisContext& ctx, const Transition& t, RadicalKind kind, StateId s_final) {
  StepImportance out;
  out.delta_q = delta_q(ctx.q, t.state);
  switch (kind) {
    case RadicalKind::classic:
      out.radical = 1.0;
      break;
    case RadicalKind::naive: {
      Radical r = radical_naive(ctx.q, t.state, t.action);
      out.radical = r.value;
      out.fallback = r.fallback;
      break;
    }
    case RadicalKind::bellman:
      out.radical = radical_bellman(ctx.q, t, ctx.is_terminal(t));
      break;
    case RadicalKind::entropy:
      out.radical = radical_entropy(ctx.policy, t.state);
      break;
    case RadicalKind::vnorm: {
      Radical r = radical_vnorm(ctx.values, t.state);
      out.radical = r.value;
      out.fallback = r.fallback;
      break;
    }
    case RadicalKind::vgoal: {
      Radical r = radical_vgoal(ctx.values, t.state, s_final);
      out.radical = r.value;
      out.fallback = r.fallback;
      break;
    }
    case RadicalKind::kl:
      if (!ctx.experimental) throw ConfigError("the kl metric is experimental and needs the experimental flag");
      if (!ctx.kl_reference) throw ConfigError("the kl metric needs a reference distribution");
      out.radical = radical_kl(ctx.policy, t.state, *ctx.kl_reference);
      break;
  }
  out.product = out.delta_q * out.radical;
  return out;
}

ImportanceBreakdown trajectory_importance(const AnalysisContext& ctx, const Trajectory& traj, RadicalKind kind) {
  if (traj.transitions.empty()) throw DataError("trajectory '" + traj.id + "' is empty");
  ImportanceBreakdown b;
  b.kind = kind;
  b.final_state = traj.final_state();
  b.steps.reserve(traj.transitions.size());
  double sum = 0.0;
  for (const auto& t : traj.transitions) {
    StepImportance step = importance(ctx, t, kind, b.final_state);
    sum += step.product;
    if (step.fallback) ++b.fallback_steps;
    b.steps.push_back(step);
  }
  b.i_tau = sum / static_cast<double>(b.steps.size());
  b.goal_fallback = kind == RadicalKind::vgoal && b.fallback_steps > 0;
  return b;
}

nlohmann::json breakdown_to_json(const ImportanceBreakdown& b) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : b.steps) {
    steps.push_back({{"delta_q", s.delta_q}, {"radical", s.radical}, {"product", s.product}, {"fallback", s.fallback}});
  }
  return {{"metric", to_string(b.kind)},         {"i_tau", b.i_tau},
          {"final_state", b.final_state},       {"goal_fallback", b.goal_fallback},
          {"fallback_steps", b.fallback_steps}, {"steps", steps}};
}

}  // namespace trajx
