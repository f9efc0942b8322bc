#include "trajx/ranking.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "trajx/error.hpp"

namespace trajx {

const char* to_string(OutcomeRule rule) {
  return rule == OutcomeRule::reward_then_length ? "reward-then-length" : "length-then-reward";
}

OutcomeRule parse_outcome_rule(std::string_view name) {
  if (name == "reward-then-length") return OutcomeRule::reward_then_length;
  if (name == "length-then-reward") return OutcomeRule::length_then_reward;
  throw ConfigError("unknown outcome rule '" + std::string(name) + "'");
}

std::vector<std::size_t> order_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

namespace {

// True when trajectory a has a strictly better outcome than b.
bool better(const Trajectory& a, const Trajectory& b, OutcomeRule rule) {
  if (rule == OutcomeRule::reward_then_length) {
    if (a.total_reward != b.total_reward) return a.total_reward > b.total_reward;
    return a.length < b.length;
  }
  if (a.length != b.length) return a.length < b.length;
  return a.total_reward > b.total_reward;
}

}  // namespace

std::size_t select_explanation_target(const RankingReport& report, const Dataset& dataset, OutcomeRule rule) {
  if (report.top_k.empty()) throw DataError("ranking report has no top-k entries");
  std::size_t best = report.top_k.front();
  for (std::size_t idx : report.top_k) {
    const auto& cand = dataset.trajectories[idx];
    const auto& cur = dataset.trajectories[best];
    if (better(cand, cur, rule) || (!better(cur, cand, rule) && idx < best)) best = idx;
  }
  return best;
}

RankingReport rank(const AnalysisContext& ctx, const Dataset& dataset, RadicalKind kind, int k, OutcomeRule rule) {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (dataset.trajectories.empty()) throw DataError("cannot rank an empty dataset");

  std::vector<double> scores(dataset.trajectories.size());
  std::vector<bool> fallback(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ImportanceBreakdown b = trajectory_importance(ctx, dataset.trajectories[i], kind);
    scores[i] = b.i_tau;
    fallback[i] = b.goal_fallback;
  }

  RankingReport r;
  r.kind = kind;
  r.k = k;
  r.rule = rule;
  for (std::size_t idx : order_by_score(scores)) {
    r.ranked.push_back({idx, dataset.trajectories[idx].id, scores[idx], fallback[idx]});
    if (fallback[idx]) ++r.fallback_trajectories;
  }
  std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(k), r.ranked.size());
  double len = 0.0;
  double rew = 0.0;
  for (std::size_t i = 0; i < top; ++i) {
    std::size_t idx = r.ranked[i].index;
    r.top_k.push_back(idx);
    len += dataset.trajectories[idx].length;
    rew += dataset.trajectories[idx].total_reward;
  }
  r.avg_length = len / static_cast<double>(top);
  r.avg_reward = rew / static_cast<double>(top);
  r.selected = select_explanation_target(r, dataset, rule);
  r.selected_id = dataset.trajectories[r.selected].id;
  return r;
}

nlohmann::json ranking_to_json(const RankingReport& r, const Dataset& d) {
  nlohmann::json ranked = nlohmann::json::array();
  for (std::size_t pos = 0; pos < r.ranked.size(); ++pos) {
    const auto& e = r.ranked[pos];
    const auto& t = d.trajectories[e.index];
    ranked.push_back({{"rank", pos + 1},
                      {"index", e.index},
                      {"id", e.id},
                      {"score", e.score},
                      {"length", t.length},
                      {"total_reward", t.total_reward},
                      {"outcome", to_string(t.outcome)},
                      {"goal_fallback", e.goal_fallback}});
  }
  nlohmann::json top = nlohmann::json::array();
  for (std::size_t idx : r.top_k) top.push_back(d.trajectories[idx].id);
  return {{"format", "trajx-ranking"},
          {"version", 1},
          {"metric", to_string(r.kind)},
          {"k", r.k},
          {"config_hash", d.config_hash},
          {"outcome_rule", to_string(r.rule)},
          {"top_k", top},
          {"selected_id", r.selected_id},
          {"avg_length", r.avg_length},
          {"avg_reward", r.avg_reward},
          {"fallback_trajectories", r.fallback_trajectories},
          {"ranked", ranked}};
}

std::string ranking_csv(const RankingReport& r) {
  char buf[256];
  std::string out = "metric,statistic,value\n";
  std::snprintf(buf, sizeof buf, "%s,avg_length,%.17g\n%s,avg_reward,%.17g\n", to_string(r.kind), r.avg_length,
                to_string(r.kind), r.avg_reward);
  return out + buf;
}

}  // namespace trajx
