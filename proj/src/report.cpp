#include "trajx/report.hpp"

#include <cstdio>

#include "trajx/error.hpp"

namespace trajx {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const RankingTableRow& RankingTable::row(RadicalKind kind) const {
  for (const auto& r : rows) {
    if (r.kind == kind) return r;
  }
  throw DataError(std::string("ranking table has no row for ") + to_string(kind));
}

std::string RankingTable::csv() const {
  std::string out = "metric,statistic,value\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.kind)) + ",avg_length," + num(r.avg_length) + "\n";
    out += std::string(to_string(r.kind)) + ",avg_reward," + num(r.avg_reward) + "\n";
  }
  return out;
}

std::string RankingTable::text() const {
  std::string out = "Top-" + std::to_string(k) + " ranked trajectories\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %12s %12s  %s\n", "metric", "avg_length", "avg_reward", "selected");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-10s %12.2f %12.2f  %s%s\n", to_string(r.kind), r.avg_length, r.avg_reward,
                  r.selected_id.c_str(), r.fallback_trajectories > 0 ? "  (goal-value fallback used)" : "");
    out += buf;
  }
  return out;
}

nlohmann::json RankingTable::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows) {
    rs.push_back({{"metric", to_string(r.kind)},
                  {"avg_length", r.avg_length},
                  {"avg_reward", r.avg_reward},
                  {"selected_id", r.selected_id},
                  {"fallback_trajectories", r.fallback_trajectories}});
  }
  return {{"format", "trajx-table"}, {"version", 1}, {"k", k}, {"config_hash", config_hash}, {"rows", rs}};
}

RankingTable RankingTable::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "trajx-table") throw DataError("not a trajx ranking table");
    RankingTable t;
    t.k = j.at("k").get<int>();
    t.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& r : j.at("rows")) {
      t.rows.push_back({parse_radical_kind(r.at("metric").get<std::string>()), r.at("avg_length").get<double>(),
                        r.at("avg_reward").get<double>(), r.at("selected_id").get<std::string>(),
                        r.at("fallback_trajectories").get<int>()});
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed ranking table: ") + e.what());
  }
}

RankingTable ranking_table(const AnalysisContext& ctx, const Dataset& dataset, std::span<const RadicalKind> metrics,
                           int k, OutcomeRule rule) {
  if (dataset.trajectories.empty()) throw DataError("cannot tabulate an empty dataset");
  RankingTable table;
  table.k = k;
  table.config_hash = dataset.config_hash;
  for (RadicalKind kind : metrics) {
    RankingReport r = rank(ctx, dataset, kind, k, rule);
    table.rows.push_back({kind, r.avg_length, r.avg_reward, r.selected_id, r.fallback_trajectories});
  }
  return table;
}

std::vector<std::string> verify_ranking_table(const RankingTable& stored, const AnalysisContext& ctx,
                                              const Dataset& dataset, OutcomeRule rule) {
  std::vector<RadicalKind> metrics;
  for (const auto& r : stored.rows) metrics.push_back(r.kind);
  RankingTable fresh = ranking_table(ctx, dataset, metrics, stored.k, rule);
  std::vector<std::string> diffs;
  if (stored.config_hash != fresh.config_hash) diffs.push_back("config_hash differs");
  for (std::size_t i = 0; i < stored.rows.size(); ++i) {
    const auto& a = stored.rows[i];
    const auto& b = fresh.rows[i];
    std::string m = to_string(a.kind);
    if (a.avg_length != b.avg_length) diffs.push_back(m + " avg_length " + num(a.avg_length) + " != " + num(b.avg_length));
    if (a.avg_reward != b.avg_reward) diffs.push_back(m + " avg_reward " + num(a.avg_reward) + " != " + num(b.avg_reward));
    if (a.selected_id != b.selected_id) diffs.push_back(m + " selected " + a.selected_id + " != " + b.selected_id);
    if (a.fallback_trajectories != b.fallback_trajectories) diffs.push_back(m + " fallback count differs");
  }
  return diffs;
}

FigureData counterfactual_figure_data(const CounterfactualSet& set) {
  if (set.rollouts.empty()) throw DataError("counterfactual set is empty");
  FigureData f;
  f.rollouts_csv = "deviation_step,forced_action,length,reward,outcome\n";
  for (const auto& r : set.rollouts) {
    f.rollouts_csv += std::to_string(r.deviation_step) + "," + std::to_string(r.forced_action) + "," +
                      std::to_string(r.length()) + "," + num(r.total_reward()) + "," + to_string(r.outcome()) + "\n";
  }
  f.original_csv = "original_length,original_reward\n" + std::to_string(set.original_length) + "," +
                   num(set.original_reward) + "\n";
  return f;
}

}  // namespace trajx
