#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajx/counterfactual.hpp"
#include "trajx/importance.hpp"
#include "trajx/ranking.hpp"

namespace trajx {

struct RankingTableRow {
  RadicalKind kind = RadicalKind::classic;
  double avg_length = 0.0;
  double avg_reward = 0.0;
  std::string selected_id;
  int fallback_trajectories = 0;

  bool operator==(const RankingTableRow&) const = default;
};

// Top-k quality per metric: one row per metric.
struct RankingTable {
  int k = 5;
  std::string config_hash;
  std::vector<RankingTableRow> rows;

  const RankingTableRow& row(RadicalKind kind) const;
  // metric,statistic,value lines (avg_length, avg_reward per metric).
  std::string csv() const;
  std::string text() const;
  nlohmann::json to_json() const;
  static RankingTable from_json(const nlohmann::json& j);
};

RankingTable ranking_table(const AnalysisContext& ctx, const Dataset& dataset, std::span<const RadicalKind> metrics,
                           int k, OutcomeRule rule = OutcomeRule::reward_then_length);

// Recomputes `stored` from the dataset and Q-table; returns one message per
// differing cell (empty when everything matches).
std::vector<std::string> verify_ranking_table(const RankingTable& stored, const AnalysisContext& ctx,
                                              const Dataset& dataset,
                                              OutcomeRule rule = OutcomeRule::reward_then_length);

struct FigureData {
  // deviation_step,forced_action,length,reward,outcome — one row per rollout.
  std::string rollouts_csv;
  // original_length,original_reward — the reference line.
  std::string original_csv;
};

// Throws DataError for an empty set.
FigureData counterfactual_figure_data(const CounterfactualSet& set);

}  // namespace trajx
