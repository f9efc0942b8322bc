#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajx/importance.hpp"
#include "trajx/trajectory.hpp"

namespace trajx {

struct RankedEntry {
  std::size_t index = 0;  // position in the dataset
  std::string id;
  double score = 0.0;
  bool goal_fallback = false;
};

// How the explanation target is picked among the top-k.
enum class OutcomeRule { reward_then_length, length_then_reward };

const char* to_string(OutcomeRule rule);
OutcomeRule parse_outcome_rule(std::string_view name);

struct RankingReport {
  RadicalKind kind = RadicalKind::classic;
  int k = 5;
  std::vector<RankedEntry> ranked;  // descending score, ties by lower index
  std::vector<std::size_t> top_k;   // dataset indices
  std::size_t selected = 0;         // dataset index of the explanation target
  std::string selected_id;
  OutcomeRule rule = OutcomeRule::reward_then_length;
  double avg_length = 0.0;
  double avg_reward = 0.0;
  int fallback_trajectories = 0;
};

// Dataset indices ordered by descending score; equal scores keep index order.
std::vector<std::size_t> order_by_score(std::span<const double> scores);

// Ranks by trajectory importance, fills top-k aggregates and selects the target.
RankingReport rank(const AnalysisContext& ctx, const Dataset& dataset, RadicalKind kind, int k,
                   OutcomeRule rule = OutcomeRule::reward_then_length);

// Among the report's top-k: best outcome under `rule`, then lowest index.
std::size_t select_explanation_target(const RankingReport& report, const Dataset& dataset,
                                      OutcomeRule rule = OutcomeRule::reward_then_length);

nlohmann::json ranking_to_json(const RankingReport& r, const Dataset& d);
// metric,statistic,value rows for avg_length and avg_reward.
std::string ranking_csv(const RankingReport& r);

}  // namespace trajx
