#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajx/agent.hpp"
#include "trajx/trajectory.hpp"

namespace trajx {

// Multiplicative factor applied to the Q-gap of a state.
enum class RadicalKind { classic, naive, bellman, entropy, vnorm, vgoal, kl };

const char* to_string(RadicalKind kind);
RadicalKind parse_radical_kind(std::string_view name);
// Every kind except the experimental KL one.
std::vector<RadicalKind> standard_radical_kinds();

// Reference action distribution for the KL radical.
//   "uniform" | "point:<action>" | "custom:<w0>,<w1>,..."
struct KlReference {
  enum class Kind { uniform, point_mass, custom };
  Kind kind = Kind::uniform;
  ActionId action = 0;
  std::vector<double> weights;

  static KlReference parse(std::string_view text);
  std::string describe() const;
  std::vector<double> distribution(int action_count) const;
};

// Everything the radicals read, frozen for one analysis run.
struct AnalysisContext {
  AnalysisContext(const QTable& q, double temperature = 1.0, std::vector<bool> terminal = {});

  const QTable& q;
  PolicySnapshot policy;
  ValueView values;
  // Terminal states for the Bellman bootstrap; when empty, a transition's
  // done flag decides.
  std::vector<bool> terminal;
  std::optional<KlReference> kl_reference;
  bool experimental = false;

  bool is_terminal(const Transition& t) const;
};

// A radical value plus whether a guard replaced the formula.
struct Radical {
  double value = 0.0;
  bool fallback = false;
};

// max_a Q(s,a) - min_a Q(s,a).
double delta_q(const QTable& q, StateId s);

// (Q(s,a) - mean) / population stddev of the row; 0 with fallback when the
// stddev is below 1e-12. Sign is kept.
Radical radical_naive(const QTable& q, StateId s, ActionId a);

// |Q(s,a) - (r + gamma * Q(s', greedy(s')))|, bootstrap dropped when terminal.
double radical_bellman(const QTable& q, const Transition& t, bool terminal);

// 1 - H(p) / ln|A|, natural log.
double entropy_confidence(std::span<const double> probs);
double radical_entropy(const PolicySnapshot& policy, StateId s);

// (V(s) - V_min) / (V_max - V_min); 0 with fallback when the range is empty.
Radical radical_vnorm(const ValueView& values, StateId s);

// |V(s) / V(s_final)|; falls back to radical_vnorm (flagged) when
// |V(s_final)| < ValueView::kGoalEpsilon.
Radical radical_vgoal(const ValueView& values, StateId s, StateId s_final);

// KL(p || x) with 0 log 0 = 0. Throws DataError when x has a zero where p does not.
double kl_divergence(std::span<const double> p, std::span<const double> x);
double radical_kl(const PolicySnapshot& policy, StateId s, const KlReference& reference);

struct StepImportance {
  double delta_q = 0.0;
  double radical = 0.0;
  double product = 0.0;
  bool fallback = false;
};

// delta_q(s) * radical. `s_final` is only read by vgoal.
StepImportance importance(const AnalysisContext& ctx, const Transition& t, RadicalKind kind, StateId s_final);

struct ImportanceBreakdown {
  RadicalKind kind = RadicalKind::classic;
  std::vector<StepImportance> steps;
  double i_tau = 0.0;
  StateId final_state = 0;
  // The whole trajectory used the vnorm form because |V(s_final)| was ~0.
  bool goal_fallback = false;
  int fallback_steps = 0;
};

// Mean of per-step products; s_final is the state the last action was taken from.
ImportanceBreakdown trajectory_importance(const AnalysisContext& ctx, const Trajectory& traj, RadicalKind kind);

nlohmann::json breakdown_to_json(const ImportanceBreakdown& b);

}  // namespace trajx
