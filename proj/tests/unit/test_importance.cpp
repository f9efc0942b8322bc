#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"
#include "trajx/env_config.hpp"
#include "trajx/error.hpp"
#include "trajx/importance.hpp"

using namespace trajx;
using testing_support::table;

namespace {

// Independent per-step radical straight from the raw Q-table.
double brute_radical(const QTable& q, const Transition& t, RadicalKind kind, StateId s_final, bool terminal) {
  auto row = [&](StateId s) {
    std::vector<double> r;
    for (ActionId a = 0; a < q.action_count(); ++a) r.push_back(q(s, a));
    return r;
  };
  auto value = [&](StateId s) {
    auto r = row(s);
    return *std::max_element(r.begin(), r.end());
  };
  double vmin = value(0), vmax = value(0);
  for (StateId s = 0; s < q.state_count(); ++s) {
    vmin = std::min(vmin, value(s));
    vmax = std::max(vmax, value(s));
  }
  auto r = row(t.state);
  const double n = static_cast<double>(r.size());
  switch (kind) {
    case RadicalKind::classic:
      return 1.0;
    case RadicalKind::naive: {
      double mu = 0.0;
      for (double x : r) mu += x;
      mu /= n;
      double ss = 0.0;
      for (double x : r) ss += (x - mu) * (x - mu);
      double sd = std::sqrt(ss / n);
      return sd < 1e-12 ? 0.0 : (r[static_cast<std::size_t>(t.action)] - mu) / sd;
    }
    case RadicalKind::bellman: {
      auto next = row(t.next_state);
      std::size_t best = 0;
      for (std::size_t i = 1; i < next.size(); ++i) {
        if (next[i] > next[best]) best = i;
      }
      double target = t.reward + (terminal ? 0.0 : q.gamma() * next[best]);
      return std::fabs(r[static_cast<std::size_t>(t.action)] - target);
    }
    case RadicalKind::entropy: {
      double m = *std::max_element(r.begin(), r.end());
      double z = 0.0;
      for (double x : r) z += std::exp(x - m);
      double h = 0.0;
      for (double x : r) {
        double p = std::exp(x - m) / z;
        if (p > 0) h -= p * std::log(p);
      }
      return std::clamp(1.0 - h / std::log(n), 0.0, 1.0);
    }
    case RadicalKind::vnorm:
      return vmax > vmin ? (value(t.state) - vmin) / (vmax - vmin) : 0.0;
    case RadicalKind::vgoal: {
      double g = value(s_final);
      if (std::fabs(g) < 1e-6) return vmax > vmin ? (value(t.state) - vmin) / (vmax - vmin) : 0.0;
      return std::fabs(value(t.state) / g);
    }
    case RadicalKind::kl:
      break;
  }
  return 0.0;
}

double brute_delta_q(const QTable& q, StateId s) {
  double hi = q(s, 0), lo = q(s, 0);
  for (ActionId a = 1; a < q.action_count(); ++a) {
    hi = std::max(hi, q(s, a));
    lo = std::min(lo, q(s, a));
  }
  return hi - lo;
}

}  // namespace

TEST(DeltaQ, HandValues) {
  QTable q = table({{2.0, -1.0, 0.5}, {4.0, 4.0, 4.0}});
  EXPECT_EQ(delta_q(q, 0), 3.0);
  EXPECT_EQ(delta_q(q, 1), 0.0);
}

TEST(DeltaQ, OracleStartStateMatchesEnumeration) {
  auto env = make_environment(env_preset("grid3"));
  QTable q = testing_support::oracle(*env);
  // enumerate all four action values from the model and the oracle values
  ValueView v(q);
  std::vector<double> values;
  for (ActionId a = 0; a < 4; ++a) {
    ModelStep m = env->model(env->initial_state(), a);
    values.push_back(m.reward + (m.terminal ? 0.0 : 0.95 * v.value(m.next_state)));
  }
  double expected = *std::max_element(values.begin(), values.end()) - *std::min_element(values.begin(), values.end());
  EXPECT_NEAR(delta_q(q, env->initial_state()), expected, 1e-9);
}

TEST(DeltaQ, NonNegativeShiftInvariantScaleEquivariant) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> row(4);
    for (double& x : row) x = u(gen);
    const double shift = u(gen);
    const double c = std::fabs(u(gen)) + 0.1;
    std::vector<double> shifted = row, scaled = row;
    for (double& x : shifted) x += shift;
    for (double& x : scaled) x *= c;
    QTable q = table({row, shifted, scaled});
    EXPECT_GE(delta_q(q, 0), 0.0);
    EXPECT_NEAR(delta_q(q, 1), delta_q(q, 0), 1e-9);
    EXPECT_NEAR(delta_q(q, 2), c * delta_q(q, 0), 1e-9);
  }
}

TEST(NaiveRadical, HandValues) {
  QTable q = table({{2.0, -1.0, 0.5}, {3.0, 3.0, 3.0}});
  QTable pair = table({{-7.0, 7.0}});
  Radical r = radical_naive(q, 0, 0);
  // mu = 0.5, sigma = sqrt(1.5)
  EXPECT_NEAR(r.value, std::sqrt(1.5), 1e-12);
  EXPECT_NEAR(r.value, 1.22474, 1e-5);
  EXPECT_FALSE(r.fallback);
  Radical flat = radical_naive(q, 1, 2);
  EXPECT_EQ(flat.value, 0.0);
  EXPECT_TRUE(flat.fallback);
  EXPECT_EQ(radical_naive(pair, 0, 1).value, 1.0);
  EXPECT_EQ(radical_naive(pair, 0, 0).value, -1.0);  // signed, not clamped
}

TEST(BellmanRadical, HandValues) {
  QTable q = table({{1.0, 0.0}, {2.0, 1.5}}, 0.99);
  Transition t{0, 0, -1.0, 1, false};
  EXPECT_NEAR(radical_bellman(q, t, false), 0.02, 1e-9);
  QTable term = table({{-1.0, 0.0}, {5.0, 5.0}}, 0.99);
  EXPECT_EQ(radical_bellman(term, Transition{0, 0, -1.0, 1, true}, true), 0.0);
}

TEST(BellmanRadical, BelowToleranceOnOracleGreedyPath) {
  for (const char* name : {"grid5", "lander"}) {
    auto env = make_environment(env_preset(name));
    const double tol = 1e-10;
    QTable q = value_iteration_oracle(*env, 0.95, tol).q;
    Trajectory t = testing_support::greedy_episode(*env, q);
    for (const auto& s : t.transitions) {
      EXPECT_LT(radical_bellman(q, s, env->is_terminal(s.next_state)), tol) << name;
    }
  }
}

TEST(EntropyRadical, EndpointsExactAndHandValue) {
  EXPECT_EQ(entropy_confidence(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 0.0);
  EXPECT_EQ(entropy_confidence(std::vector<double>{1.0, 0.0, 0.0, 0.0}), 1.0);
  const double h = -0.8 * std::log(0.8) - 0.2 * std::log(0.2);
  const double r = entropy_confidence(std::vector<double>{0.8, 0.2});
  EXPECT_NEAR(r, 1.0 - h / std::log(2.0), 1e-12);
  EXPECT_NEAR(h, 0.5004, 1e-4);
  EXPECT_NEAR(r, 0.2780, 1e-4);
}

TEST(EntropyRadical, AlwaysInUnitInterval) {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> row(static_cast<std::size_t>(2 + i % 4));
    for (double& x : row) x = u(gen);
    QTable q = table({row});
    for (double temp : {0.01, 1.0, 100.0}) {
      double r = radical_entropy(PolicySnapshot(q, temp), 0);
      EXPECT_GE(r, 0.0);
      EXPECT_LE(r, 1.0);
    }
  }
}

TEST(VNormRadical, EndpointsAndMidpoint) {
  QTable q = table({{-10.0, -12.0}, {0.0, -1.0}, {-5.0, -7.0}});
  ValueView v(q);
  EXPECT_EQ(radical_vnorm(v, 0).value, 0.0);
  EXPECT_EQ(radical_vnorm(v, 1).value, 1.0);
  EXPECT_EQ(radical_vnorm(v, 2).value, 0.5);
  Radical flat = radical_vnorm(ValueView(table({{1.0, 0.0}, {1.0, 0.5}})), 0);
  EXPECT_EQ(flat.value, 0.0);
  EXPECT_TRUE(flat.fallback);
}

TEST(VGoalRadical, RatioAndGuard) {
  QTable q = table({{-5.0, -6.0}, {-1.0, -2.0}, {0.0, -3.0}, {-10.0, -20.0}});
  ValueView v(q);
  EXPECT_EQ(radical_vgoal(v, 1, 1).value, 1.0);
  EXPECT_EQ(radical_vgoal(v, 0, 1).value, 5.0);
  Radical g = radical_vgoal(v, 0, 2);  // V(s_final) = 0
  EXPECT_TRUE(g.fallback);
  EXPECT_EQ(g.value, radical_vnorm(v, 0).value);
}

TEST(KlRadical, HandValues) {
  std::vector<double> uniform4(4, 0.25);
  EXPECT_EQ(kl_divergence(uniform4, uniform4), 0.0);
  EXPECT_NEAR(kl_divergence(std::vector<double>{1.0, 0.0, 0.0, 0.0}, uniform4), std::log(4.0), 1e-12);
  double kl = kl_divergence(std::vector<double>{0.8, 0.2}, std::vector<double>{0.5, 0.5});
  EXPECT_NEAR(kl, 0.8 * std::log(1.6) + 0.2 * std::log(0.4), 1e-12);
  EXPECT_NEAR(kl, 0.1927, 1e-4);
  EXPECT_THROW(kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}), DataError);
}

TEST(KlRadical, ReferenceParsing) {
  EXPECT_EQ(KlReference::parse("uniform").distribution(4), std::vector<double>(4, 0.25));
  EXPECT_EQ(KlReference::parse("point:2").distribution(3), (std::vector<double>{0.0, 0.0, 1.0}));
  EXPECT_EQ(KlReference::parse("custom:1,3").distribution(2), (std::vector<double>{0.25, 0.75}));
  EXPECT_THROW(KlReference::parse("custom:1,x"), ConfigError);
  EXPECT_THROW(KlReference::parse("gaussian"), ConfigError);
  EXPECT_THROW(KlReference::parse("point:5").distribution(4), ConfigError);
  EXPECT_THROW(KlReference::parse("custom:1,1,1").distribution(2), ConfigError);
}

TEST(KlRadical, NeedsExperimentalFlagAndReference) {
  QTable q = table({{1.0, 0.0}, {0.0, 0.0}});
  AnalysisContext ctx(q);
  Transition t{0, 0, -1.0, 1, true};
  EXPECT_THROW(importance(ctx, t, RadicalKind::kl, 0), ConfigError);
  ctx.experimental = true;
  EXPECT_THROW(importance(ctx, t, RadicalKind::kl, 0), ConfigError);
  ctx.kl_reference = KlReference::parse("uniform");
  StepImportance s = importance(ctx, t, RadicalKind::kl, 0);
  auto p = softmax(q.row(0), 1.0);
  EXPECT_EQ(s.radical, kl_divergence(p, std::vector<double>{0.5, 0.5}));
  // a point-mass reference misses the action the policy can still take
  ctx.kl_reference = KlReference::parse("point:0");
  EXPECT_THROW(importance(ctx, t, RadicalKind::kl, 0), DataError);
}

TEST(StepImportance, ClassicAndConstantRow) {
  QTable q = table({{2.0, -1.0, 0.5}, {1.0, 1.0, 1.0}});
  AnalysisContext ctx(q);
  Transition t{0, 1, -1.0, 1, false};
  EXPECT_EQ(importance(ctx, t, RadicalKind::classic, 0).product, 3.0);
  Transition flat{1, 0, -1.0, 0, false};
  for (RadicalKind k : standard_radical_kinds()) EXPECT_EQ(importance(ctx, flat, k, 0).product, 0.0);
}

// Chain 0 -> 1 -> 2 -> 3 (terminal), always action 0.
// V = -2, -1, -0.5; dQ = 2, 2, 1.5; s_final = 2
// vgoal radicals |V/V(2)| = 4, 2, 1; products 8, 4, 1.5; mean 4.5
TEST(TrajectoryImportance, VGoalHandChain) {
  QTable q = table({{-2.0, -4.0}, {-1.0, -3.0}, {-0.5, -2.0}, {0.0, 0.0}});
  AnalysisContext ctx(q);
  Trajectory t = testing_support::trajectory(
      "chain", {{0, 0, -1.0, 1, false}, {1, 0, -1.0, 2, false}, {2, 0, -1.0, 3, true}});
  ImportanceBreakdown b = trajectory_importance(ctx, t, RadicalKind::vgoal);
  ASSERT_EQ(b.steps.size(), 3u);
  EXPECT_EQ(b.final_state, 2);
  const double dq[] = {2.0, 2.0, 1.5};
  const double rad[] = {4.0, 2.0, 1.0};
  const double prod[] = {8.0, 4.0, 1.5};
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(b.steps[static_cast<std::size_t>(i)].delta_q, dq[i]);
    EXPECT_EQ(b.steps[static_cast<std::size_t>(i)].radical, rad[i]);
    EXPECT_EQ(b.steps[static_cast<std::size_t>(i)].product, prod[i]);
  }
  EXPECT_EQ(b.i_tau, 4.5);
  EXPECT_FALSE(b.goal_fallback);
}

TEST(TrajectoryImportance, MeanOfProducts) {
  // Classic products equal the row gaps 1, 2, 3
  QTable q = table({{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}, {0.0, 0.0}});
  AnalysisContext ctx(q);
  Trajectory t = testing_support::trajectory(
      "m", {{0, 0, -1.0, 1, false}, {1, 0, -1.0, 2, false}, {2, 0, -1.0, 3, true}});
  EXPECT_EQ(trajectory_importance(ctx, t, RadicalKind::classic).i_tau, 2.0);
  Trajectory single = testing_support::trajectory("s", {{2, 1, -1.0, 3, true}});
  for (RadicalKind k : standard_radical_kinds()) {
    ImportanceBreakdown b = trajectory_importance(ctx, single, k);
    EXPECT_EQ(b.i_tau, b.steps[0].product);
  }
  EXPECT_THROW(trajectory_importance(ctx, Trajectory{}, RadicalKind::classic), DataError);
}

TEST(TrajectoryImportance, BruteForceOnGridTrajectory) {
  auto env = make_environment(env_preset("grid5"));
  TrainConfig cfg;
  cfg.episodes = 300;
  QTable q = train(*env, cfg).q;
  // ten-step trajectory: up bumps then the path down the left column
  Episode ep(*env);
  std::vector<Transition> steps;
  const ActionId actions[] = {0, 0, 1, 1, 1, 1, 3, 2, 3, 3};
  for (ActionId a : actions) steps.push_back(ep.step(a));
  Trajectory t = testing_support::trajectory("ten", steps);
  ASSERT_EQ(t.length, 10);

  AnalysisContext ctx(q, 1.0, env->terminal_mask());
  for (RadicalKind k : standard_radical_kinds()) {
    ImportanceBreakdown b = trajectory_importance(ctx, t, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      double dq = brute_delta_q(q, steps[i].state);
      double r = brute_radical(q, steps[i], k, t.final_state(), env->is_terminal(steps[i].next_state));
      EXPECT_NEAR(b.steps[i].delta_q, dq, 1e-12);
      EXPECT_NEAR(b.steps[i].radical, r, 1e-12) << to_string(k) << " step " << i;
      sum += dq * r;
    }
    EXPECT_NEAR(b.i_tau, sum / 10.0, 1e-12) << to_string(k);
  }
}

TEST(TrajectoryImportance, ProductAndMeanIdentitiesBitExact) {
  auto env = make_environment(env_preset("lander"));
  TrainConfig cfg;
  cfg.episodes = 300;
  QTable q = train(*env, cfg).q;
  AnalysisContext ctx(q, 1.0, env->terminal_mask());
  ctx.experimental = true;
  ctx.kl_reference = KlReference::parse("uniform");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Trajectory t = rollout_episode(*env, q, RolloutMode::epsilon_greedy, 0.2, seed);
    for (RadicalKind k : {RadicalKind::classic, RadicalKind::naive, RadicalKind::bellman, RadicalKind::entropy,
                          RadicalKind::vnorm, RadicalKind::vgoal, RadicalKind::kl}) {
      ImportanceBreakdown b = trajectory_importance(ctx, t, k);
      double sum = 0.0;
      for (const auto& s : b.steps) {
        EXPECT_EQ(s.product, s.delta_q * s.radical);
        sum += s.product;
      }
      EXPECT_EQ(b.i_tau, sum / static_cast<double>(b.steps.size()));
      if (k == RadicalKind::vnorm || k == RadicalKind::entropy) {
        for (const auto& s : b.steps) {
          EXPECT_GE(s.radical, 0.0);
          EXPECT_LE(s.radical, 1.0);
        }
      }
    }
  }
}

TEST(TrajectoryImportance, ClassicIgnoresStepOrder) {
  auto env = make_environment(env_preset("grid5"));
  QTable q = testing_support::oracle(*env);
  AnalysisContext ctx(q);
  Trajectory t = rollout_episode(*env, q, RolloutMode::epsilon_greedy, 0.3, 5);
  Trajectory shuffled = t;
  std::mt19937 gen(1);
  std::shuffle(shuffled.transitions.begin(), shuffled.transitions.end(), gen);
  EXPECT_NEAR(trajectory_importance(ctx, t, RadicalKind::classic).i_tau,
              trajectory_importance(ctx, shuffled, RadicalKind::classic).i_tau, 1e-12);
}
