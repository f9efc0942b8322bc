#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "trajx/agent.hpp"
#include "trajx/env_config.hpp"
#include "trajx/error.hpp"
#include "trajx/rng.hpp"
#include "trajx/trajectory.hpp"

using namespace trajx;

namespace {

struct Fixture {
  std::shared_ptr<const Environment> env;
  TrainResult trained;
};

Fixture trained(const char* name, int episodes, std::uint64_t seed = 1) {
  Fixture f{make_environment(env_preset(name)), {}};
  TrainConfig cfg;
  cfg.episodes = episodes;
  cfg.seed = seed;
  f.trained = train(*f.env, cfg);
  return f;
}

std::string to_text(const Dataset& d) {
  std::ostringstream out;
  write_dataset(d, out);
  return out.str();
}

Dataset from_text(const std::string& s, bool validate = true) {
  std::istringstream in(s);
  return read_dataset(in, validate);
}

}  // namespace

TEST(Collect, ConvergedGreedyCheckpointGivesIdenticalOptimalEpisodes) {
  Fixture f = trained("grid3", 2000);
  std::vector<Checkpoint> one{f.trained.checkpoints.back()};
  CollectConfig cc;
  cc.mode = RolloutMode::greedy;
  Dataset d = collect(*f.env, one, cc);
  ASSERT_EQ(d.trajectories.size(), 20u);
  for (const auto& t : d.trajectories) {
    EXPECT_EQ(t.length, 4);
    EXPECT_EQ(t.transitions, d.trajectories.front().transitions);
  }
}

TEST(Collect, EarlyAndLateCheckpointsSpreadLengths) {
  Fixture f = trained("grid5", 2000);
  std::vector<Checkpoint> two{f.trained.checkpoints.front(), f.trained.checkpoints.back()};
  CollectConfig cc;
  cc.seed = 9;
  Dataset d = collect(*f.env, two, cc);
  auto [lo, hi] = std::minmax_element(d.trajectories.begin(), d.trajectories.end(),
                                      [](const auto& a, const auto& b) { return a.length < b.length; });
  EXPECT_GT(hi->length, lo->length);
}

TEST(Collect, EmptyCheckpointListRejected) {
  auto env = make_environment(env_preset("grid3"));
  EXPECT_THROW(collect(*env, std::vector<Checkpoint>{}, CollectConfig{}), ConfigError);
}

TEST(Collect, InvariantsHoldOnCollectedData) {
  Fixture f = trained("grid5", 300, 4);
  CollectConfig cc;
  cc.seed = derive_seed(4, "collect");
  Dataset d = collect(*f.env, f.trained.checkpoints, cc);
  EXPECT_TRUE(dataset_violations(d, f.env.get()).empty());
  for (const auto& t : d.trajectories) {
    EXPECT_LE(t.length, f.env->spec().max_steps);
    EXPECT_EQ(t.total_reward, -static_cast<double>(t.length));
    EXPECT_EQ(t.seed, derive_seed(cc.seed, t.id));
  }
  // same seed, same data
  EXPECT_EQ(collect(*f.env, f.trained.checkpoints, cc), d);
}

TEST(Persistence, RoundTripEqual) {
  Fixture f = trained("grid3", 300);
  Dataset d = collect(*f.env, f.trained.checkpoints, CollectConfig{});
  d.qtable_ref = "qtable.json";
  EXPECT_EQ(from_text(to_text(d)), d);

  testing_support::TempDir dir("ds");
  save_dataset(d, dir.path() / "d.traj.jsonl");
  EXPECT_EQ(load_dataset(dir.path() / "d.traj.jsonl"), d);
}

TEST(Persistence, ThousandTrajectoryChecksum) {
  Fixture f = trained("lander", 300);
  CollectConfig cc;
  cc.episodes_per_checkpoint = 200;
  Dataset d = collect(*f.env, f.trained.checkpoints, cc);
  ASSERT_EQ(d.trajectories.size(), 1000u);
  Dataset back = from_text(to_text(d));
  ASSERT_EQ(back.trajectories.size(), 1000u);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) {
    a += d.trajectories[i].total_reward;
    b += back.trajectories[i].total_reward;
    EXPECT_EQ(d.trajectories[i].total_reward, back.trajectories[i].total_reward);
  }
  EXPECT_EQ(a, b);
}

TEST(Persistence, TruncatedLastLineNamesTheLine) {
  Fixture f = trained("grid3", 50);
  CollectConfig cc;
  cc.episodes_per_checkpoint = 1;
  std::string text = to_text(collect(*f.env, f.trained.checkpoints, cc));
  text.resize(text.size() - 15);
  try {
    from_text(text);
    FAIL() << "truncated dataset accepted";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 6"), std::string::npos) << e.what();
  }
}

TEST(Persistence, CorruptionCases) {
  Fixture f = trained("grid3", 50);
  CollectConfig cc;
  cc.episodes_per_checkpoint = 1;
  Dataset d = collect(*f.env, f.trained.checkpoints, cc);

  Dataset bad_len = d;
  bad_len.trajectories[1].length += 1;
  try {
    from_text(to_text(bad_len));
    FAIL();
  } catch (const PropertyViolation& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("length"), std::string::npos) << msg;
  }
  // without validation the record is loaded as stored
  EXPECT_EQ(from_text(to_text(bad_len), false).trajectories[1].length, bad_len.trajectories[1].length);

  Dataset broken_chain = d;
  ASSERT_GE(broken_chain.trajectories[0].transitions.size(), 2u);
  broken_chain.trajectories[0].transitions[1].state += 1;
  EXPECT_THROW(from_text(to_text(broken_chain)), PropertyViolation);

  Dataset early_done = d;
  early_done.trajectories[0].transitions[0].done = true;
  EXPECT_THROW(from_text(to_text(early_done)), PropertyViolation);

  std::string text = to_text(d);
  std::string wrong_count = text;
  wrong_count.replace(wrong_count.find("\"count\":5"), 9, "\"count\":7");
  EXPECT_THROW(from_text(wrong_count), DataError);

  std::string wrong_version = text;
  wrong_version.replace(wrong_version.find("\"version\":1"), 11, "\"version\":9");
  EXPECT_THROW(from_text(wrong_version), DataError);
}

TEST(Persistence, ReplayDetectsTamperedReward) {
  Fixture f = trained("grid3", 50);
  CollectConfig cc;
  cc.episodes_per_checkpoint = 1;
  Dataset d = collect(*f.env, f.trained.checkpoints, cc);
  d.trajectories[2].transitions[0].reward = -2.0;
  d.trajectories[2].refresh_totals();
  EXPECT_TRUE(dataset_violations(d).empty());
  EXPECT_FALSE(dataset_violations(d, f.env.get()).empty());
}

TEST(Persistence, DuplicateIdsReported) {
  Fixture f = trained("grid3", 50);
  CollectConfig cc;
  cc.episodes_per_checkpoint = 1;
  Dataset d = collect(*f.env, f.trained.checkpoints, cc);
  d.trajectories[1].id = d.trajectories[0].id;
  EXPECT_FALSE(dataset_violations(d).empty());
}

TEST(Persistence, HashMismatchAgainstQTable) {
  Fixture f = trained("grid3", 50);
  Dataset d = collect(*f.env, f.trained.checkpoints, CollectConfig{});
  EXPECT_NO_THROW(check_compatible(d, f.trained.q));
  Fixture other = trained("grid5", 10);
  EXPECT_THROW(check_compatible(d, other.trained.q), HashMismatch);
}
