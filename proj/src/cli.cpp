#include "trajx/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "trajx/agent.hpp"
#include "trajx/counterfactual.hpp"
#include "trajx/env_config.hpp"
#include "trajx/error.hpp"
#include "trajx/ranking.hpp"
#include "trajx/report.hpp"
#include "trajx/rng.hpp"
#include "trajx/service.hpp"
#include "trajx/trajectory.hpp"

namespace fs = std::filesystem;

namespace trajx::cli {

std::string ranking_stem(RadicalKind metric, int k, std::uint64_t seed, const std::string& config_hash) {
  return std::string("ranking-") + to_string(metric) + "-k" + std::to_string(k) + "-seed" + std::to_string(seed) +
         "-" + config_hash;
}

std::string cfset_stem(RadicalKind metric, int k, std::uint64_t seed, const std::string& config_hash) {
  return std::string("cf-") + to_string(metric) + "-k" + std::to_string(k) + "-seed" + std::to_string(seed) + "-" +
         config_hash;
}

std::string table_stem(int k, std::uint64_t seed, const std::string& config_hash) {
  return "table-k" + std::to_string(k) + "-seed" + std::to_string(seed) + "-" + config_hash;
}

namespace {

struct Options {
  // common
  fs::path out = "out";
  std::uint64_t seed = 0;
  std::string env;
  fs::path config;
  fs::path dataset;
  fs::path qtable;
  // train
  TrainConfig train;
  // collect
  int per_checkpoint = 20;
  double collect_epsilon = 0.1;
  bool greedy = false;
  // rank / cf / report
  std::string metric = "vgoal";
  int k = 5;
  std::string kl_reference;
  bool experimental = false;
  std::string rule;
  double temperature = 1.0;
  std::vector<std::string> metrics;
  fs::path verify;
  fs::path cfset;
  // cf
  std::optional<std::size_t> budget;
  std::string id;
  std::optional<int> step;
  std::optional<int> action;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

EnvConfig resolve_env(const Options& o) {
  if (!o.config.empty() && !o.env.empty()) throw ConfigError("pass either --env or --config, not both");
  if (!o.config.empty()) return load_env_config(o.config);
  if (!o.env.empty()) return env_preset(o.env);
  fs::path saved = o.out / kEnvFile;
  if (fs::exists(saved)) return load_env_config(saved);
  throw ConfigError("no environment: pass --env NAME or --config FILE, or run train into --out first");
}

fs::path dataset_path(const Options& o) { return o.dataset.empty() ? o.out / kDatasetFile : o.dataset; }
fs::path qtable_path(const Options& o) { return o.qtable.empty() ? o.out / kQTableFile : o.qtable; }

OutcomeRule resolve_rule(const Options& o) {
  // Both built-in profiles rank outcomes by reward first, then length.
  return o.rule.empty() ? OutcomeRule::reward_then_length : parse_outcome_rule(o.rule);
}

RadicalKind resolve_metric(const Options& o, AnalysisContext& ctx) {
  RadicalKind kind = parse_radical_kind(o.metric);
  if (!o.kl_reference.empty()) ctx.kl_reference = KlReference::parse(o.kl_reference);
  ctx.experimental = o.experimental;
  if (kind == RadicalKind::kl) {
    if (!o.experimental) throw ConfigError("--metric kl requires --experimental");
    if (!ctx.kl_reference) throw ConfigError("--metric kl requires --kl-reference");
  }
  return kind;
}

struct Loaded {
  EnvConfig config;
  std::shared_ptr<const Environment> env;
  QTable q;
  Dataset dataset;
};

Loaded load_analysis(const Options& o) {
  Loaded l{resolve_env(o), nullptr, load_qtable(qtable_path(o)), load_dataset(dataset_path(o))};
  l.env = make_environment(l.config);
  check_compatible(l.dataset, l.q);
  if (l.q.config_hash != l.env->config_hash()) {
    throw HashMismatch("Q-table config hash " + l.q.config_hash + " does not match environment " +
                       l.env->config_hash() + "; pass the --env/--config the data was made with");
  }
  return l;
}

int cmd_train(const Options& o, std::ostream& out) {
  EnvConfig cfg = resolve_env(o);
  auto env = make_environment(cfg);
  TrainConfig tc = o.train;
  tc.seed = derive_seed(o.seed, "train");
  TrainResult r = train(*env, tc);
  fs::create_directories(o.out);
  write_text(o.out / kEnvFile, cfg.canonical());
  save_qtable(r.q, o.out / kQTableFile);
  save_checkpoints(r.checkpoints, o.out / kCheckpointsFile);
  out << "trained " << cfg.name << " for " << tc.episodes << " episodes; wrote " << (o.out / kQTableFile).string()
      << " and " << r.checkpoints.size() << " checkpoints\n";
  return kOk;
}

int cmd_collect(const Options& o, std::ostream& out) {
  EnvConfig cfg = resolve_env(o);
  auto env = make_environment(cfg);
  auto checkpoints = load_checkpoints(o.out / kCheckpointsFile);
  for (const auto& c : checkpoints) {
    if (c.q.config_hash != env->config_hash()) {
      throw HashMismatch("checkpoint config hash " + c.q.config_hash + " does not match environment " +
                         env->config_hash());
    }
  }
  CollectConfig cc;
  cc.episodes_per_checkpoint = o.per_checkpoint;
  cc.mode = o.greedy ? RolloutMode::greedy : RolloutMode::epsilon_greedy;
  cc.epsilon = o.greedy ? 0.0 : o.collect_epsilon;
  cc.seed = derive_seed(o.seed, "collect");
  Dataset d = collect(*env, checkpoints, cc);
  d.qtable_ref = kQTableFile;
  fs::path path = dataset_path(o);
  save_dataset(d, path);
  out << "collected " << d.trajectories.size() << " trajectories into " << path.string() << "\n";
  return kOk;
}

int cmd_rank(const Options& o, std::ostream& out) {
  Loaded l = load_analysis(o);
  AnalysisContext ctx(l.q, o.temperature, l.env->terminal_mask());
  RadicalKind kind = resolve_metric(o, ctx);
  RankingReport r = rank(ctx, l.dataset, kind, o.k, resolve_rule(o));
  nlohmann::json j = ranking_to_json(r, l.dataset);
  if (ctx.kl_reference) j["kl_reference"] = ctx.kl_reference->describe();
  std::string stem = ranking_stem(kind, o.k, o.seed, l.env->config_hash());
  write_text(o.out / (stem + ".json"), j.dump(2) + "\n");
  write_text(o.out / (stem + ".csv"), ranking_csv(r));
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s top-%d: avg length %.2f, avg reward %.2f, selected %s\n", to_string(kind), o.k,
                r.avg_length, r.avg_reward, r.selected_id.c_str());
  out << buf << "wrote " << (o.out / (stem + ".json")).string() << "\n";
  return kOk;
}

int cmd_cf(const Options& o, std::ostream& out) {
  Loaded l = load_analysis(o);
  if (o.step.has_value() != o.action.has_value()) throw ConfigError("--step and --action must be given together");
  if (o.step) {
    if (o.id.empty()) throw ConfigError("--step/--action need --id");
    const Trajectory& t = l.dataset.trajectories[l.dataset.index_of(o.id)];
    replay_check(*l.env, t);
    CounterfactualRollout r = counterfactual_rollout(*l.env, l.q, t, *o.step, static_cast<ActionId>(*o.action));
    nlohmann::json j = rollout_to_json(r);
    fs::path path = o.out / ("rollout-" + o.id + "-step" + std::to_string(*o.step) + "-action" +
                             std::to_string(*o.action) + "-" + l.env->config_hash() + ".json");
    write_text(path, j.dump() + "\n");
    out << j.dump() << "\n";
    return kOk;
  }

  AnalysisContext ctx(l.q, o.temperature, l.env->terminal_mask());
  RadicalKind kind = resolve_metric(o, ctx);
  std::size_t target;
  if (!o.id.empty()) {
    target = l.dataset.index_of(o.id);
  } else {
    target = rank(ctx, l.dataset, kind, o.k, resolve_rule(o)).selected;
  }
  CounterfactualSet set = generate_counterfactuals(*l.env, l.q, l.dataset.trajectories[target], o.budget,
                                                   derive_seed(o.seed, "counterfactual"));
  std::string stem = cfset_stem(kind, o.k, o.seed, l.env->config_hash());
  save_cfset(set, o.out / (stem + ".cfset.json"));
  ContrastiveSummary s = compare(set);
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "%zu counterfactuals of %s (length %d, reward %.2f): reward dominance %.3f, length dominance %.3f%s\n",
                set.rollouts.size(), set.original_id.c_str(), set.original_length, set.original_reward,
                s.reward_dominance, s.length_dominance, set.capped ? " (budget-capped)" : "");
  out << buf << "wrote " << (o.out / (stem + ".cfset.json")).string() << "\n";
  return kOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  Loaded l = load_analysis(o);
  AnalysisContext ctx(l.q, o.temperature, l.env->terminal_mask());
  RadicalKind kind = resolve_metric(o, ctx);
  std::vector<RadicalKind> metrics;
  if (o.metrics.empty()) {
    metrics = standard_radical_kinds();
  } else {
    for (const auto& m : o.metrics) metrics.push_back(parse_radical_kind(m));
  }
  OutcomeRule rule = resolve_rule(o);

  if (!o.verify.empty()) {
    std::ifstream in(o.verify, std::ios::binary);
    if (!in) throw DataError("cannot open " + o.verify.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError(o.verify.string() + ": malformed JSON");
    auto diffs = verify_ranking_table(RankingTable::from_json(j), ctx, l.dataset, rule);
    for (const auto& d : diffs) out << "mismatch: " << d << "\n";
    if (!diffs.empty()) throw PropertyViolation(std::to_string(diffs.size()) + " table cells differ from a recomputation");
    out << "table verified: every cell recomputes\n";
    return kOk;
  }

  RankingTable table = ranking_table(ctx, l.dataset, metrics, o.k, rule);
  std::string stem = table_stem(o.k, o.seed, l.env->config_hash());
  write_text(o.out / (stem + ".csv"), table.csv());
  write_text(o.out / (stem + ".txt"), table.text());
  write_text(o.out / (stem + ".json"), table.to_json().dump(2) + "\n");
  out << table.text();

  fs::path cf = o.cfset.empty() ? o.out / (cfset_stem(kind, o.k, o.seed, l.env->config_hash()) + ".cfset.json") : o.cfset;
  if (fs::exists(cf)) {
    CounterfactualSet set = load_cfset(cf);
    FigureData fig = counterfactual_figure_data(set);
    std::string base = cf.filename().string();
    base = base.substr(0, base.size() - std::string(".cfset.json").size());
    write_text(o.out / (base + "-rollouts.csv"), fig.rollouts_csv);
    write_text(o.out / (base + "-original.csv"), fig.original_csv);
    out << "wrote figure data for " << set.original_id << " (" << set.rollouts.size() << " rollouts)\n";
  } else if (!o.cfset.empty()) {
    throw DataError("cannot open " + cf.string());
  }
  return kOk;
}

int cmd_validate(const Options& o, std::ostream& out) {
  fs::path path = dataset_path(o);
  Dataset d = load_dataset(path, false);
  std::optional<EnvConfig> cfg;
  if (!o.env.empty() || !o.config.empty() || fs::exists(o.out / kEnvFile)) cfg = resolve_env(o);
  std::shared_ptr<const Environment> env = cfg ? make_environment(*cfg) : nullptr;
  auto violations = dataset_violations(d, env.get());
  for (const auto& v : violations) out << "violation: " << v << "\n";
  if (!violations.empty()) {
    throw PropertyViolation(path.string() + ": " + std::to_string(violations.size()) + " invariant violation(s), first: " +
                            violations.front());
  }
  out << path.string() << ": " << d.trajectories.size() << " trajectories valid"
      << (env ? " (replayed against " + cfg->name + ")" : " (no environment, replay skipped)") << "\n";
  return kOk;
}

int cmd_serve(const Options& o, std::ostream& out) {
  Bundle b = Bundle::load(o.out);
  if (!o.env.empty() || !o.config.empty()) {
    EnvConfig cfg = resolve_env(o);
    if (cfg.hash() != b.config.hash()) throw HashMismatch("bundle was built for config " + b.config.hash());
  }
  Service service(std::move(b));
  int port = service.bind(o.host, o.port);
  out << "serving bundle " << service.bundle().hash << " on http://" << o.host << ":" << port << "\n" << std::flush;
  service.listen();
  return kOk;
}

std::string timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void log_run(const fs::path& dir, const std::vector<std::string>& args, int code, const std::string& message) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return;
  std::ofstream log(dir / kLogFile, std::ios::app);
  log << timestamp() << " trajx";
  for (const auto& a : args) log << ' ' << a;
  log << " -> exit " << code;
  if (!message.empty()) log << " (" << message << ")";
  log << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Trajectory importance ranking and counterfactual explanations for tabular RL agents", "trajx"};
  app.require_subcommand(1);

  auto common = [&o](CLI::App* c) {
    c->add_option("--out", o.out, "Output directory")->capture_default_str();
    c->add_option("--seed", o.seed, "Root seed; stages derive their own")->capture_default_str();
    c->add_option("--env", o.env, "Built-in environment preset (grid1x2, grid3, grid5, lander)");
    c->add_option("--config", o.config, "Environment config file (key = value)");
  };
  auto analysis = [&o](CLI::App* c) {
    c->add_option("--dataset", o.dataset, "Dataset path (default OUT/dataset.traj.jsonl)");
    c->add_option("--qtable", o.qtable, "Analysis Q-table path (default OUT/qtable.json)");
    c->add_option("--metric", o.metric, "classic, naive, bellman, entropy, vnorm, vgoal or kl")->capture_default_str();
    c->add_option("--k", o.k, "Top-k size")->capture_default_str();
    c->add_option("--kl-reference", o.kl_reference, "uniform, point:<a> or custom:<w0>,<w1>,...");
    c->add_flag("--experimental", o.experimental, "Allow the experimental KL metric");
    c->add_option("--rule", o.rule, "reward-then-length or length-then-reward");
    c->add_option("--temperature", o.temperature, "Softmax temperature for policy-based radicals")
        ->capture_default_str();
  };

  auto* train = app.add_subcommand("train", "Train a Q-table and its checkpoints");
  common(train);
  train->add_option("--episodes", o.train.episodes, "Training episodes")->capture_default_str();
  train->add_option("--alpha", o.train.alpha, "Learning rate")->capture_default_str();
  train->add_option("--gamma", o.train.gamma, "Discount")->capture_default_str();
  train->add_option("--epsilon-start", o.train.epsilon.start)->capture_default_str();
  train->add_option("--epsilon-end", o.train.epsilon.end)->capture_default_str();
  train->add_option("--epsilon-decay", o.train.epsilon.decay_fraction, "Fraction of training spent decaying")
      ->capture_default_str();

  auto* collect_cmd = app.add_subcommand("collect", "Roll out every checkpoint into a trajectory dataset");
  common(collect_cmd);
  collect_cmd->add_option("--dataset", o.dataset, "Dataset path (default OUT/dataset.traj.jsonl)");
  collect_cmd->add_option("--episodes-per-checkpoint", o.per_checkpoint)->capture_default_str();
  collect_cmd->add_option("--epsilon", o.collect_epsilon, "Exploration during collection")->capture_default_str();
  collect_cmd->add_flag("--greedy", o.greedy, "Greedy checkpoint rollouts (epsilon 0)");

  auto* rank_cmd = app.add_subcommand("rank", "Rank trajectories by importance");
  common(rank_cmd);
  analysis(rank_cmd);

  auto* cf = app.add_subcommand("cf", "Counterfactual rollouts of the selected (or given) trajectory");
  common(cf);
  analysis(cf);
  cf->add_option("--budget", o.budget, "Maximum number of rollouts");
  cf->add_option("--id", o.id, "Explain this trajectory instead of the selected one");
  cf->add_option("--step", o.step, "Single rollout: deviation step (needs --id and --action)");
  cf->add_option("--action", o.action, "Single rollout: forced action");

  auto* report = app.add_subcommand("report", "Top-k table per metric and counterfactual figure data");
  common(report);
  analysis(report);
  report->add_option("--metrics", o.metrics, "Metrics for the table (default: all but kl)")->delimiter(',');
  report->add_option("--verify", o.verify, "Recompute a stored table JSON and diff it");
  report->add_option("--cfset", o.cfset, "Counterfactual set for figure data");

  auto* validate = app.add_subcommand("validate", "Re-check dataset invariants (replays when an env is known)");
  common(validate);
  validate->add_option("--dataset", o.dataset, "Dataset path (default OUT/dataset.traj.jsonl)");

  auto* serve = app.add_subcommand("serve", "Serve the bundle in --out over HTTP");
  common(serve);
  serve->add_option("--host", o.host)->capture_default_str();
  serve->add_option("--port", o.port)->capture_default_str();

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.push_back("trajx");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  int code = kUnexpected;
  std::string message;
  try {
    if (train->parsed()) code = cmd_train(o, out);
    else if (collect_cmd->parsed()) code = cmd_collect(o, out);
    else if (rank_cmd->parsed()) code = cmd_rank(o, out);
    else if (cf->parsed()) code = cmd_cf(o, out);
    else if (report->parsed()) code = cmd_report(o, out);
    else if (validate->parsed()) code = cmd_validate(o, out);
    else if (serve->parsed()) code = cmd_serve(o, out);
  } catch (const ConfigError& e) {
    code = kConfigError;
    message = std::string("config error: ") + e.what();
  } catch (const InvalidAction& e) {
    code = kConfigError;
    message = std::string("invalid action: ") + e.what();
  } catch (const HashMismatch& e) {
    code = kDataError;
    message = std::string("hash mismatch: ") + e.what();
  } catch (const DataError& e) {
    code = kDataError;
    message = std::string("data error: ") + e.what();
  } catch (const PropertyViolation& e) {
    code = kPropertyViolation;
    message = std::string("property violation: ") + e.what();
  } catch (const std::exception& e) {
    code = kUnexpected;
    message = std::string("error: ") + e.what();
  }
  if (!message.empty()) err << "trajx: " << message << "\n";
  log_run(o.out, args, code, message);
  return code;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace trajx::cli
