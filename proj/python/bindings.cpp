#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "trajx/agent.hpp"
#include "trajx/cli.hpp"
#include "trajx/counterfactual.hpp"
#include "trajx/env_config.hpp"
#include "trajx/error.hpp"
#include "trajx/importance.hpp"
#include "trajx/ranking.hpp"
#include "trajx/rng.hpp"
#include "trajx/trajectory.hpp"

namespace py = pybind11;
using namespace trajx;

namespace {

// Structured results cross the boundary as JSON text; the package decodes them.
// pybind11 holders cannot be const; Python only gets read-only accessors.
using EnvPtr = std::shared_ptr<Environment>;

EnvPtr hold(std::shared_ptr<const Environment> env) { return std::const_pointer_cast<Environment>(std::move(env)); }

AnalysisContext context(const EnvPtr& env, const QTable& q, double temperature, bool experimental,
                        const std::string& kl_reference) {
  AnalysisContext ctx(q, temperature, env->terminal_mask());
  ctx.experimental = experimental;
  if (!kl_reference.empty()) ctx.kl_reference = KlReference::parse(kl_reference);
  return ctx;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Trajectory importance ranking and counterfactual rollouts";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  auto data = py::register_exception<DataError>(m, "DataError", base);
  py::register_exception<PropertyViolation>(m, "PropertyViolation", base);
  py::register_exception<InvalidAction>(m, "InvalidAction", base);
  py::register_exception<HashMismatch>(m, "HashMismatch", data);
  py::register_exception<ReplayDivergence>(m, "ReplayDivergence", data);

  py::class_<Environment, EnvPtr>(m, "Environment")
      .def_property_readonly("name", [](const Environment& e) { return e.spec().name; })
      .def_property_readonly("state_count", &Environment::state_count)
      .def_property_readonly("action_count", &Environment::action_count)
      .def_property_readonly("initial_state", &Environment::initial_state)
      .def_property_readonly("config_hash", &Environment::config_hash)
      .def("is_terminal", &Environment::is_terminal)
      .def("action_name", &Environment::action_name)
      .def("layout_json", [](const Environment& e) { return e.layout().dump(); });

  py::class_<QTable>(m, "QTable")
      .def_property_readonly("state_count", &QTable::state_count)
      .def_property_readonly("action_count", &QTable::action_count)
      .def_property_readonly("gamma", &QTable::gamma)
      .def_readonly("config_hash", &QTable::config_hash)
      .def("value", [](const QTable& q, StateId s, ActionId a) { return q(s, a); })
      .def("row", [](const QTable& q, StateId s) {
        auto r = q.row(s);
        return std::vector<double>(r.begin(), r.end());
      })
      .def("visits", &QTable::visits)
      .def("to_json", [](const QTable& q) { return qtable_to_json(q).dump(); })
      .def("__eq__", [](const QTable& a, const QTable& b) { return a == b; });

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("fraction", &Checkpoint::fraction)
      .def_readonly("episode", &Checkpoint::episode)
      .def_readonly("q", &Checkpoint::q);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("id", &Trajectory::id)
      .def_readonly("length", &Trajectory::length)
      .def_readonly("total_reward", &Trajectory::total_reward)
      .def_readonly("checkpoint_fraction", &Trajectory::checkpoint_fraction)
      .def_property_readonly("outcome", [](const Trajectory& t) { return std::string(to_string(t.outcome)); })
      .def("to_json", [](const Trajectory& t) { return trajectory_to_json(t).dump(); });

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("env_name", &Dataset::env_name)
      .def_readonly("config_hash", &Dataset::config_hash)
      .def_readonly("trajectories", &Dataset::trajectories)
      .def("__len__", [](const Dataset& d) { return d.trajectories.size(); })
      .def("__getitem__", [](const Dataset& d, const std::string& id) { return d.trajectories[d.index_of(id)]; })
      .def("save", [](const Dataset& d, const std::filesystem::path& p) { save_dataset(d, p); });

  m.def("presets", &env_preset_names);
  m.def("make_env", [](const std::string& preset) { return hold(make_environment(env_preset(preset))); },
        py::arg("preset"));
  m.def("load_env", [](const std::filesystem::path& p) { return hold(make_environment(load_env_config(p))); },
        py::arg("path"));
  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("stage"));

  m.def(
      "train",
      [](const EnvPtr& env, int episodes, std::uint64_t seed, double gamma, double alpha) {
        TrainConfig tc;
        tc.episodes = episodes;
        tc.seed = seed;
        tc.gamma = gamma;
        tc.alpha = alpha;
        TrainResult r = train(*env, tc);
        return py::make_tuple(r.q, r.checkpoints);
      },
      py::arg("env"), py::arg("episodes") = 2000, py::arg("seed") = 0, py::arg("gamma") = 0.95, py::arg("alpha") = 0.5);

  m.def(
      "value_iteration",
      [](const EnvPtr& env, double gamma, double tol) {
        QTable q = value_iteration_oracle(*env, gamma, tol).q;
        q.config_hash = env->config_hash();
        q.env_name = env->spec().name;
        return q;
      },
      py::arg("env"), py::arg("gamma") = 0.95, py::arg("tol") = 1e-10);

  m.def(
      "collect",
      [](const EnvPtr& env, const std::vector<Checkpoint>& checkpoints, int per_checkpoint, double epsilon,
         bool greedy, std::uint64_t seed) {
        CollectConfig cc;
        cc.episodes_per_checkpoint = per_checkpoint;
        cc.epsilon = greedy ? 0.0 : epsilon;
        cc.mode = greedy ? RolloutMode::greedy : RolloutMode::epsilon_greedy;
        cc.seed = seed;
        return collect(*env, checkpoints, cc);
      },
      py::arg("env"), py::arg("checkpoints"), py::arg("per_checkpoint") = 20, py::arg("epsilon") = 0.1,
      py::arg("greedy") = false, py::arg("seed") = 0);

  m.def("load_dataset", [](const std::filesystem::path& p) { return load_dataset(p); }, py::arg("path"));
  m.def("load_qtable", [](const std::filesystem::path& p) { return load_qtable(p); }, py::arg("path"));

  m.def(
      "importance_json",
      [](const EnvPtr& env, const QTable& q, const Trajectory& t, const std::string& metric, double temperature,
         bool experimental, const std::string& kl_reference) {
        AnalysisContext ctx = context(env, q, temperature, experimental, kl_reference);
        return breakdown_to_json(trajectory_importance(ctx, t, parse_radical_kind(metric))).dump();
      },
      py::arg("env"), py::arg("q"), py::arg("trajectory"), py::arg("metric"), py::arg("temperature") = 1.0,
      py::arg("experimental") = false, py::arg("kl_reference") = "");

  m.def(
      "rank_json",
      [](const EnvPtr& env, const QTable& q, const Dataset& d, const std::string& metric, int k,
         const std::string& rule, double temperature, bool experimental, const std::string& kl_reference) {
        check_compatible(d, q);
        AnalysisContext ctx = context(env, q, temperature, experimental, kl_reference);
        RankingReport r = rank(ctx, d, parse_radical_kind(metric), k, parse_outcome_rule(rule));
        return ranking_to_json(r, d).dump();
      },
      py::arg("env"), py::arg("q"), py::arg("dataset"), py::arg("metric") = "vgoal", py::arg("k") = 5,
      py::arg("rule") = "reward-then-length", py::arg("temperature") = 1.0, py::arg("experimental") = false,
      py::arg("kl_reference") = "");

  m.def(
      "counterfactuals_json",
      [](const EnvPtr& env, const QTable& q, const Trajectory& t, std::optional<std::size_t> budget,
         std::uint64_t seed) { return cfset_to_json(generate_counterfactuals(*env, q, t, budget, seed)).dump(); },
      py::arg("env"), py::arg("q"), py::arg("trajectory"), py::arg("budget") = py::none(), py::arg("seed") = 0);

  m.def(
      "rollout_json",
      [](const EnvPtr& env, const QTable& q, const Trajectory& t, int step, ActionId action) {
        return rollout_to_json(counterfactual_rollout(*env, q, t, step, action)).dump();
      },
      py::arg("env"), py::arg("q"), py::arg("trajectory"), py::arg("step"), py::arg("action"));

  m.def("entropy_confidence", [](const std::vector<double>& p) { return entropy_confidence(p); });
  m.def("kl_divergence",
        [](const std::vector<double>& p, const std::vector<double>& q) { return kl_divergence(p, q); });
  m.def("order_by_score", [](const std::vector<double>& s) { return order_by_score(s); });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
