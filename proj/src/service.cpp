#include "trajx/service.hpp"

#include <charconv>
#include <sstream>

#include "httplib.h"
#include "trajx/error.hpp"

namespace trajx {

Bundle Bundle::make(EnvConfig config, QTable q, Dataset dataset) {
  Bundle b;
  b.env = make_environment(config);
  const std::string h = config.hash();
  if (q.config_hash != h) throw HashMismatch("Q-table config hash " + q.config_hash + " != environment " + h);
  if (dataset.config_hash != h) {
    throw HashMismatch("dataset config hash " + dataset.config_hash + " != environment " + h);
  }
  if (q.state_count() != b.env->state_count() || q.action_count() != b.env->action_count()) {
    throw DataError("Q-table shape does not match the environment");
  }
  std::ostringstream bytes;
  bytes << config.canonical() << '\n' << qtable_to_json(q).dump() << '\n';
  write_dataset(dataset, bytes);
  b.hash = hex64(fnv1a64(bytes.str()));
  b.config = std::move(config);
  b.q = std::move(q);
  b.dataset = std::move(dataset);
  return b;
}

Bundle Bundle::load(const std::filesystem::path& dir) {
  return make(load_env_config(dir / "env.cfg"), load_qtable(dir / "qtable.json"),
              load_dataset(dir / "dataset.traj.jsonl"));
}

namespace {

std::optional<long long> to_int(const std::string& s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string query_or(const Request& req, const std::string& key, const std::string& fallback) {
  auto it = req.query.find(key);
  return it == req.query.end() ? fallback : it->second;
}

}  // namespace

struct Service::Server {
  httplib::Server http;
};

std::size_t Service::CfKeyHash::operator()(const CfKey& k) const {
  std::size_t h = std::hash<std::string>{}(std::get<0>(k));
  h ^= std::hash<int>{}(std::get<1>(k)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= std::hash<int>{}(std::get<2>(k)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

Service::Service(Bundle bundle, std::size_t cache_capacity)
    : bundle_(std::move(bundle)),
      ctx_(bundle_.q, bundle_.temperature, bundle_.env->terminal_mask()),
      metrics_(standard_radical_kinds()),
      capacity_(cache_capacity),
      server_(std::make_shared<Server>()) {
  const auto& trajs = bundle_.dataset.trajectories;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    if (!index_.emplace(trajs[i].id, i).second) throw DataError("duplicate trajectory id " + trajs[i].id);
  }
  scores_.resize(metrics_.size());
  for (std::size_t m = 0; m < metrics_.size(); ++m) {
    for (const auto& t : trajs) scores_[m].push_back(trajectory_importance(ctx_, t, metrics_[m]).i_tau);
  }
}

Response Service::error(int status, const std::string& message) const {
  return {status, {{"error", message}, {"status", status}}, bundle_.hash};
}

std::size_t Service::cache_size() const {
  std::lock_guard lock(cache_mutex_);
  return lru_.size();
}

Response Service::handle(const Request& req) const {
  std::string expected;
  if (auto it = req.headers.find("X-Expected-Bundle"); it != req.headers.end()) expected = it->second;
  if (auto it = req.query.find("bundle"); it != req.query.end()) expected = it->second;
  if (!expected.empty() && expected != bundle_.hash) {
    return error(409, "bundle hash mismatch: loaded " + bundle_.hash + ", expected " + expected);
  }

  const std::string& p = req.path;
  const std::string prefix = "/api/trajectories/";
  try {
    if (req.method == "GET" && p == "/api/bundle") {
      nlohmann::json metrics = nlohmann::json::array();
      for (auto m : metrics_) metrics.push_back(to_string(m));
      return {200,
              {{"hash", bundle_.hash},
               {"env", bundle_.config.name},
               {"config_hash", bundle_.config.hash()},
               {"trajectories", bundle_.dataset.trajectories.size()},
               {"actions", bundle_.env->action_count()},
               {"metrics", metrics}},
              bundle_.hash};
    }
    if (req.method == "GET" && p == "/api/layout") return {200, bundle_.env->layout(), bundle_.hash};
    if (req.method == "GET" && p == "/api/trajectories") return trajectories(req);
    if (req.method == "GET" && p.rfind(prefix, 0) == 0) return trajectory(p.substr(prefix.size()));
    if (req.method == "GET" && p == "/api/ranking") return ranking(req);
    if (req.method == "POST" && p == "/api/counterfactual") return counterfactual(req);
    return error(404, "no route " + req.method + " " + p);
  } catch (const ConfigError& e) {
    return error(422, e.what());
  } catch (const Error& e) {
    return error(500, e.what());
  }
}

Response Service::trajectories(const Request& req) const {
  auto offset = to_int(query_or(req, "offset", "0"));
  auto limit = to_int(query_or(req, "limit", "50"));
  if (!offset || *offset < 0) return error(422, "offset must be a non-negative integer");
  if (!limit || *limit < 1) return error(422, "limit must be a positive integer");
  const auto& trajs = bundle_.dataset.trajectories;
  nlohmann::json items = nlohmann::json::array();
  for (auto i = static_cast<std::size_t>(*offset); i < trajs.size() && items.size() < static_cast<std::size_t>(*limit);
       ++i) {
    nlohmann::json scores = nlohmann::json::object();
    for (std::size_t m = 0; m < metrics_.size(); ++m) scores[to_string(metrics_[m])] = scores_[m][i];
    items.push_back({{"index", i},
                     {"id", trajs[i].id},
                     {"length", trajs[i].length},
                     {"total_reward", trajs[i].total_reward},
                     {"outcome", to_string(trajs[i].outcome)},
                     {"checkpoint_fraction", trajs[i].checkpoint_fraction},
                     {"scores", scores}});
  }
  return {200, {{"total", trajs.size()}, {"offset", *offset}, {"limit", *limit}, {"items", items}}, bundle_.hash};
}

Response Service::trajectory(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return error(404, "unknown trajectory '" + id + "'");
  const Trajectory& t = bundle_.dataset.trajectories[it->second];
  nlohmann::json breakdowns = nlohmann::json::object();
  for (auto m : metrics_) breakdowns[to_string(m)] = breakdown_to_json(trajectory_importance(ctx_, t, m));
  nlohmann::json body = trajectory_to_json(t);
  body["index"] = it->second;
  body["breakdowns"] = breakdowns;
  return {200, body, bundle_.hash};
}

Response Service::ranking(const Request& req) const {
  RadicalKind kind = parse_radical_kind(query_or(req, "metric", "vgoal"));
  if (kind == RadicalKind::kl) return error(422, "the KL metric is experimental and not served");
  auto k = to_int(query_or(req, "k", "5"));
  if (!k || *k < 1) return error(422, "k must be a positive integer");
  RankingReport r = rank(ctx_, bundle_.dataset, kind, static_cast<int>(*k), bundle_.rule);
  return {200, ranking_to_json(r, bundle_.dataset), bundle_.hash};
}

Response Service::counterfactual(const Request& req) const {
  nlohmann::json in = nlohmann::json::parse(req.body, nullptr, false);
  if (in.is_discarded() || !in.is_object()) return error(422, "body must be a JSON object");
  if (!in.contains("trajectory_id") || !in["trajectory_id"].is_string()) {
    return error(422, "trajectory_id must be a string");
  }
  if (!in.contains("step") || !in["step"].is_number_integer()) return error(422, "step must be an integer");
  if (!in.contains("action") || !in["action"].is_number_integer()) return error(422, "action must be an integer");
  const std::string id = in["trajectory_id"].get<std::string>();
  const long long step = in["step"].get<long long>();
  const long long action = in["action"].get<long long>();

  auto it = index_.find(id);
  if (it == index_.end()) return error(404, "unknown trajectory '" + id + "'");
  const Trajectory& t = bundle_.dataset.trajectories[it->second];
  if (step < 0 || step >= static_cast<long long>(t.transitions.size())) {
    return error(422, "step " + std::to_string(step) + " outside [0, " + std::to_string(t.transitions.size()) + ")");
  }
  if (action < 0 || action >= bundle_.env->action_count()) {
    return error(422, "action " + std::to_string(action) + " is invalid");
  }
  if (action == t.transitions[static_cast<std::size_t>(step)].action) return error(422, "action equals original");

  CfKey key{id, static_cast<int>(step), static_cast<int>(action)};
  {
    std::lock_guard lock(cache_mutex_);
    if (auto c = cache_.find(key); c != cache_.end()) {
      lru_.splice(lru_.begin(), lru_, c->second);
      return {200, c->second->second, bundle_.hash};
    }
  }

  CounterfactualRollout r;
  try {
    r = counterfactual_rollout(*bundle_.env, bundle_.q, t, static_cast<int>(step), static_cast<ActionId>(action));
  } catch (const ReplayDivergence& e) {
    return error(409, e.what());
  }
  nlohmann::json body = rollout_to_json(r);
  body["original_id"] = id;
  body["length_delta"] = r.length() - t.length;
  body["reward_delta"] = r.total_reward() - t.total_reward;

  std::lock_guard lock(cache_mutex_);
  if (cache_.find(key) == cache_.end() && capacity_ > 0) {
    lru_.emplace_front(key, body);
    cache_[key] = lru_.begin();
    if (lru_.size() > capacity_) {
      cache_.erase(lru_.back().first);
      lru_.pop_back();
    }
  }
  return {200, body, bundle_.hash};
}

int Service::bind(const std::string& host, int port) {
  auto bridge = [this](const httplib::Request& hreq, httplib::Response& hres) {
    Request req;
    req.method = hreq.method;
    req.path = hreq.path;
    req.body = hreq.body;
    for (const auto& [k, v] : hreq.params) req.query[k] = v;
    if (hreq.has_header("X-Expected-Bundle")) req.headers["X-Expected-Bundle"] = hreq.get_header_value("X-Expected-Bundle");
    Response res = handle(req);
    hres.status = res.status;
    hres.set_header("X-Bundle-Hash", res.bundle_hash);
    hres.set_content(res.body.dump(), "application/json");
  };
  server_->http.Get(R"(/api/.*)", bridge);
  server_->http.Post(R"(/api/.*)", bridge);
  int bound = port == 0 ? server_->http.bind_to_any_port(host) : (server_->http.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void Service::listen() {
  if (!server_->http.listen_after_bind()) throw Error("HTTP listener stopped with an error");
}

void Service::stop() { server_->http.stop(); }

}  // namespace trajx
