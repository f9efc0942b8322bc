#pragma once

#include <cstdint>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "trajx/agent.hpp"
#include "trajx/counterfactual.hpp"
#include "trajx/env_config.hpp"
#include "trajx/importance.hpp"
#include "trajx/ranking.hpp"
#include "trajx/trajectory.hpp"

namespace trajx {

// Everything the service reads. Immutable once built.
struct Bundle {
  EnvConfig config;
  std::shared_ptr<const Environment> env;
  QTable q;
  Dataset dataset;
  // FNV-1a 64 over the canonical config, Q-table JSON and dataset JSONL.
  std::string hash;
  double temperature = 1.0;
  OutcomeRule rule = OutcomeRule::reward_then_length;

  // Checks dataset and Q-table against the config hash (HashMismatch).
  static Bundle make(EnvConfig config, QTable q, Dataset dataset);
  // Reads env.cfg, qtable.json and dataset.traj.jsonl from a pipeline output dir.
  static Bundle load(const std::filesystem::path& dir);
};

struct Request {
  std::string method = "GET";
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;
  std::string body;
};

struct Response {
  int status = 200;
  nlohmann::json body;
  std::string bundle_hash;  // sent as X-Bundle-Hash
};

// Routes (all JSON):
//   GET  /api/bundle                        hash, env, counts, metrics
//   GET  /api/layout                        environment layout for rendering
//   GET  /api/trajectories?offset=&limit=   page of {id,length,total_reward,outcome,scores}
//   GET  /api/trajectories/<id>             transitions + one breakdown per metric
//   GET  /api/ranking?metric=&k=            ranking report
//   POST /api/counterfactual                {"trajectory_id","step","action"} -> rollout
// A request whose X-Expected-Bundle header (or `bundle` query) names another
// bundle gets 409. Unknown ids are 404, invalid step/action 422.
class Service {
 public:
  explicit Service(Bundle bundle, std::size_t cache_capacity = 128);
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Thread-safe; the LRU counterfactual cache is the only shared mutable state.
  Response handle(const Request& req) const;

  // Binds the HTTP listener; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks serving HTTP until stop() is called from another thread.
  void listen();
  void serve(const std::string& host, int port) {
    bind(host, port);
    listen();
  }
  void stop();

  const Bundle& bundle() const { return bundle_; }
  std::size_t cache_size() const;

 private:
  using CfKey = std::tuple<std::string, int, int>;
  struct CfKeyHash {
    std::size_t operator()(const CfKey& k) const;
  };

  Response trajectories(const Request& req) const;
  Response trajectory(const std::string& id) const;
  Response ranking(const Request& req) const;
  Response counterfactual(const Request& req) const;
  Response error(int status, const std::string& message) const;

  Bundle bundle_;
  AnalysisContext ctx_;
  std::vector<RadicalKind> metrics_;
  // scores_[metric index][trajectory index]
  std::vector<std::vector<double>> scores_;
  std::unordered_map<std::string, std::size_t> index_;

  std::size_t capacity_;
  mutable std::mutex cache_mutex_;
  mutable std::list<std::pair<CfKey, nlohmann::json>> lru_;
  mutable std::unordered_map<CfKey, std::list<std::pair<CfKey, nlohmann::json>>::iterator, CfKeyHash> cache_;

  struct Server;
  std::shared_ptr<Server> server_;
};

}  // namespace trajx
