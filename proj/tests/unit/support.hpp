#pragma once

#include <deque>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "trajx/agent.hpp"
#include "trajx/env_config.hpp"
#include "trajx/trajectory.hpp"

namespace testing_support {

// Breadth-first distances to the goal, built from the config alone (not the
// environment model). -1 for walls and unreachable cells.
inline std::vector<int> bfs_to_goal(const trajx::GridConfig& g) {
  auto idx = [&](int x, int y) { return y * g.width + x; };
  std::vector<bool> wall(static_cast<std::size_t>(g.width * g.height), false);
  for (auto c : g.walls) wall[static_cast<std::size_t>(idx(c.x, c.y))] = true;
  std::vector<int> dist(wall.size(), -1);
  std::deque<std::pair<int, int>> q;
  dist[static_cast<std::size_t>(idx(g.goal.x, g.goal.y))] = 0;
  q.push_back({g.goal.x, g.goal.y});
  const int dx[] = {0, 0, -1, 1};
  const int dy[] = {-1, 1, 0, 0};
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop_front();
    for (int k = 0; k < 4; ++k) {
      int nx = x + dx[k], ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= g.width || ny >= g.height) continue;
      auto n = static_cast<std::size_t>(idx(nx, ny));
      if (wall[n] || dist[n] >= 0) continue;
      dist[n] = dist[static_cast<std::size_t>(idx(x, y))] + 1;
      q.push_back({nx, ny});
    }
  }
  return dist;
}

inline trajx::QTable table(const std::vector<std::vector<double>>& rows, double gamma = 0.9) {
  trajx::QTable q(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()), gamma);
  for (std::size_t s = 0; s < rows.size(); ++s) {
    for (std::size_t a = 0; a < rows[s].size(); ++a) q(static_cast<int>(s), static_cast<int>(a)) = rows[s][a];
  }
  return q;
}

inline trajx::Trajectory trajectory(std::string id, std::vector<trajx::Transition> steps) {
  trajx::Trajectory t;
  t.id = std::move(id);
  t.transitions = std::move(steps);
  t.refresh_totals();
  if (!t.transitions.empty() && t.transitions.back().done) t.outcome = trajx::TerminalKind::success;
  return t;
}

// Converged analysis table for an environment.
inline trajx::QTable oracle(const trajx::Environment& env, double gamma = 0.95) {
  trajx::QTable q = trajx::value_iteration_oracle(env, gamma, 1e-12).q;
  q.config_hash = env.config_hash();
  q.env_name = env.spec().name;
  return q;
}

// Greedy episode from the start state.
inline trajx::Trajectory greedy_episode(const trajx::Environment& env, const trajx::QTable& q, std::string id = "g") {
  trajx::Trajectory t = trajx::rollout_episode(env, q, trajx::RolloutMode::greedy, 0.0, 0);
  t.id = std::move(id);
  return t;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("trajx-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
