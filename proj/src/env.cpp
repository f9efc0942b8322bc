#include "trajx/env.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "trajx/error.hpp"

namespace trajx {

const char* to_string(TerminalKind kind) {
  switch (kind) {
    case TerminalKind::none: return "none";
    case TerminalKind::success: return "success";
    case TerminalKind::failure: return "failure";
    case TerminalKind::cap: return "cap";
  }
  return "none";
}

// --- Discretizer ---

Discretizer::Discretizer(std::vector<std::vector<double>> edges) : edges_(std::move(edges)) {
  if (edges_.empty()) throw ConfigError("discretizer needs at least one dimension");
  for (std::size_t d = 0; d < edges_.size(); ++d) {
    const auto& e = edges_[d];
    if (e.size() < 2) {
      throw ConfigError("discretizer dimension " + std::to_string(d) + " needs at least two edges");
    }
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (!std::isfinite(e[i])) throw ConfigError("discretizer edges must be finite");
      if (i > 0 && !(e[i] > e[i - 1])) {
        throw ConfigError("discretizer edges must be strictly increasing in dimension " +
                          std::to_string(d));
      }
    }
    cell_count_ *= bins(d);
  }
}

std::vector<double> Discretizer::linspace_edges(double lo, double hi, int bins) {
  if (bins < 1 || !(hi > lo)) throw ConfigError("linspace_edges needs bins >= 1 and hi > lo");
  std::vector<double> e(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) e[static_cast<std::size_t>(i)] = lo + ((hi - lo) * i) / bins;
  e.back() = hi;
  return e;
}

int Discretizer::bin(std::size_t dim, double x) const {
  const auto& e = edges_[dim];
  // upper_bound puts a value equal to an edge into the bin that starts there.
  auto it = std::upper_bound(e.begin(), e.end(), x);
  int b = static_cast<int>(it - e.begin()) - 1;
  return std::clamp(b, 0, bins(dim) - 1);
}

int Discretizer::cell(std::span<const double> obs) const {
  if (obs.size() != edges_.size()) {
    throw DataError("observation has " + std::to_string(obs.size()) + " dimensions, discretizer expects " +
                    std::to_string(edges_.size()));
  }
  int id = 0;
  for (std::size_t d = 0; d < edges_.size(); ++d) id = id * bins(d) + bin(d, obs[d]);
  return id;
}

std::vector<int> Discretizer::unravel(int cell) const {
  if (cell < 0 || cell >= cell_count_) throw DataError("cell id out of range: " + std::to_string(cell));
  std::vector<int> idx(edges_.size());
  for (std::size_t d = edges_.size(); d-- > 0;) {
    idx[d] = cell % bins(d);
    cell /= bins(d);
  }
  return idx;
}

std::vector<double> Discretizer::representative(int cell) const {
  auto idx = unravel(cell);
  std::vector<double> out(idx.size());
  for (std::size_t d = 0; d < idx.size(); ++d) {
    const auto& e = edges_[d];
    auto b = static_cast<std::size_t>(idx[d]);
    out[d] = 0.5 * (e[b] + e[b + 1]);
  }
  return out;
}

// --- Environment / Episode ---

std::vector<bool> Environment::terminal_mask() const {
  std::vector<bool> mask(static_cast<std::size_t>(state_count()));
  for (StateId s = 0; s < state_count(); ++s) mask[static_cast<std::size_t>(s)] = is_terminal(s);
  return mask;
}

Episode::Episode(const Environment& env) : Episode(env, env.initial_state()) {}

Episode::Episode(const Environment& env, StateId start) : env_(&env), state_(start) {
  if (!env.valid_state(start)) throw DataError("episode start state out of range");
}

Transition Episode::step(ActionId a) {
  if (done_) throw EpisodeFinished("episode already finished after " + std::to_string(steps_) + " steps");
  if (!env_->valid_action(a)) {
    throw InvalidAction("action " + std::to_string(a) + " outside [0, " +
                        std::to_string(env_->action_count()) + ")");
  }
  ModelStep m = env_->model(state_, a);
  ++steps_;
  Transition t{state_, a, m.reward, m.next_state, false};
  if (m.terminal) {
    t.done = true;
    outcome_ = m.kind;
  } else if (steps_ >= env_->spec().max_steps) {
    t.done = true;
    outcome_ = TerminalKind::cap;
  }
  done_ = t.done;
  state_ = m.next_state;
  return t;
}

// --- GridWorld ---

GridWorld::GridWorld(int width, int height, Cell start, Cell goal, std::vector<Cell> walls, int max_steps,
                     std::string name)
    : width_(width), height_(height), start_(start), goal_(goal) {
  if (width < 1 || height < 1) throw ConfigError("grid dimensions must be positive");
  if (width * height < 2) throw ConfigError("grid needs at least two cells");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (!in_bounds(start)) throw ConfigError("grid start out of bounds");
  if (!in_bounds(goal)) throw ConfigError("grid goal out of bounds");
  if (start == goal) throw ConfigError("grid start equals goal");
  walls_.assign(static_cast<std::size_t>(width * height), false);
  for (Cell w : walls) {
    if (!in_bounds(w)) throw ConfigError("wall out of bounds");
    walls_[static_cast<std::size_t>(state_of(w))] = true;
  }
  if (is_wall(start)) throw ConfigError("grid start is a wall");
  if (is_wall(goal)) throw ConfigError("grid goal is a wall");

  // Flood fill from start.
  std::vector<bool> seen(walls_.size(), false);
  std::queue<Cell> frontier;
  frontier.push(start);
  seen[static_cast<std::size_t>(state_of(start))] = true;
  while (!frontier.empty()) {
    Cell c = frontier.front();
    frontier.pop();
    for (ActionId a = 0; a < 4; ++a) {
      Cell n = move(c, a);
      auto idx = static_cast<std::size_t>(state_of(n));
      if (!seen[idx]) {
        seen[idx] = true;
        frontier.push(n);
      }
    }
  }
  if (!seen[static_cast<std::size_t>(state_of(goal))]) throw ConfigError("grid goal unreachable from start");

  spec_ = EnvSpec{std::move(name), width * height, 4, max_steps, -1.0, 0.0};
}

bool GridWorld::is_wall(Cell c) const {
  return in_bounds(c) && walls_[static_cast<std::size_t>(state_of(c))];
}

Cell GridWorld::move(Cell from, ActionId a) const {
  Cell to = from;
  switch (a) {
    case up: --to.y; break;
    case down: ++to.y; break;
    case left: --to.x; break;
    case right: ++to.x; break;
    default: throw InvalidAction("grid action " + std::to_string(a));
  }
  if (!in_bounds(to) || is_wall(to)) return from;
  return to;
}

ModelStep GridWorld::model(StateId s, ActionId a) const {
  if (!valid_state(s)) throw DataError("grid state out of range: " + std::to_string(s));
  if (!valid_action(a)) throw InvalidAction("grid action " + std::to_string(a));
  if (is_terminal(s)) return {0.0, s, true, TerminalKind::success};
  StateId next = state_of(move(cell_of(s), a));
  bool at_goal = is_terminal(next);
  return {-1.0, next, at_goal, at_goal ? TerminalKind::success : TerminalKind::none};
}

std::string GridWorld::action_name(ActionId a) const {
  static const char* names[] = {"up", "down", "left", "right"};
  if (!valid_action(a)) throw InvalidAction("grid action " + std::to_string(a));
  return names[a];
}

nlohmann::json GridWorld::layout() const {
  nlohmann::json walls = nlohmann::json::array();
  for (StateId s = 0; s < state_count(); ++s) {
    if (walls_[static_cast<std::size_t>(s)]) {
      Cell c = cell_of(s);
      walls.push_back({c.x, c.y});
    }
  }
  nlohmann::json actions = nlohmann::json::array();
  for (ActionId a = 0; a < action_count(); ++a) actions.push_back(action_name(a));
  return {{"kind", "grid"},           {"width", width_},  {"height", height_},
          {"start", {start_.x, start_.y}}, {"goal", {goal_.x, goal_.y}}, {"walls", walls},
          {"actions", actions},       {"state_id", "y * width + x"}};
}

// --- MiniLander ---

namespace {

LanderConfig checked(const LanderConfig& c) {
  if (!(c.gravity > 0.0)) throw ConfigError("lander gravity must be positive");
  if (!(c.thrust > c.gravity)) throw ConfigError("lander thrust must exceed gravity");
  if (!(c.safe_speed > 0.0)) throw ConfigError("lander safe_speed must be positive");
  if (!(c.dt > 0.0)) throw ConfigError("lander dt must be positive");
  if (!(c.max_altitude > 0.0)) throw ConfigError("lander max_altitude must be positive");
  if (!(c.max_speed > 0.0)) throw ConfigError("lander max_speed must be positive");
  if (c.bins_h < 4 || c.bins_v < 4) throw ConfigError("lander needs at least 4 bins per dimension");
  if (c.max_steps < 1) throw ConfigError("max_steps must be >= 1");
  return c;
}

}  // namespace

MiniLander::MiniLander(const LanderConfig& cfg, std::string name)
    : cfg_(checked(cfg)),
      disc_({Discretizer::linspace_edges(0.0, cfg.max_altitude, cfg.bins_h),
             Discretizer::linspace_edges(-cfg.max_speed, cfg.max_speed, cfg.bins_v)}) {
  spec_ = EnvSpec{std::move(name), disc_.cell_count(), 2, cfg_.max_steps, kCrashPenalty, kLandBonus};
}

StateId MiniLander::initial_state() const {
  const double obs[] = {cfg_.start_altitude, cfg_.start_velocity};
  return disc_.cell(obs);
}

bool MiniLander::is_terminal(StateId s) const {
  return valid_state(s) && s / cfg_.bins_v == 0;
}

std::array<double, 2> MiniLander::observation(StateId s) const {
  auto r = disc_.representative(s);
  return {r[0], r[1]};
}

ModelStep MiniLander::touchdown(StateId cell, double velocity) const {
  bool soft = std::abs(velocity) <= cfg_.safe_speed;
  return {soft ? kLandBonus : kCrashPenalty, cell, true, soft ? TerminalKind::success : TerminalKind::failure};
}

ModelStep MiniLander::model(StateId s, ActionId a) const {
  if (!valid_state(s)) throw DataError("lander state out of range: " + std::to_string(s));
  if (!valid_action(a)) throw InvalidAction("lander action " + std::to_string(a));
  auto [h, v] = observation(s);
  if (is_terminal(s)) return touchdown(s, v);
  double accel = (a == fire ? cfg_.thrust : 0.0) - cfg_.gravity;
  double v2 = v + accel * cfg_.dt;
  double h2 = h + v2 * cfg_.dt;
  const double obs[] = {h2, v2};
  StateId next = disc_.cell(obs);
  if (is_terminal(next)) return touchdown(next, v2);
  return {kStepCost, next, false, TerminalKind::none};
}

std::string MiniLander::action_name(ActionId a) const {
  static const char* names[] = {"noop", "thrust"};
  if (!valid_action(a)) throw InvalidAction("lander action " + std::to_string(a));
  return names[a];
}

nlohmann::json MiniLander::layout() const {
  return {{"kind", "lander"},
          {"altitude_edges", disc_.edges(0)},
          {"velocity_edges", disc_.edges(1)},
          {"safe_speed", cfg_.safe_speed},
          {"ground_band", {disc_.edges(0)[0], disc_.edges(0)[1]}},
          {"actions", {action_name(0), action_name(1)}},
          {"state_id", "altitude_bin * bins_v + velocity_bin"}};
}

}  // namespace trajx
