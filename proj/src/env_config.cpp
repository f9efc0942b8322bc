#include "trajx/env_config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "trajx/error.hpp"

namespace trajx {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_cell(Cell c) { return std::to_string(c.x) + "," + std::to_string(c.y); }

struct Entry {
  std::string value;
  int line;
};

[[noreturn]] void bad(const std::string& key, const Entry& e, const std::string& why) {
  throw ConfigError("config line " + std::to_string(e.line) + ": key '" + key + "': " + why);
}

int parse_int(const std::string& key, const Entry& e) {
  std::string_view s = trim(e.value);
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad(key, e, "expected an integer, got '" + e.value + "'");
  return v;
}

double parse_double(const std::string& key, const Entry& e) {
  std::string_view s = trim(e.value);
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad(key, e, "expected a number, got '" + e.value + "'");
  return v;
}

Cell parse_cell_text(const std::string& key, const Entry& e, std::string_view text) {
  auto comma = text.find(',');
  if (comma == std::string_view::npos) bad(key, e, "expected x,y");
  Entry xs{std::string(trim(text.substr(0, comma))), e.line};
  Entry ys{std::string(trim(text.substr(comma + 1))), e.line};
  return {parse_int(key, xs), parse_int(key, ys)};
}

std::vector<Cell> parse_cells(const std::string& key, const Entry& e) {
  std::vector<Cell> out;
  std::string_view rest = e.value;
  while (!trim(rest).empty()) {
    auto semi = rest.find(';');
    std::string_view item = trim(rest.substr(0, semi));
    if (!item.empty()) out.push_back(parse_cell_text(key, e, item));
    if (semi == std::string_view::npos) break;
    rest.remove_prefix(semi + 1);
  }
  return out;
}

}  // namespace

EnvConfig parse_env_config(std::string_view text) {
  std::map<std::string, Entry> kv;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (kv.contains(key)) throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    kv[key] = Entry{std::string(trim(line.substr(eq + 1))), line_no};
  }

  auto env_it = kv.find("env");
  if (env_it == kv.end()) throw ConfigError("config: missing required key 'env'");
  const std::string kind = env_it->second.value;

  EnvConfig cfg;
  cfg.name = kv.contains("name") ? kv["name"].value : kind;
  if (cfg.name.empty()) throw ConfigError("config: empty name");

  auto take = [&](auto& known, auto&& apply) {
    for (auto& [key, entry] : kv) {
      if (key == "env" || key == "name") continue;
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw ConfigError("config line " + std::to_string(entry.line) + ": unknown key '" + key + "' for env " + kind);
      }
      apply(key, entry);
    }
  };

  if (kind == "grid") {
    GridConfig g;
    g.walls.clear();
    static const std::vector<std::string> known = {"width", "height", "start", "goal", "walls", "max_steps"};
    take(known, [&](const std::string& key, const Entry& e) {
      if (key == "width") g.width = parse_int(key, e);
      else if (key == "height") g.height = parse_int(key, e);
      else if (key == "start") g.start = parse_cell_text(key, e, e.value);
      else if (key == "goal") g.goal = parse_cell_text(key, e, e.value);
      else if (key == "walls") g.walls = parse_cells(key, e);
      else if (key == "max_steps") g.max_steps = parse_int(key, e);
    });
    cfg.params = g;
  } else if (kind == "lander") {
    LanderConfig l;
    static const std::vector<std::string> known = {"gravity",      "thrust",         "safe_speed",     "dt",
                                                   "max_altitude", "max_speed",      "start_altitude", "start_velocity",
                                                   "bins_h",       "bins_v",         "max_steps"};
    take(known, [&](const std::string& key, const Entry& e) {
      if (key == "gravity") l.gravity = parse_double(key, e);
      else if (key == "thrust") l.thrust = parse_double(key, e);
      else if (key == "safe_speed") l.safe_speed = parse_double(key, e);
      else if (key == "dt") l.dt = parse_double(key, e);
      else if (key == "max_altitude") l.max_altitude = parse_double(key, e);
      else if (key == "max_speed") l.max_speed = parse_double(key, e);
      else if (key == "start_altitude") l.start_altitude = parse_double(key, e);
      else if (key == "start_velocity") l.start_velocity = parse_double(key, e);
      else if (key == "bins_h") l.bins_h = parse_int(key, e);
      else if (key == "bins_v") l.bins_v = parse_int(key, e);
      else if (key == "max_steps") l.max_steps = parse_int(key, e);
    });
    cfg.params = l;
  } else {
    throw ConfigError("config line " + std::to_string(env_it->second.line) + ": unknown env '" + kind +
                      "' (expected grid or lander)");
  }
  return cfg;
}

EnvConfig load_env_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_env_config(ss.str());
}

std::string EnvConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["name"] = name;
  if (const auto* g = std::get_if<GridConfig>(&params)) {
    kv["env"] = "grid";
    kv["width"] = std::to_string(g->width);
    kv["height"] = std::to_string(g->height);
    kv["start"] = fmt_cell(g->start);
    kv["goal"] = fmt_cell(g->goal);
    kv["max_steps"] = std::to_string(g->max_steps);
    auto walls = g->walls;
    std::sort(walls.begin(), walls.end(), [](Cell a, Cell b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
    walls.erase(std::unique(walls.begin(), walls.end()), walls.end());
    std::string w;
    for (std::size_t i = 0; i < walls.size(); ++i) w += (i ? ";" : "") + fmt_cell(walls[i]);
    kv["walls"] = w;
  } else {
    const auto& l = std::get<LanderConfig>(params);
    kv["env"] = "lander";
    kv["gravity"] = fmt_double(l.gravity);
    kv["thrust"] = fmt_double(l.thrust);
    kv["safe_speed"] = fmt_double(l.safe_speed);
    kv["dt"] = fmt_double(l.dt);
    kv["max_altitude"] = fmt_double(l.max_altitude);
    kv["max_speed"] = fmt_double(l.max_speed);
    kv["start_altitude"] = fmt_double(l.start_altitude);
    kv["start_velocity"] = fmt_double(l.start_velocity);
    kv["bins_h"] = std::to_string(l.bins_h);
    kv["bins_v"] = std::to_string(l.bins_v);
    kv["max_steps"] = std::to_string(l.max_steps);
  }
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string EnvConfig::hash() const { return hex64(fnv1a64(canonical())); }

std::vector<std::string> env_preset_names() { return {"grid1x2", "grid3", "grid5", "lander"}; }

EnvConfig env_preset(std::string_view name) {
  EnvConfig cfg;
  cfg.name = std::string(name);
  if (name == "grid1x2") {
    cfg.params = GridConfig{2, 1, {0, 0}, {1, 0}, {}, 10};
  } else if (name == "grid3") {
    cfg.params = GridConfig{3, 3, {0, 0}, {2, 2}, {}, 30};
  } else if (name == "grid5") {
    // Wall column at x = 2 forces a detour through the bottom row.
    cfg.params = GridConfig{5, 5, {0, 0}, {4, 0}, {{2, 0}, {2, 1}, {2, 2}, {2, 3}}, 60};
  } else if (name == "lander") {
    cfg.params = LanderConfig{};
  } else {
    std::string known;
    for (const auto& n : env_preset_names()) known += " " + n;
    throw ConfigError("unknown environment preset '" + std::string(name) + "' (known:" + known + ")");
  }
  return cfg;
}

std::shared_ptr<const Environment> make_environment(const EnvConfig& cfg) {
  std::shared_ptr<Environment> env;
  if (const auto* g = std::get_if<GridConfig>(&cfg.params)) {
    env = std::make_shared<GridWorld>(g->width, g->height, g->start, g->goal, g->walls, g->max_steps, cfg.name);
  } else {
    env = std::make_shared<MiniLander>(std::get<LanderConfig>(cfg.params), cfg.name);
  }
  env->set_config_hash(cfg.hash());
  return env;
}

}  // namespace trajx
