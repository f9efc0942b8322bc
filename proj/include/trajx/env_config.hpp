#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "trajx/env.hpp"

namespace trajx {

struct GridConfig {
  int width = 5;
  int height = 5;
  Cell start{0, 0};
  Cell goal{4, 0};
  std::vector<Cell> walls;
  int max_steps = 60;
};

// Environment description read from a plain key/value file.
//
//   # comment
//   env = grid            (grid | lander)
//   name = grid5          (optional, defaults to env)
//   width = 5
//   walls = 2,0; 2,1      (x,y pairs separated by ';')
//
// Grid keys: width height start goal walls max_steps.
// Lander keys: gravity thrust safe_speed dt max_altitude max_speed
// start_altitude start_velocity bins_h bins_v max_steps.
struct EnvConfig {
  std::string name;
  std::variant<GridConfig, LanderConfig> params;

  // Sorted key=value lines with normalised numbers; the hash input.
  std::string canonical() const;
  // 16 hex digits of FNV-1a 64 over canonical().
  std::string hash() const;
};

EnvConfig parse_env_config(std::string_view text);
EnvConfig load_env_config(const std::filesystem::path& path);
EnvConfig env_preset(std::string_view name);
std::vector<std::string> env_preset_names();

std::shared_ptr<const Environment> make_environment(const EnvConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace trajx
