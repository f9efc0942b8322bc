#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "trajx/importance.hpp"

namespace trajx::cli {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kConfigError = 2,
  kDataError = 3,
  kPropertyViolation = 4,
};

// Output file names under --out. Derived files embed metric, k, seed and the
// environment config hash so runs with different settings never collide.
inline constexpr const char* kEnvFile = "env.cfg";
inline constexpr const char* kQTableFile = "qtable.json";
inline constexpr const char* kCheckpointsFile = "checkpoints.json";
inline constexpr const char* kDatasetFile = "dataset.traj.jsonl";
inline constexpr const char* kLogFile = "run.log";

std::string ranking_stem(RadicalKind metric, int k, std::uint64_t seed, const std::string& config_hash);
std::string cfset_stem(RadicalKind metric, int k, std::uint64_t seed, const std::string& config_hash);
std::string table_stem(int k, std::uint64_t seed, const std::string& config_hash);

// `args` excludes the program name. Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace trajx::cli
