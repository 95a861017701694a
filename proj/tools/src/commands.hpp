#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace funnel::tools {

enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,
  kExitMaxIterations = 2,
  kExitVerifyFailed = 3,
};

struct SolveOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<int> samples;
  /// Overrides both the Lipschitz sampling seed and the verification seed.
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
};

struct VerifyCommandOptions {
  std::string dir;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> disturbance;  ///< random | worst-case
};

/// Each command reports problems on stderr and returns an ExitCode; none
/// of them throws.
int cmd_solve(const SolveOptions& options);
int cmd_verify(const VerifyCommandOptions& options);
int cmd_export_figures(const std::string& dir);

}  // namespace funnel::tools
