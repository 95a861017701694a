#pragma once

#include <cstdint>
#include <string>

#include "funnel/common.hpp"
#include "funnel/pipeline.hpp"
#include "funnel/verify.hpp"

namespace funnel::tools {

/// Malformed or invalid configuration. The message starts with the file and
/// line for syntax problems, or with `section.key` for field problems.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct VerifySettings {
  int samples = 100;
  std::uint64_t seed = 0;
  DisturbanceMode disturbance = DisturbanceMode::kRandomSphere;
};

struct ConfigFile {
  RunConfig run;
  VerifySettings verify;
};

/// Parses INI text. `source` only labels diagnostics. Runs
/// RunConfig::validate against the configured model.
ConfigFile parse_config(const std::string& text, const std::string& source = "<config>");
ConfigFile load_config(const std::string& path);

std::string read_text_file(const std::string& path);

}  // namespace funnel::tools
