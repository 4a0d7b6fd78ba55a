#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "crowdnav/config.hpp"

namespace crowdnav::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kConfigError = 2;

/// Version string recorded in manifests.
const char* version();

/// JSON manifest describing a run: command, version, seed, what was run
/// (checkpoint or baseline), the full config snapshot and the out_dir layout.
std::string manifest_json(const std::string& command, const RunConfig& config,
                          std::uint64_t seed, const std::string& source,
                          const std::map<std::string, std::string>& layout);

/// crowdsim train|eval|replay|render ... ; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crowdnav::cli
