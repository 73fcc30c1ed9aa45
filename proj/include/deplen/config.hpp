#pragma once

#include "deplen/harness.hpp"
#include "deplen/probe.hpp"
#include "deplen/trainer.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace deplen {

/// Everything a run needs; every field defaults to the standard protocol.
struct RunConfig {
  SweepGrid grid;
  ProbeConfig probe;  // probe.train holds the training configuration
};

/// Parses a JSON document of the form
///   {"grid": {...}, "probe": {...}, "train": {..., "adam": {...}}}
/// Every section and field is optional. Unknown keys are rejected.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& config);

std::string to_json(const SessionOutcome& outcome);
std::string to_json(const ProbeResult& result, const Architecture& arch);

}  // namespace deplen
