#pragma once

// JSON configuration files. Every field is optional except the curve, which
// must come from the file or from the command line. Unknown keys are
// rejected with their full path, and nothing is applied unless the whole
// document parses and validates.

#include <string>

#include "rigidform/mission.hpp"

namespace rigidform {

struct ConfigFile {
  MissionConfig mission;
  bool has_curve = false;

  bool operator==(const ConfigFile&) const = default;
};

// Throws ConfigError for malformed JSON, unknown keys, wrong types or
// invalid values.
ConfigFile parse_config(const std::string& text);
ConfigFile load_config(const std::string& path);

// Every effective field, reparsing to an identical configuration.
std::string dump_config(const ConfigFile& config);

std::string to_string(BlendStrategy b);

}  // namespace rigidform
