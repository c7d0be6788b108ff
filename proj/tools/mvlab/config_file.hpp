#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mvlab/pipeline/config.hpp"

namespace mvlab::cli {

// Invalid configuration: exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Parses "KEY=VAL".
std::pair<std::string, std::string> parse_override(const std::string& text);

// INI file with top-level keys and [section] tables; the flat key is
// "section.key". Sections named "variant.ID" hold full-path overrides that
// turn the file into a suite with one config per variant, id = ID.
//
// Strict: unknown keys, malformed values, missing required keys and failed
// validation all throw ConfigError naming the field and, where known, its line.
// Overrides apply after the file (to every variant); seed_override after that.
std::vector<PipelineConfig> load_configs(const std::string& path, const Overrides& overrides,
                                         const std::string* seed_override);

}  // namespace mvlab::cli
