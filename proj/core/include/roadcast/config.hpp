#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "roadcast/sim.hpp"

namespace roadcast::cfg {

struct ConfigError : std::runtime_error {
  ConfigError(int line, std::string field, const std::string& what)
      : std::runtime_error(what), line(line), field(std::move(field)) {}
  int line;  // 0 when the problem is not tied to a line
  std::string field;
};

// Raw "section.key" -> (value, line) table. Unknown sections or keys are
// rejected with their line number; every key has a default except
// mobility.mode.
struct ParsedConfig {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, Entry> entries;

  const std::string& get(const std::string& key) const;
  int line_of(const std::string& key) const;
};

ParsedConfig parse_config(std::istream& in);
ParsedConfig parse_config_file(const std::string& path);

struct LoadedScenario {
  sim::Scenario scenario;
  std::string strategy_name;  // all | mpp | representative | none
};

// Resolves types, loads trace/map files, builds the topology, and
// validates. seed_override replaces scenario.seed for this build.
LoadedScenario build_scenario(const ParsedConfig& parsed,
                              std::optional<std::uint64_t> seed_override = {});

// Commented config with every key at its default.
std::string sample_config();

}  // namespace roadcast::cfg
