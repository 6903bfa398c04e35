#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svytree/estimate.hpp"
#include "svytree/frame.hpp"
#include "svytree/mc.hpp"
#include "svytree/synth.hpp"
#include "svytree/tree.hpp"

namespace svytree {

/// One documented configuration key. `key` is the dotted path.
struct ConfigKey {
  std::string_view key;
  std::string_view type;
  std::string_view default_value;
  std::string_view description;
};

/// Every key the parser accepts, in documentation order.
std::span<const ConfigKey> config_keys();

/// Help text listing every key with its type, default and description.
std::string config_help();

struct PopulationConfig {
  enum class Source { Synthetic, Csv };
  Source source = Source::Synthetic;
  std::filesystem::path path;
  /// Explicit CSV schema; when empty the synthetic schema is used.
  std::vector<VariableSpec> schema;
  SynthConfig synth = SynthConfig::reference();
};

struct AppConfig {
  PopulationConfig population;
  DesignFamily design = DesignFamily::reference();
  /// Fixed stratum counts; overrides rate allocation when present.
  std::optional<std::map<std::string, std::size_t>> design_counts;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::string study;
  std::vector<std::string> predictors;
  GrowControls tree;
  StepwiseControls stepwise;
  EstimatorKind estimator = EstimatorKind::GregTree;
  std::filesystem::path tree_document;
  SimConfig simulate;
  bool long_mode = false;
  bool svg = false;

  /// Design for a single draw at `n` (fixed counts when given).
  DesignSpec single_design(const Frame& frame) const;
};

/// Parses YAML text, then applies `key=value` overrides (values are YAML
/// scalars or flow sequences/maps). Throws ConfigError on unknown keys,
/// wrong types or invalid values.
AppConfig parse_config(std::string_view yaml,
                       const std::vector<std::string>& overrides = {});
AppConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

/// Builds or reads the population frame.
Frame make_frame(const PopulationConfig& population);

/// Schema used for CSV frames when none is configured.
std::vector<VariableSpec> population_schema(const PopulationConfig& population);

}  // namespace svytree
