#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartal/acquisition.hpp"
#include "cartal/cartography.hpp"
#include "cartal/classifier.hpp"
#include "cartal/pool.hpp"

namespace cartal {

/// A data source: either a synthetic generator spec or a dataset file.
struct SourceSpec {
  std::optional<SyntheticSourceSpec> synthetic;
  std::filesystem::path file;
  std::uint64_t seed = 0;  // generator seed for synthetic sources

  std::string name() const;
};

struct TestSetSpec {
  std::string name;
  std::vector<SourceSpec> sources;
};

struct SplitConfig {
  std::vector<std::string> combos{"EM", "EMH", "MH", "HI", "EMHI"};
  std::size_t n = 4000;
};

struct ExperimentConfig {
  std::vector<SourceSpec> sources;
  std::size_t per_source_cap = std::numeric_limits<std::size_t>::max();
  double validation_fraction = 0.1;
  std::vector<TestSetSpec> test_sets;

  std::size_t seed_size = 500;
  std::size_t k = 500;
  std::size_t rounds = 7;
  std::vector<StrategyKind> strategies{StrategyKind::Random, StrategyKind::Mcme,
                                       StrategyKind::Bald, StrategyKind::Dal};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::uint64_t base_seed = 0;

  // input_dim and num_classes are filled in from the data.
  ClassifierConfig classifier;
  TrainConfig train;
  TrainConfig cartography_train;
  DifficultyThresholds thresholds;
  AcquisitionOptions acquisition;

  // Reference cartography over the pool (datamap + output-uncertainty model).
  bool cartography = true;
  bool stratify = false;
  std::optional<double> ablation;
  std::optional<SplitConfig> difficulty_split;
  std::size_t parallel = 1;

  void validate() const;
};

/// Parses a config document. Unknown keys raise ConfigError naming the key path.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

SyntheticSourceSpec parse_synthetic_spec(const nlohmann::json& j, const std::string& path);

}  // namespace cartal
