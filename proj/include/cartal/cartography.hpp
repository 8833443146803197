#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cartal/classifier.hpp"
#include "cartal/pool.hpp"

namespace cartal {

enum class Difficulty { Easy = 0, Medium = 1, Hard = 2, Impossible = 3 };

inline constexpr std::array<Difficulty, 4> kDifficulties{
    Difficulty::Easy, Difficulty::Medium, Difficulty::Hard, Difficulty::Impossible};

char difficulty_code(Difficulty d);
std::string to_string(Difficulty d);
Difficulty parse_difficulty(const std::string& s);

/// Per-difficulty counter indexed by Difficulty.
using DifficultyCounts = std::array<std::size_t, 4>;

struct DynamicsTrace {
  ExampleId example_id = 0;
  std::vector<double> confidences;  // gold-label probability per snapshot
  std::vector<bool> correct_flags;
};

struct DatamapEntry {
  ExampleId example_id = 0;
  double mean_confidence = 0.0;
  double variability = 0.0;  // population std of the confidences
  double correctness = 0.0;
  Difficulty difficulty = Difficulty::Easy;
};

struct DifficultyThresholds {
  double impossible_max = 0.25;
  double hard_max = 0.5;
  double medium_max = 0.75;

  void validate() const;
  /// Upper-inclusive bands over mean confidence.
  Difficulty classify(double mean_confidence) const;
};

std::vector<DatamapEntry> compute_datamap(std::span<const DynamicsTrace> traces,
                                          const DifficultyThresholds& thresholds = {});

struct CartographyResult {
  std::vector<DatamapEntry> datamap;  // one entry per probe example, probe order
  Classifier model;
  std::size_t snapshots = 0;
};

/// Trains a fresh model on `train` with training dynamics recorded over
/// `probe`, then builds the datamap. `val` drives early stopping when non-empty.
CartographyResult run_cartography(const Dataset& train, const Dataset& probe,
                                  const ClassifierConfig& config, const TrainConfig& tcfg,
                                  const DifficultyThresholds& thresholds = {},
                                  const LabelledData& val = {});

/// Drops, per source, the floor(fraction * n_source) entries with the smallest
/// mean_confidence * variability (ties by id). Returns the retained ids.
IdSet ablate_hard_to_learn(std::span<const DatamapEntry> datamap,
                           const std::map<ExampleId, std::string>& sources, double fraction);

/// Parses combos such as "EM" or "EMHI".
std::vector<Difficulty> parse_combo(const std::string& combo);
std::string combo_name(std::span<const Difficulty> combo);

/// n / |combo| ids drawn uniformly without replacement from each class.
IdSet build_difficulty_split(std::span<const DatamapEntry> datamap,
                             std::span<const Difficulty> combo, std::size_t n,
                             std::uint64_t rng_seed);

/// Difficulty histogram of each round's acquired batch.
std::vector<DifficultyCounts> acquisition_by_difficulty(std::span<const IdSet> acquired_per_round,
                                                        std::span<const DatamapEntry> datamap);

std::map<ExampleId, DatamapEntry> index_datamap(std::span<const DatamapEntry> datamap);

void write_datamap_csv(std::span<const DatamapEntry> datamap,
                       const std::map<ExampleId, std::string>& sources,
                       const std::filesystem::path& path);
std::vector<DatamapEntry> read_datamap_csv(const std::filesystem::path& path);

}  // namespace cartal
