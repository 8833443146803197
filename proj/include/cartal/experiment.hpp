#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cartal/acquisition.hpp"
#include "cartal/cartography.hpp"
#include "cartal/classifier.hpp"
#include "cartal/config.hpp"
#include "cartal/metrics.hpp"
#include "cartal/pool.hpp"

namespace cartal {

/// Materialized inputs shared read-only by every run of a suite.
struct PreparedData {
  std::vector<Dataset> sources;  // as generated or loaded, before hold-out
  std::shared_ptr<const Dataset> pool;
  Dataset validation;
  std::vector<Dataset> test_sets;  // Dataset::name is the test-set name
  int num_classes = 0;
  std::size_t feature_dim = 0;

  LabelledData validation_data() const { return LabelledData::from(validation); }
};

Dataset materialize_source(const SourceSpec& spec);
PreparedData prepare_data(const ExperimentConfig& config);
/// The same data with the pool restricted to `keep` (ids preserved).
PreparedData restrict_pool(const PreparedData& data, const IdSet& keep);

/// Classifier config with data-dependent dimensions filled in.
ClassifierConfig resolved_classifier(const ExperimentConfig& config, const PreparedData& data);

/// Full-pool cartography model: datamap for diagnostics and the reference
/// model for output uncertainty.
struct Reference {
  std::vector<DatamapEntry> datamap;
  std::optional<Classifier> model;
};

Reference build_reference(const ExperimentConfig& config, const PreparedData& data);

/// Cartography over each test set, trained on that test set.
std::vector<std::vector<DatamapEntry>> build_test_datamaps(const ExperimentConfig& config,
                                                           const PreparedData& data);

struct RoundLog {
  std::string strategy;
  std::uint64_t seed = 0;
  std::size_t round = 0;
  std::size_t labelled_size = 0;  // size of the training set for this round's model
  double val_accuracy = 0.0;
  IdSet acquired;
  std::map<std::string, std::size_t> source_counts;
  RoundMetrics metrics;
  std::optional<DifficultyCounts> difficulty_counts;
};

/// Acquired-set profile after all rounds.
struct FinalProfile {
  double input_diversity = 0.0;
  std::optional<double> output_uncertainty;
  std::vector<double> class_distribution;
};

struct RunResult {
  std::string strategy;
  std::uint64_t seed = 0;
  IdSet initial_labelled;
  std::vector<RoundLog> rounds;
  PoolState final_state;
  std::optional<Classifier> final_model;
  std::map<std::string, double> test_accuracy;
  std::map<std::string, StratifiedResult> stratified;
  FinalProfile profile;
  std::size_t fits = 0;
};

/// Optional per-run inputs computed once per suite.
struct RunContext {
  const Reference* reference = nullptr;
  const std::vector<std::vector<DatamapEntry>>* test_datamaps = nullptr;
};

RunResult run_al(const ExperimentConfig& config, const PreparedData& data, StrategyKind strategy,
                 std::uint64_t seed, const RunContext& context = {});

/// Rebuilds the final pool state from the seed split and the logged batches.
PoolState replay(const RunResult& run, std::shared_ptr<const Dataset> pool);

struct RunOutcome {
  std::string strategy;
  std::uint64_t seed = 0;
  std::optional<RunResult> result;
  std::string error;

  bool ok() const noexcept { return result.has_value(); }
};

struct RunSummary {
  std::string strategy;
  std::string test_set;
  double mean = 0.0;
  double std = 0.0;  // population std over successful seeds
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::size_t final_labelled_size = 0;

  bool complete() const noexcept { return failed == 0 && completed > 0; }
};

struct SuiteResult {
  std::vector<RunOutcome> runs;  // strategy-major, seed-minor
  std::vector<RunSummary> summaries;

  std::size_t failures() const;
};

using RunFunction = std::function<RunResult(StrategyKind, std::uint64_t)>;

/// Population mean and std.
std::pair<double, double> mean_std(const std::vector<double>& values);

std::vector<RunSummary> summarize(const std::vector<RunOutcome>& runs,
                                  const std::vector<std::string>& test_sets);

/// Runs strategies x seeds, up to `parallel` at a time. Failed runs are
/// recorded and do not stop the suite. `runner` replaces run_al (tests).
SuiteResult run_suite(const ExperimentConfig& config, const PreparedData& data,
                      const RunContext& context = {}, const RunFunction& runner = {});

struct AblationResult {
  IdSet retained;
  SuiteResult ablated;
  std::optional<SuiteResult> original;
};

/// Filters the bottom `config.ablation` fraction per source by
/// confidence x variability, then runs the suite on the filtered pool.
AblationResult run_ablated_suite(const ExperimentConfig& config, const PreparedData& data,
                                 const Reference& reference, bool with_original,
                                 const RunContext& context = {});

struct SplitRun {
  std::string combo;
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  std::map<std::string, double> test_accuracy;
  std::string error;
};

struct SplitResult {
  std::vector<SplitRun> runs;
  std::vector<RunSummary> summaries;  // RunSummary::strategy holds the combo
};

SplitResult run_difficulty_split(const ExperimentConfig& config, const PreparedData& data,
                                 const Reference& reference);

// Artifact writers. All tables carry a header row; floats use six significant digits.
void write_rounds_csv(const SuiteResult& suite, const PreparedData& data,
                      const std::filesystem::path& path);
void write_acquisitions_csv(const SuiteResult& suite, const PreparedData& data,
                            const std::filesystem::path& path);
void write_runs_csv(const SuiteResult& suite, const PreparedData& data,
                    const std::filesystem::path& path);
void write_summary_csv(const std::vector<RunSummary>& summaries,
                       const std::filesystem::path& path);
void write_profile_csv(const SuiteResult& suite, const PreparedData& data,
                       const std::filesystem::path& path);
void write_stratified_csv(const SuiteResult& suite, const PreparedData& data,
                          const std::filesystem::path& path);
void write_splits_csv(const SplitResult& result, const PreparedData& data,
                      const std::filesystem::path& path);

}  // namespace cartal
