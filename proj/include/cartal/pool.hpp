#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace cartal {

using ExampleId = std::uint64_t;
using IdSet = std::set<ExampleId>;

struct Example {
  ExampleId id = 0;
  std::string source;
  std::vector<double> features;
  std::vector<std::string> tokens;
  int label = 0;

  bool operator==(const Example&) const = default;
};

/// Where a pooled example came from before ids were re-assigned.
struct Provenance {
  std::string source;
  ExampleId original_id = 0;

  bool operator==(const Provenance&) const = default;
};

struct Dataset {
  std::string name;
  std::vector<Example> examples;
  int num_classes = 0;
  std::size_t feature_dim = 0;

  // Planted label flips: id -> label of the generating centroid.
  std::map<ExampleId, int> flipped;
  // Populated by build_multi_source_pool.
  std::map<ExampleId, Provenance> provenance;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }

  /// Index of `id` in `examples`, or nullopt. Relies on ascending ids.
  std::optional<std::size_t> index_of(ExampleId id) const;
  const Example& at(ExampleId id) const;
  bool contains(ExampleId id) const { return index_of(id).has_value(); }

  std::vector<ExampleId> ids() const;
  IdSet flipped_ids() const;
  std::map<ExampleId, std::string> source_map() const;
  std::vector<std::string> source_names() const;  // order of first appearance

  /// Throws SchemaError when an invariant does not hold.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

/// Subset of `ds` restricted to `keep`, preserving order and metadata.
Dataset subset(const Dataset& ds, const IdSet& keep);
/// Concatenates datasets and re-assigns contiguous ids.
Dataset concatenate(std::string name, std::span<const Dataset> parts);

enum class DatasetFormat { Jsonl, Csv };

DatasetFormat format_from_path(const std::filesystem::path& path);

/// Loads and validates a dataset. `num_classes` of 0 infers C = max label + 1.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, int num_classes = 0);
void write_jsonl(const Dataset& ds, const std::filesystem::path& path);

struct SyntheticSourceSpec {
  std::string name;
  std::size_t n = 0;
  std::vector<std::vector<double>> class_centroids;
  // One entry per class, or a single entry shared by all classes.
  std::vector<double> noise_scale{1.0};
  double label_flip_rate = 0.0;
  // 0 keeps centroids as given; values towards 1 pull them to the origin.
  double centroid_overlap = 0.0;

  void validate() const;
};

Dataset generate_synthetic_source(const SyntheticSourceSpec& spec, std::uint64_t rng_seed);

/// Minority down-sampling: every source contributes
/// min(minority size, per_source_cap) examples.
Dataset build_multi_source_pool(std::span<const Dataset> sources, std::size_t per_source_cap,
                                std::uint64_t rng_seed);

/// Randomly holds out round(fraction * n) examples. Returns {held_out, rest}.
std::pair<Dataset, Dataset> hold_out(const Dataset& ds, double fraction, std::uint64_t rng_seed);

class PoolState {
 public:
  PoolState() = default;
  PoolState(std::shared_ptr<const Dataset> universe, IdSet labelled, IdSet unlabelled);

  const IdSet& labelled() const noexcept { return labelled_; }
  const IdSet& unlabelled() const noexcept { return unlabelled_; }
  const Dataset& universe() const { return *universe_; }
  std::shared_ptr<const Dataset> universe_ptr() const noexcept { return universe_; }

  /// Unlabelled count per source tag.
  std::map<std::string, std::size_t> unlabelled_composition() const;

 private:
  std::shared_ptr<const Dataset> universe_;
  IdSet labelled_;
  IdSet unlabelled_;
};

PoolState seed_split(std::shared_ptr<const Dataset> pool, std::size_t seed_size,
                     std::uint64_t rng_seed);

/// Moves `batch` from the unlabelled to the labelled partition.
PoolState transfer(const PoolState& state, const IdSet& batch);

}  // namespace cartal
