#include "cartal/pool.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "cartal/csv.hpp"
#include "cartal/error.hpp"
#include "cartal/random.hpp"

namespace cartal {

namespace {

using nlohmann::json;

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

std::string quantized_token(std::size_t dim, double value) {
  double q = std::round(value * 10.0) / 10.0;
  if (q == 0.0) q = 0.0;  // drop the sign of negative zero
  char buf[48];
  std::snprintf(buf, sizeof buf, "f%zu=%.1f", dim, q);
  return buf;
}

Example parse_json_record(const std::string& line, std::size_t lineno) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(lineno, "record is not an object");
  for (const char* key : {"id", "source", "features", "label"})
    if (!j.contains(key)) throw ParseError(lineno, std::string("missing field '") + key + "'");
  Example ex;
  try {
    const auto id = j.at("id").get<long long>();
    if (id < 0) throw ParseError(lineno, "negative id");
    ex.id = static_cast<ExampleId>(id);
    ex.source = j.at("source").get<std::string>();
    ex.features = j.at("features").get<std::vector<double>>();
    if (j.contains("tokens")) ex.tokens = j.at("tokens").get<std::vector<std::string>>();
    ex.label = j.at("label").get<int>();
  } catch (const json::exception& e) {
    throw ParseError(lineno, std::string("bad field type: ") + e.what());
  }
  return ex;
}

double parse_double(const std::string& s, std::size_t lineno) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(lineno, "not a number: '" + s + "'");
  }
}

long long parse_int(const std::string& s, std::size_t lineno) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(lineno, "not an integer: '" + s + "'");
  }
}

}  // namespace

std::optional<std::size_t> Dataset::index_of(ExampleId id) const {
  auto it = std::lower_bound(examples.begin(), examples.end(), id,
                             [](const Example& e, ExampleId v) { return e.id < v; });
  if (it == examples.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - examples.begin());
}

const Example& Dataset::at(ExampleId id) const {
  auto idx = index_of(id);
  if (!idx) throw ArgumentError("unknown example id " + std::to_string(id) + " in " + name);
  return examples[*idx];
}

std::vector<ExampleId> Dataset::ids() const {
  std::vector<ExampleId> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.id);
  return out;
}

IdSet Dataset::flipped_ids() const {
  IdSet out;
  for (const auto& [id, _] : flipped) out.insert(id);
  return out;
}

std::map<ExampleId, std::string> Dataset::source_map() const {
  std::map<ExampleId, std::string> out;
  for (const auto& e : examples) out.emplace(e.id, e.source);
  return out;
}

std::vector<std::string> Dataset::source_names() const {
  std::vector<std::string> out;
  for (const auto& e : examples)
    if (std::find(out.begin(), out.end(), e.source) == out.end()) out.push_back(e.source);
  return out;
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    if (e.features.size() != feature_dim)
      throw SchemaError("example " + std::to_string(e.id) + " has feature dimension " +
                        std::to_string(e.features.size()) + ", expected " +
                        std::to_string(feature_dim));
    if (e.label < 0 || e.label >= num_classes)
      throw SchemaError("example " + std::to_string(e.id) + " has label " +
                        std::to_string(e.label) + " outside [0, " + std::to_string(num_classes) +
                        ")");
    if (i > 0 && examples[i - 1].id >= e.id) {
      if (examples[i - 1].id == e.id)
        throw SchemaError("duplicate id " + std::to_string(e.id));
      throw SchemaError("ids not strictly increasing at id " + std::to_string(e.id));
    }
  }
}

Dataset subset(const Dataset& ds, const IdSet& keep) {
  Dataset out;
  out.name = ds.name;
  out.num_classes = ds.num_classes;
  out.feature_dim = ds.feature_dim;
  for (const auto& e : ds.examples)
    if (keep.contains(e.id)) out.examples.push_back(e);
  for (const auto& [id, label] : ds.flipped)
    if (keep.contains(id)) out.flipped.emplace(id, label);
  for (const auto& [id, prov] : ds.provenance)
    if (keep.contains(id)) out.provenance.emplace(id, prov);
  return out;
}

Dataset concatenate(std::string name, std::span<const Dataset> parts) {
  Dataset out;
  out.name = std::move(name);
  ExampleId next = 0;
  for (const auto& part : parts) {
    if (!part.empty()) {
      if (out.feature_dim == 0 && out.examples.empty()) out.feature_dim = part.feature_dim;
      if (part.feature_dim != out.feature_dim)
        throw SchemaError("feature_dim mismatch concatenating " + part.name);
    }
    out.num_classes = std::max(out.num_classes, part.num_classes);
    for (const auto& e : part.examples) {
      Example copy = e;
      copy.id = next++;
      if (auto it = part.flipped.find(e.id); it != part.flipped.end())
        out.flipped.emplace(copy.id, it->second);
      out.provenance.emplace(copy.id, Provenance{e.source, e.id});
      out.examples.push_back(std::move(copy));
    }
  }
  return out;
}

DatasetFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return DatasetFormat::Csv;
  if (ext == ".jsonl" || ext == ".json") return DatasetFormat::Jsonl;
  throw ArgumentError("cannot infer dataset format from '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, int num_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());

  Dataset ds;
  ds.name = path.stem().string();
  std::string line;
  std::size_t lineno = 0;
  bool dim_known = false;

  std::vector<std::size_t> tok_cols, feat_cols;
  std::size_t id_col = 0, source_col = 0, label_col = 0;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Example ex;
    if (format == DatasetFormat::Jsonl) {
      ex = parse_json_record(line, lineno);
    } else {
      auto fields = csv::split_line(line);
      if (!have_header) {
        bool seen_id = false, seen_source = false, seen_label = false;
        for (std::size_t i = 0; i < fields.size(); ++i) {
          const auto& h = fields[i];
          if (h == "id") id_col = i, seen_id = true;
          else if (h == "source") source_col = i, seen_source = true;
          else if (h == "label") label_col = i, seen_label = true;
          else if (h.rfind("tok", 0) == 0) tok_cols.push_back(i);
          else if (h.rfind('f', 0) == 0) feat_cols.push_back(i);
          else throw ParseError(lineno, "unknown CSV column '" + h + "'");
        }
        if (!seen_id || !seen_source || !seen_label)
          throw ParseError(lineno, "CSV header needs id, source and label columns");
        have_header = true;
        continue;
      }
      std::size_t width = 3 + tok_cols.size() + feat_cols.size();
      if (fields.size() != width)
        throw ParseError(lineno, "expected " + std::to_string(width) + " fields, got " +
                                     std::to_string(fields.size()));
      long long id = parse_int(fields[id_col], lineno);
      if (id < 0) throw ParseError(lineno, "negative id");
      ex.id = static_cast<ExampleId>(id);
      ex.source = fields[source_col];
      ex.label = static_cast<int>(parse_int(fields[label_col], lineno));
      for (auto c : tok_cols)
        if (!fields[c].empty()) ex.tokens.push_back(fields[c]);
      for (auto c : feat_cols) ex.features.push_back(parse_double(fields[c], lineno));
    }
    if (!dim_known) {
      ds.feature_dim = ex.features.size();
      dim_known = true;
    } else if (ex.features.size() != ds.feature_dim) {
      throw SchemaError("example " + std::to_string(ex.id) + " has feature dimension " +
                        std::to_string(ex.features.size()) + ", expected " +
                        std::to_string(ds.feature_dim));
    }
    if (ex.label < 0) throw SchemaError("example " + std::to_string(ex.id) + " has negative label");
    ds.examples.push_back(std::move(ex));
  }

  int max_label = -1;
  for (const auto& e : ds.examples) max_label = std::max(max_label, e.label);
  ds.num_classes = num_classes > 0 ? num_classes : max_label + 1;

  // Ids must be unique; report duplicates before ordering problems.
  std::map<ExampleId, std::size_t> seen;
  for (const auto& e : ds.examples)
    if (!seen.emplace(e.id, 0).second) throw SchemaError("duplicate id " + std::to_string(e.id));
  ds.validate();
  return ds;
}

void write_jsonl(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : ds.examples) {
    json j = {{"id", e.id}, {"source", e.source}, {"features", e.features}, {"label", e.label}};
    if (!e.tokens.empty()) j["tokens"] = e.tokens;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void SyntheticSourceSpec::validate() const {
  if (class_centroids.size() < 2)
    throw ConfigError("source '" + name + "': class_centroids needs at least 2 classes");
  const auto d = class_centroids.front().size();
  if (d == 0) throw ConfigError("source '" + name + "': class_centroids has zero dimension");
  for (const auto& c : class_centroids)
    if (c.size() != d) throw ConfigError("source '" + name + "': class_centroids ragged");
  if (noise_scale.size() != 1 && noise_scale.size() != class_centroids.size())
    throw ConfigError("source '" + name + "': noise_scale needs 1 or C entries");
  for (double s : noise_scale)
    if (!(s > 0.0)) throw ConfigError("source '" + name + "': noise_scale must be > 0");
  if (!(label_flip_rate >= 0.0 && label_flip_rate <= 1.0))
    throw ConfigError("source '" + name + "': label_flip_rate must lie in [0, 1]");
  if (!(centroid_overlap >= 0.0 && centroid_overlap <= 1.0))
    throw ConfigError("source '" + name + "': centroid_overlap must lie in [0, 1]");
}

Dataset generate_synthetic_source(const SyntheticSourceSpec& spec, std::uint64_t rng_seed) {
  spec.validate();
  const int num_classes = static_cast<int>(spec.class_centroids.size());
  const std::size_t dim = spec.class_centroids.front().size();

  Rng rng = make_rng(rng_seed);
  Dataset ds;
  ds.name = spec.name;
  ds.num_classes = num_classes;
  ds.feature_dim = dim;

  // Balanced classes, randomly ordered.
  std::vector<int> classes(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) classes[i] = static_cast<int>(i % num_classes);
  std::shuffle(classes.begin(), classes.end(), rng);

  std::normal_distribution<double> gauss(0.0, 1.0);
  const double shrink = 1.0 - spec.centroid_overlap;
  ds.examples.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int c = classes[i];
    const double sigma = spec.noise_scale.size() == 1 ? spec.noise_scale[0] : spec.noise_scale[c];
    Example ex;
    ex.id = i;
    ex.source = spec.name;
    ex.label = c;
    ex.features.resize(dim);
    for (std::size_t k = 0; k < dim; ++k)
      ex.features[k] = shrink * spec.class_centroids[c][k] + sigma * gauss(rng);
    ex.tokens.reserve(dim);
    for (std::size_t k = 0; k < dim; ++k) ex.tokens.push_back(quantized_token(k, ex.features[k]));
    ds.examples.push_back(std::move(ex));
  }

  const auto n_flip = static_cast<std::size_t>(std::llround(spec.label_flip_rate * spec.n));
  auto order = shuffled_indices(spec.n, rng);
  std::uniform_int_distribution<int> other(1, num_classes - 1);
  for (std::size_t j = 0; j < n_flip; ++j) {
    auto& ex = ds.examples[order[j]];
    const int original = ex.label;
    ex.label = (original + other(rng)) % num_classes;
    ds.flipped.emplace(ex.id, original);
  }
  return ds;
}

Dataset build_multi_source_pool(std::span<const Dataset> sources, std::size_t per_source_cap,
                                std::uint64_t rng_seed) {
  if (sources.empty()) throw ArgumentError("build_multi_source_pool needs at least one source");
  const auto& first = sources.front();
  std::size_t minority = first.size();
  for (const auto& s : sources) {
    if (s.feature_dim != first.feature_dim || s.num_classes != first.num_classes)
      throw SchemaError("source '" + s.name + "' does not match feature_dim/num_classes of '" +
                        first.name + "'");
    minority = std::min(minority, s.size());
  }
  const std::size_t take = std::min(minority, per_source_cap);

  std::vector<Dataset> parts;
  parts.reserve(sources.size());
  for (std::size_t s = 0; s < sources.size(); ++s) {
    Rng rng = make_rng(derive_seed(rng_seed, s));
    auto idx = shuffled_indices(sources[s].size(), rng);
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    IdSet keep;
    for (auto i : idx) keep.insert(sources[s].examples[i].id);
    parts.push_back(subset(sources[s], keep));
  }
  Dataset pool = concatenate("pool", parts);
  pool.num_classes = first.num_classes;
  pool.feature_dim = first.feature_dim;
  return pool;
}

std::pair<Dataset, Dataset> hold_out(const Dataset& ds, double fraction, std::uint64_t rng_seed) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw ArgumentError("hold-out fraction must lie in [0, 1)");
  Rng rng = make_rng(rng_seed);
  auto idx = shuffled_indices(ds.size(), rng);
  const auto n_held = static_cast<std::size_t>(std::llround(fraction * ds.size()));
  IdSet held, rest;
  for (std::size_t j = 0; j < idx.size(); ++j)
    (j < n_held ? held : rest).insert(ds.examples[idx[j]].id);
  return {subset(ds, held), subset(ds, rest)};
}

PoolState::PoolState(std::shared_ptr<const Dataset> universe, IdSet labelled, IdSet unlabelled)
    : universe_(std::move(universe)), labelled_(std::move(labelled)),
      unlabelled_(std::move(unlabelled)) {
  for (auto id : labelled_)
    if (unlabelled_.contains(id))
      throw StateError("id " + std::to_string(id) + " is both labelled and unlabelled");
}

std::map<std::string, std::size_t> PoolState::unlabelled_composition() const {
  std::map<std::string, std::size_t> out;
  for (auto id : unlabelled_) ++out[universe_->at(id).source];
  return out;
}

PoolState seed_split(std::shared_ptr<const Dataset> pool, std::size_t seed_size,
                     std::uint64_t rng_seed) {
  if (!pool) throw ArgumentError("seed_split: null pool");
  if (seed_size > pool->size())
    throw ArgumentError("seed_size " + std::to_string(seed_size) + " exceeds pool size " +
                        std::to_string(pool->size()));
  Rng rng = make_rng(rng_seed);
  auto idx = shuffled_indices(pool->size(), rng);
  IdSet labelled, unlabelled;
  for (std::size_t j = 0; j < idx.size(); ++j)
    (j < seed_size ? labelled : unlabelled).insert(pool->examples[idx[j]].id);
  return PoolState(std::move(pool), std::move(labelled), std::move(unlabelled));
}

PoolState transfer(const PoolState& state, const IdSet& batch) {
  std::vector<ExampleId> offending;
  for (auto id : batch)
    if (!state.unlabelled().contains(id)) offending.push_back(id);
  if (!offending.empty()) {
    std::string list;
    for (auto id : offending) {
      if (!list.empty()) list += ", ";
      list += std::to_string(id);
      list += state.labelled().contains(id) ? " (already labelled)" : " (unknown)";
    }
    throw StateError("cannot transfer ids: " + list);
  }
  IdSet labelled = state.labelled();
  IdSet unlabelled = state.unlabelled();
  for (auto id : batch) {
    labelled.insert(id);
    unlabelled.erase(id);
  }
  return PoolState(state.universe_ptr(), std::move(labelled), std::move(unlabelled));
}

}  // namespace cartal
