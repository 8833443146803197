#include "cartal/cartography.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "cartal/csv.hpp"
#include "cartal/error.hpp"
#include "cartal/random.hpp"

namespace cartal {

char difficulty_code(Difficulty d) {
  static constexpr char codes[] = {'E', 'M', 'H', 'I'};
  return codes[static_cast<int>(d)];
}

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
    case Difficulty::Impossible: return "impossible";
  }
  return "unknown";
}

Difficulty parse_difficulty(const std::string& s) {
  if (s == "easy" || s == "E") return Difficulty::Easy;
  if (s == "medium" || s == "M") return Difficulty::Medium;
  if (s == "hard" || s == "H") return Difficulty::Hard;
  if (s == "impossible" || s == "I") return Difficulty::Impossible;
  throw ArgumentError("unknown difficulty '" + s + "'");
}

void DifficultyThresholds::validate() const {
  if (!(0.0 < impossible_max && impossible_max < hard_max && hard_max < medium_max &&
        medium_max < 1.0))
    throw ConfigError("difficulty thresholds must satisfy 0 < impossible < hard < medium < 1");
}

Difficulty DifficultyThresholds::classify(double p) const {
  if (p <= impossible_max) return Difficulty::Impossible;
  if (p <= hard_max) return Difficulty::Hard;
  if (p <= medium_max) return Difficulty::Medium;
  return Difficulty::Easy;
}

std::vector<DatamapEntry> compute_datamap(std::span<const DynamicsTrace> traces,
                                          const DifficultyThresholds& thresholds) {
  thresholds.validate();
  std::vector<DatamapEntry> out;
  out.reserve(traces.size());
  for (const auto& t : traces) {
    if (t.confidences.empty())
      throw ArgumentError("empty dynamics trace for id " + std::to_string(t.example_id));
    if (t.correct_flags.size() != t.confidences.size())
      throw ArgumentError("trace for id " + std::to_string(t.example_id) +
                          " has mismatched confidence/correctness lengths");
    const double n = static_cast<double>(t.confidences.size());
    // Shift by the first value so constant traces give exactly zero spread.
    const double c0 = t.confidences.front();
    double shift = 0.0;
    for (double c : t.confidences) shift += c - c0;
    shift /= n;
    const double mean = c0 + shift;
    double ss = 0.0;
    for (double c : t.confidences) ss += ((c - c0) - shift) * ((c - c0) - shift);
    const double correct =
        static_cast<double>(std::count(t.correct_flags.begin(), t.correct_flags.end(), true)) / n;
    out.push_back({t.example_id, mean, std::sqrt(ss / n), correct, thresholds.classify(mean)});
  }
  return out;
}

CartographyResult run_cartography(const Dataset& train, const Dataset& probe,
                                  const ClassifierConfig& config, const TrainConfig& tcfg,
                                  const DifficultyThresholds& thresholds,
                                  const LabelledData& val) {
  std::vector<DynamicsTrace> traces(probe.size());
  for (std::size_t i = 0; i < probe.size(); ++i) traces[i].example_id = probe.examples[i].id;

  std::size_t snapshots = 0;
  const std::vector<int> labels = label_vector(probe);
  DynamicsProbe dyn{feature_matrix(probe), labels, [&](const DynamicsSnapshot& snap) {
                      ++snapshots;
                      for (std::size_t i = 0; i < traces.size(); ++i) {
                        traces[i].confidences.push_back(snap.gold_prob[i]);
                        traces[i].correct_flags.push_back(snap.predicted[i] == labels[i]);
                      }
                    }};
  Classifier model = fit(config, LabelledData::from(train), val, tcfg, &dyn);
  if (snapshots < 2)
    throw CapacityError("insufficient training dynamics: " + std::to_string(snapshots) +
                        " snapshot(s) collected, need at least 2");
  spdlog::debug("cartography: {} snapshots over {} probe examples", snapshots, probe.size());
  return {compute_datamap(traces, thresholds), std::move(model), snapshots};
}

IdSet ablate_hard_to_learn(std::span<const DatamapEntry> datamap,
                           const std::map<ExampleId, std::string>& sources, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw ArgumentError("ablation fraction must lie in [0, 1)");
  std::map<std::string, std::vector<const DatamapEntry*>> by_source;
  for (const auto& e : datamap) {
    auto it = sources.find(e.example_id);
    if (it == sources.end())
      throw ArgumentError("no source known for id " + std::to_string(e.example_id));
    by_source[it->second].push_back(&e);
  }
  IdSet retained;
  for (auto& [source, entries] : by_source) {
    std::sort(entries.begin(), entries.end(), [](const DatamapEntry* a, const DatamapEntry* b) {
      const double pa = a->mean_confidence * a->variability;
      const double pb = b->mean_confidence * b->variability;
      if (pa != pb) return pa < pb;
      return a->example_id < b->example_id;
    });
    const auto drop = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(entries.size())));
    for (std::size_t i = drop; i < entries.size(); ++i) retained.insert(entries[i]->example_id);
  }
  return retained;
}

std::vector<Difficulty> parse_combo(const std::string& combo) {
  if (combo.empty()) throw ArgumentError("difficulty combo is empty");
  std::vector<Difficulty> out;
  for (char c : combo) {
    const Difficulty d = parse_difficulty(std::string(1, c));
    if (std::find(out.begin(), out.end(), d) != out.end())
      throw ArgumentError("difficulty combo '" + combo + "' repeats a class");
    out.push_back(d);
  }
  return out;
}

std::string combo_name(std::span<const Difficulty> combo) {
  std::string s;
  for (auto d : combo) s.push_back(difficulty_code(d));
  return s;
}

IdSet build_difficulty_split(std::span<const DatamapEntry> datamap,
                             std::span<const Difficulty> combo, std::size_t n,
                             std::uint64_t rng_seed) {
  if (combo.empty()) throw ArgumentError("difficulty combo is empty");
  if (n % combo.size() != 0)
    throw ArgumentError("split size " + std::to_string(n) + " is not divisible by " +
                        std::to_string(combo.size()) + " classes");
  const std::size_t per_class = n / combo.size();
  IdSet out;
  for (std::size_t c = 0; c < combo.size(); ++c) {
    std::vector<ExampleId> members;
    for (const auto& e : datamap)
      if (e.difficulty == combo[c]) members.push_back(e.example_id);
    if (members.size() < per_class)
      throw CapacityError("difficulty class " + to_string(combo[c]) + " holds " +
                          std::to_string(members.size()) + " examples, need " +
                          std::to_string(per_class));
    std::sort(members.begin(), members.end());
    Rng rng = make_rng(derive_seed(rng_seed, static_cast<std::uint64_t>(combo[c])));
    std::shuffle(members.begin(), members.end(), rng);
    out.insert(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(per_class));
  }
  return out;
}

std::map<ExampleId, DatamapEntry> index_datamap(std::span<const DatamapEntry> datamap) {
  std::map<ExampleId, DatamapEntry> out;
  for (const auto& e : datamap) out.emplace(e.example_id, e);
  return out;
}

std::vector<DifficultyCounts> acquisition_by_difficulty(std::span<const IdSet> acquired_per_round,
                                                        std::span<const DatamapEntry> datamap) {
  const auto index = index_datamap(datamap);
  std::vector<DifficultyCounts> out;
  out.reserve(acquired_per_round.size());
  for (const auto& batch : acquired_per_round) {
    DifficultyCounts counts{};
    for (auto id : batch) {
      auto it = index.find(id);
      if (it == index.end())
        throw ArgumentError("acquired id " + std::to_string(id) + " is missing from the datamap");
      ++counts[static_cast<std::size_t>(it->second.difficulty)];
    }
    out.push_back(counts);
  }
  return out;
}

void write_datamap_csv(std::span<const DatamapEntry> datamap,
                       const std::map<ExampleId, std::string>& sources,
                       const std::filesystem::path& path) {
  csv::Table t;
  t.header = {"id", "source", "mean_confidence", "variability", "correctness", "difficulty"};
  for (const auto& e : datamap) {
    auto it = sources.find(e.example_id);
    t.rows.push_back({std::to_string(e.example_id), it == sources.end() ? "" : it->second,
                      csv::num(e.mean_confidence), csv::num(e.variability),
                      csv::num(e.correctness), to_string(e.difficulty)});
  }
  csv::write(t, path);
}

std::vector<DatamapEntry> read_datamap_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  const auto c_id = t.column("id"), c_mean = t.column("mean_confidence"),
             c_var = t.column("variability"), c_cor = t.column("correctness"),
             c_diff = t.column("difficulty");
  std::vector<DatamapEntry> out;
  for (const auto& r : t.rows)
    out.push_back({std::stoull(r.at(c_id)), std::stod(r.at(c_mean)), std::stod(r.at(c_var)),
                   std::stod(r.at(c_cor)), parse_difficulty(r.at(c_diff))});
  return out;
}

}  // namespace cartal
