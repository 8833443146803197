#include "cartal/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "cartal/error.hpp"

namespace cartal {

double input_diversity(const TokenSet& acquired, const TokenSet& remainder) {
  std::size_t common = 0;
  for (const auto& t : acquired) common += remainder.contains(t);
  const std::size_t all = acquired.size() + remainder.size() - common;
  if (all == 0) return 0.0;
  return static_cast<double>(common) / static_cast<double>(all);
}

TokenSet token_set(const Dataset& ds, const IdSet& ids) {
  TokenSet out;
  std::size_t missing = 0;
  for (auto id : ids) {
    const auto& ex = ds.at(id);
    if (ex.tokens.empty()) ++missing;
    out.insert(ex.tokens.begin(), ex.tokens.end());
  }
  if (missing > 0) spdlog::warn("{} example(s) without tokens ignored for input diversity", missing);
  return out;
}

double mean_predictive_entropy(const ProbMatrix& probs) {
  if (probs.rows() == 0) throw ArgumentError("mean entropy over an empty set");
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    for (Eigen::Index c = 0; c < probs.cols(); ++c)
      if (probs(i, c) > 0.0) total -= probs(i, c) * std::log(probs(i, c));
  return total / static_cast<double>(probs.rows());
}

double output_uncertainty(const Classifier& reference_model, const Eigen::MatrixXd& acquired) {
  if (acquired.rows() == 0) throw ArgumentError("output uncertainty of an empty acquired set");
  return mean_predictive_entropy(reference_model.predict_proba(acquired));
}

std::vector<double> class_distribution(std::span<const int> labels, int num_classes) {
  if (labels.empty()) throw ArgumentError("class distribution of an empty set");
  std::vector<double> out(static_cast<std::size_t>(num_classes), 0.0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw ArgumentError("label out of range");
    out[static_cast<std::size_t>(y)] += 1.0;
  }
  for (auto& v : out) v /= static_cast<double>(labels.size());
  return out;
}

std::map<std::string, double> acquisition_factor(
    const std::map<std::string, std::size_t>& batch_counts,
    const std::map<std::string, std::size_t>& pool_composition) {
  std::size_t batch = 0, pool = 0;
  for (const auto& [_, c] : batch_counts) batch += c;
  for (const auto& [_, c] : pool_composition) pool += c;
  if (batch == 0) throw ArgumentError("acquisition factor of an empty batch");
  for (const auto& [s, c] : batch_counts)
    if (c > 0 && pool_composition.find(s) == pool_composition.end())
      throw ArgumentError("batch source '" + s + "' is absent from the pool");
  std::map<std::string, double> out;
  for (const auto& [s, in_pool] : pool_composition) {
    if (in_pool == 0) continue;
    auto it = batch_counts.find(s);
    const double got = it == batch_counts.end() ? 0.0 : static_cast<double>(it->second);
    const double share = static_cast<double>(in_pool) / static_cast<double>(pool);
    out[s] = got / (static_cast<double>(batch) * share);
  }
  return out;
}

std::map<std::string, double> acquisition_factor(const IdSet& batch, const PoolState& before) {
  std::map<std::string, std::size_t> counts;
  for (auto id : batch) {
    if (!before.unlabelled().contains(id))
      throw ArgumentError("batch id " + std::to_string(id) + " was not unlabelled");
    ++counts[before.universe().at(id).source];
  }
  return acquisition_factor(counts, before.unlabelled_composition());
}

const StratumResult* StratifiedResult::find(Difficulty d) const {
  for (const auto& s : strata)
    if (s.difficulty == d) return &s;
  return nullptr;
}

StratifiedResult stratified_accuracy(const Classifier& model, const Dataset& test,
                                     std::span<const DatamapEntry> test_datamap) {
  const auto index = index_datamap(test_datamap);
  std::vector<Difficulty> klass;
  klass.reserve(test.size());
  for (const auto& e : test.examples) {
    auto it = index.find(e.id);
    if (it == index.end())
      throw ArgumentError("test id " + std::to_string(e.id) + " has no datamap entry");
    klass.push_back(it->second.difficulty);
  }
  const auto pred = model.predict(feature_matrix(test));
  DifficultyCounts count{}, correct{};
  std::size_t total_correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto k = static_cast<std::size_t>(klass[i]);
    const bool ok = pred[i] == test.examples[i].label;
    ++count[k];
    correct[k] += ok;
    total_correct += ok;
  }
  StratifiedResult out;
  out.total = test.size();
  out.overall = test.empty() ? 0.0
                             : static_cast<double>(total_correct) / static_cast<double>(test.size());
  for (auto d : kDifficulties) {
    const auto k = static_cast<std::size_t>(d);
    if (count[k] == 0) continue;
    out.strata.push_back(
        {d, count[k], static_cast<double>(correct[k]) / static_cast<double>(count[k])});
  }
  return out;
}

}  // namespace cartal
