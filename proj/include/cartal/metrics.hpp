#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cartal/cartography.hpp"
#include "cartal/classifier.hpp"
#include "cartal/pool.hpp"

namespace cartal {

using TokenSet = std::set<std::string>;

struct RoundMetrics {
  std::size_t round = 0;
  double input_diversity = 0.0;
  std::optional<double> output_uncertainty;  // needs a reference model
  std::vector<double> class_distribution;
  std::map<std::string, double> acquisition_factor;
};

/// Jaccard similarity |V n V'| / |V u V'|; two empty sets give 0.
double input_diversity(const TokenSet& acquired, const TokenSet& remainder);

/// Union of the token sets of `ids`. Examples without tokens are skipped.
TokenSet token_set(const Dataset& ds, const IdSet& ids);

/// Mean row entropy (nats) of a probability matrix.
double mean_predictive_entropy(const ProbMatrix& probs);

/// Mean predictive entropy of a reference model over the acquired examples.
double output_uncertainty(const Classifier& reference_model, const Eigen::MatrixXd& acquired);

std::vector<double> class_distribution(std::span<const int> labels, int num_classes);

/// count_s(batch) / (|batch| * share_s(unlabelled pool before selection)).
std::map<std::string, double> acquisition_factor(
    const std::map<std::string, std::size_t>& batch_counts,
    const std::map<std::string, std::size_t>& pool_composition);
std::map<std::string, double> acquisition_factor(const IdSet& batch, const PoolState& before);

struct StratumResult {
  Difficulty difficulty = Difficulty::Easy;
  std::size_t count = 0;
  double accuracy = 0.0;
};

struct StratifiedResult {
  std::vector<StratumResult> strata;  // empty classes omitted
  std::size_t total = 0;
  double overall = 0.0;

  const StratumResult* find(Difficulty d) const;
};

StratifiedResult stratified_accuracy(const Classifier& model, const Dataset& test,
                                     std::span<const DatamapEntry> test_datamap);

}  // namespace cartal
