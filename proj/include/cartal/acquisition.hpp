#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cartal/classifier.hpp"
#include "cartal/pool.hpp"

namespace cartal {

enum class StrategyKind { Random, Mcme, Bald, Dal };

StrategyKind parse_strategy(const std::string& name);
std::string to_string(StrategyKind s);
/// "random", "mcme", "bald", "dal"
const std::vector<std::string>& strategy_names();

struct AcquisitionScore {
  ExampleId example_id = 0;
  double score = 0.0;  // higher means more desirable to acquire
};

/// H(p) = -sum p ln p in nats, 0 ln 0 := 0. Validates p.
double predictive_entropy(std::span<const double> p);

/// Entropy of the T-sample mean distribution, per row of the MC matrices.
std::vector<AcquisitionScore> score_mcme(const std::vector<ProbMatrix>& mc,
                                         std::span<const ExampleId> ids);

/// Mutual information H(mean_t p_t) - mean_t H(p_t), clamped at 0. Needs T >= 2.
std::vector<AcquisitionScore> score_bald(const std::vector<ProbMatrix>& mc,
                                         std::span<const ExampleId> ids);

struct DalConfig {
  std::size_t epochs = 200;
  double learning_rate = 0.1;
  // 0 trains a logistic-regression head; otherwise one hidden layer of this width.
  std::size_t hidden = 0;
};

/// Discriminator probability that each unlabelled embedding belongs to the
/// unlabelled set (labelled rows are class 0, unlabelled rows class 1).
std::vector<AcquisitionScore> score_dal(const Eigen::MatrixXd& embeddings_labelled,
                                        const Eigen::MatrixXd& embeddings_unlabelled,
                                        std::span<const ExampleId> unlabelled_ids,
                                        const DalConfig& cfg, std::uint64_t rng_seed);

/// Highest k scores; ties go to the lower id. Result sorted by descending score.
std::vector<ExampleId> top_k(std::vector<AcquisitionScore> scores, std::size_t k);

struct AcquisitionOptions {
  std::size_t mc_samples = 4;
  DalConfig dal;
};

IdSet select_batch(StrategyKind strategy, const PoolState& state, const Classifier& model,
                   std::size_t k, std::uint64_t rng_seed, const AcquisitionOptions& options = {});

/// Scores for every unlabelled example under a scoring strategy (not Random).
std::vector<AcquisitionScore> score_pool(StrategyKind strategy, const PoolState& state,
                                         const Classifier& model, std::uint64_t rng_seed,
                                         const AcquisitionOptions& options = {});

}  // namespace cartal
