#include "cartal/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cartal/error.hpp"
#include "cartal/random.hpp"

namespace cartal {

namespace {

double entropy_unchecked(const Eigen::Ref<const Eigen::RowVectorXd>& p) {
  double h = 0.0;
  for (Eigen::Index c = 0; c < p.size(); ++c)
    if (p(c) > 0.0) h -= p(c) * std::log(p(c));
  return h;
}

void check_mc(const std::vector<ProbMatrix>& mc, std::span<const ExampleId> ids) {
  if (mc.empty()) throw ArgumentError("MC sample list is empty");
  for (const auto& m : mc)
    if (m.rows() != mc.front().rows() || m.cols() != mc.front().cols())
      throw ArgumentError("MC sample matrices differ in shape");
  if (static_cast<std::size_t>(mc.front().rows()) != ids.size())
    throw ArgumentError("MC matrices and id list differ in length");
}

ProbMatrix mean_of(const std::vector<ProbMatrix>& mc) {
  ProbMatrix mean = mc.front();
  for (std::size_t t = 1; t < mc.size(); ++t) mean += mc[t];
  return mean / static_cast<double>(mc.size());
}

// Column-wise z-scoring over the union of both sets.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> standardize(const Eigen::MatrixXd& a,
                                                        const Eigen::MatrixXd& b) {
  const auto n = static_cast<double>(a.rows() + b.rows());
  Eigen::RowVectorXd mean = (a.colwise().sum() + b.colwise().sum()) / n;
  Eigen::MatrixXd ca = a.rowwise() - mean;
  Eigen::MatrixXd cb = b.rowwise() - mean;
  Eigen::RowVectorXd sd =
      ((ca.array().square().colwise().sum() + cb.array().square().colwise().sum()) / n).sqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (sd(j) < 1e-12) sd(j) = 1.0;
  for (Eigen::Index i = 0; i < ca.rows(); ++i) ca.row(i).array() /= sd.array();
  for (Eigen::Index i = 0; i < cb.rows(); ++i) cb.row(i).array() /= sd.array();
  return {std::move(ca), std::move(cb)};
}

}  // namespace

StrategyKind parse_strategy(const std::string& name) {
  if (name == "random") return StrategyKind::Random;
  if (name == "mcme") return StrategyKind::Mcme;
  if (name == "bald") return StrategyKind::Bald;
  if (name == "dal") return StrategyKind::Dal;
  throw ConfigError("unknown strategy '" + name + "' (valid: random, mcme, bald, dal)");
}

std::string to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::Random: return "random";
    case StrategyKind::Mcme: return "mcme";
    case StrategyKind::Bald: return "bald";
    case StrategyKind::Dal: return "dal";
  }
  return "unknown";
}

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names{"random", "mcme", "bald", "dal"};
  return names;
}

double predictive_entropy(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ArgumentError("probability vector has a negative or NaN entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw ArgumentError("probability vector sums to " + std::to_string(sum));
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

std::vector<AcquisitionScore> score_mcme(const std::vector<ProbMatrix>& mc,
                                         std::span<const ExampleId> ids) {
  check_mc(mc, ids);
  const ProbMatrix mean = mean_of(mc);
  std::vector<AcquisitionScore> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    out[i] = {ids[i], entropy_unchecked(mean.row(static_cast<Eigen::Index>(i)))};
  return out;
}

std::vector<AcquisitionScore> score_bald(const std::vector<ProbMatrix>& mc,
                                         std::span<const ExampleId> ids) {
  check_mc(mc, ids);
  if (mc.size() < 2) throw ArgumentError("BALD needs at least 2 MC samples");
  const ProbMatrix mean = mean_of(mc);
  const double t = static_cast<double>(mc.size());
  std::vector<AcquisitionScore> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double expected = 0.0;
    for (const auto& m : mc) expected += entropy_unchecked(m.row(row));
    const double mi = entropy_unchecked(mean.row(row)) - expected / t;
    out[i] = {ids[i], std::max(0.0, mi)};
  }
  return out;
}

std::vector<AcquisitionScore> score_dal(const Eigen::MatrixXd& embeddings_labelled,
                                        const Eigen::MatrixXd& embeddings_unlabelled,
                                        std::span<const ExampleId> unlabelled_ids,
                                        const DalConfig& cfg, std::uint64_t rng_seed) {
  if (embeddings_labelled.rows() == 0 || embeddings_unlabelled.rows() == 0)
    throw ArgumentError("DAL needs non-empty labelled and unlabelled embeddings");
  if (embeddings_labelled.cols() != embeddings_unlabelled.cols())
    throw ArgumentError("DAL embedding widths differ: " +
                        std::to_string(embeddings_labelled.cols()) + " vs " +
                        std::to_string(embeddings_unlabelled.cols()));
  if (static_cast<std::size_t>(embeddings_unlabelled.rows()) != unlabelled_ids.size())
    throw ArgumentError("DAL unlabelled embeddings and ids differ in length");

  auto [lab, unl] = standardize(embeddings_labelled, embeddings_unlabelled);
  const auto n_lab = lab.rows();
  const auto n = n_lab + unl.rows();
  Eigen::MatrixXd xs(n, lab.cols());
  xs << lab, unl;

  Eigen::VectorXd p_unlabelled;
  if (cfg.hidden == 0) {
    Eigen::VectorXd y(n);
    y.head(n_lab).setZero();
    y.tail(unl.rows()).setOnes();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(xs.cols());
    double b = 0.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      Eigen::VectorXd z = (xs * w).array() + b;
      Eigen::VectorXd p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
      Eigen::VectorXd r = p - y;
      w -= cfg.learning_rate * (xs.transpose() * r) / static_cast<double>(n);
      b -= cfg.learning_rate * r.mean();
    }
    Eigen::VectorXd z = (unl * w).array() + b;
    p_unlabelled = (1.0 / (1.0 + (-z.array()).exp())).matrix();
  } else {
    ClassifierConfig net;
    net.input_dim = static_cast<std::size_t>(xs.cols());
    net.hidden_dims = {cfg.hidden};
    net.num_classes = 2;
    net.dropout_rate = 0.0;
    TrainConfig tcfg;
    tcfg.learning_rate = cfg.learning_rate;
    tcfg.batch_size = static_cast<std::size_t>(n);
    tcfg.max_epochs = cfg.epochs;
    tcfg.rng_seed = rng_seed;
    LabelledData data{xs, std::vector<int>(static_cast<std::size_t>(n), 0)};
    for (Eigen::Index i = n_lab; i < n; ++i) data.labels[static_cast<std::size_t>(i)] = 1;
    const Classifier disc = fit(net, data, LabelledData{}, tcfg);
    p_unlabelled = disc.predict_proba(unl).col(1);
  }

  std::vector<AcquisitionScore> out(unlabelled_ids.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = {unlabelled_ids[i], p_unlabelled(static_cast<Eigen::Index>(i))};
  return out;
}

std::vector<ExampleId> top_k(std::vector<AcquisitionScore> scores, std::size_t k) {
  if (k > scores.size())
    throw ArgumentError("cannot select " + std::to_string(k) + " of " +
                        std::to_string(scores.size()) + " scored examples");
  auto better = [](const AcquisitionScore& a, const AcquisitionScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.example_id < b.example_id;
  };
  std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k), scores.end(),
                    better);
  std::vector<ExampleId> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(scores[i].example_id);
  return out;
}

std::vector<AcquisitionScore> score_pool(StrategyKind strategy, const PoolState& state,
                                         const Classifier& model, std::uint64_t rng_seed,
                                         const AcquisitionOptions& options) {
  const auto& ds = state.universe();
  const std::vector<ExampleId> ids(state.unlabelled().begin(), state.unlabelled().end());
  const Eigen::MatrixXd xs = feature_matrix(ds, ids);
  switch (strategy) {
    case StrategyKind::Mcme:
      return score_mcme(model.mc_predict_proba(xs, options.mc_samples, rng_seed), ids);
    case StrategyKind::Bald:
      return score_bald(model.mc_predict_proba(xs, options.mc_samples, rng_seed), ids);
    case StrategyKind::Dal: {
      const std::vector<ExampleId> lab(state.labelled().begin(), state.labelled().end());
      return score_dal(model.embed(feature_matrix(ds, lab)), model.embed(xs), ids, options.dal,
                       rng_seed);
    }
    case StrategyKind::Random:
      break;
  }
  throw ArgumentError("random selection has no scores");
}

IdSet select_batch(StrategyKind strategy, const PoolState& state, const Classifier& model,
                   std::size_t k, std::uint64_t rng_seed, const AcquisitionOptions& options) {
  const auto& pool = state.unlabelled();
  if (k > pool.size())
    throw ArgumentError("k = " + std::to_string(k) + " exceeds " + std::to_string(pool.size()) +
                        " unlabelled examples");
  if (k == pool.size()) return pool;
  if (strategy == StrategyKind::Random) {
    std::vector<ExampleId> ids(pool.begin(), pool.end());
    Rng rng = make_rng(rng_seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    return IdSet(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
  }
  if (strategy == StrategyKind::Dal && state.labelled().empty())
    throw ArgumentError("DAL needs a non-empty labelled set");
  const auto chosen = top_k(score_pool(strategy, state, model, rng_seed, options), k);
  return IdSet(chosen.begin(), chosen.end());
}

}  // namespace cartal
