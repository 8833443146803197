#include "cartal/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "cartal/error.hpp"
#include "cartal/random.hpp"

namespace cartal {

namespace {

constexpr const char* kCheckpointMagic = "CARTAL1";

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Eigen::MatrixXd mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution keep(1.0 - rate);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = keep(rng) ? keep_scale : 0.0;
  return mask;
}

Eigen::MatrixXd affine(const Eigen::MatrixXd& in, const Classifier::Layer& layer) {
  Eigen::MatrixXd out = in * layer.weight.transpose();
  out.rowwise() += layer.bias.transpose();
  return out;
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

void ClassifierConfig::validate() const {
  if (input_dim == 0) throw ConfigError("classifier input_dim must be positive");
  if (hidden_dims.empty()) throw ConfigError("classifier hidden_dims must be non-empty");
  for (auto h : hidden_dims)
    if (h == 0) throw ConfigError("classifier hidden_dims entries must be positive");
  if (num_classes < 2) throw ConfigError("classifier num_classes must be at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("dropout_rate must lie in [0, 1)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (!(eval_interval > 0.0 && eval_interval <= 1.0))
    throw ConfigError("eval_interval must lie in (0, 1]");
}

Eigen::MatrixXd feature_matrix(const Dataset& ds) {
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(ds.size()),
                     static_cast<Eigen::Index>(ds.feature_dim));
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t k = 0; k < ds.feature_dim; ++k) xs(i, k) = ds.examples[i].features[k];
  return xs;
}

Eigen::MatrixXd feature_matrix(const Dataset& ds, std::span<const ExampleId> ids) {
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(ids.size()),
                     static_cast<Eigen::Index>(ds.feature_dim));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& f = ds.at(ids[i]).features;
    for (std::size_t k = 0; k < ds.feature_dim; ++k) xs(i, k) = f[k];
  }
  return xs;
}

std::vector<int> label_vector(const Dataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& e : ds.examples) out.push_back(e.label);
  return out;
}

std::vector<int> label_vector(const Dataset& ds, std::span<const ExampleId> ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(ds.at(id).label);
  return out;
}

LabelledData LabelledData::from(const Dataset& ds) {
  return {feature_matrix(ds), label_vector(ds)};
}

LabelledData LabelledData::from(const Dataset& ds, std::span<const ExampleId> ids) {
  return {feature_matrix(ds, ids), label_vector(ds, ids)};
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Classifier::Classifier(ClassifierConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t in = config_.input_dim;
  auto add = [&](std::size_t out) {
    layers_.push_back({Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out),
                                             static_cast<Eigen::Index>(in)),
                       Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))});
    in = out;
  };
  for (auto h : config_.hidden_dims) add(h);
  add(static_cast<std::size_t>(config_.num_classes));
}

Classifier Classifier::zeros(const ClassifierConfig& config) { return Classifier(config); }

Classifier Classifier::initialized(const ClassifierConfig& config, std::uint64_t seed) {
  Classifier model(config);
  Rng rng = make_rng(seed);
  for (auto& layer : model.layers_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = u(rng);
  }
  return model;
}

void Classifier::check_input(const Eigen::MatrixXd& xs) const {
  if (static_cast<std::size_t>(xs.cols()) != config_.input_dim)
    throw ArgumentError("input has " + std::to_string(xs.cols()) + " features, model expects " +
                        std::to_string(config_.input_dim));
}

Eigen::MatrixXd Classifier::activate(const Eigen::MatrixXd& pre) const {
  if (config_.activation == Activation::Relu) return pre.cwiseMax(0.0);
  return pre.array().tanh().matrix();
}

Eigen::MatrixXd Classifier::embed(const Eigen::MatrixXd& xs) const {
  check_input(xs);
  Eigen::MatrixXd a = xs;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) a = activate(affine(a, layers_[l]));
  return a;
}

Eigen::MatrixXd Classifier::logits(const Eigen::MatrixXd& xs) const {
  return affine(embed(xs), layers_.back());
}

ProbMatrix Classifier::predict_proba(const Eigen::MatrixXd& xs) const {
  return softmax_rows(logits(xs));
}

std::vector<Eigen::MatrixXd> Classifier::mc_logits(const Eigen::MatrixXd& xs,
                                                   std::size_t samples,
                                                   std::uint64_t rng_seed) const {
  if (samples == 0) throw ArgumentError("MC sampling needs T >= 1");
  check_input(xs);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(samples);
  for (std::size_t t = 0; t < samples; ++t) {
    Rng rng = make_rng(derive_seed(rng_seed, t));
    Eigen::MatrixXd a = xs;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      a = activate(affine(a, layers_[l]));
      if (config_.dropout_rate > 0.0)
        a = a.cwiseProduct(dropout_mask(a.rows(), a.cols(), config_.dropout_rate, rng));
    }
    out.push_back(affine(a, layers_.back()));
  }
  return out;
}

std::vector<ProbMatrix> Classifier::mc_predict_proba(const Eigen::MatrixXd& xs,
                                                     std::size_t samples,
                                                     std::uint64_t rng_seed) const {
  auto raw = mc_logits(xs, samples, rng_seed);
  for (auto& m : raw) m = softmax_rows(m);
  return raw;
}

std::vector<int> Classifier::predict(const Eigen::MatrixXd& xs) const {
  const Eigen::MatrixXd z = logits(xs);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index arg = 0;
    z.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

double Classifier::accuracy(const LabelledData& data) const {
  if (data.size() == 0) return 0.0;
  const auto pred = predict(data.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::size_t Classifier::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<double> Classifier::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) flat.push_back(l.weight(i, j));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) flat.push_back(l.bias(i));
  }
  return flat;
}

void Classifier::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count())
    throw ArgumentError("expected " + std::to_string(parameter_count()) + " parameters, got " +
                        std::to_string(flat.size()));
  std::size_t k = 0;
  for (auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = flat[k++];
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = flat[k++];
  }
}

double Classifier::loss_and_gradient(const Eigen::MatrixXd& xs, std::span<const int> labels,
                                     std::vector<double>* gradient,
                                     const std::vector<Eigen::MatrixXd>* masks) const {
  check_input(xs);
  const auto n = xs.rows();
  if (static_cast<std::size_t>(n) != labels.size())
    throw ArgumentError("features/labels row mismatch");
  if (n == 0) throw ArgumentError("loss over an empty batch");
  const std::size_t hidden = layers_.size() - 1;
  if (masks && masks->size() != hidden) throw ArgumentError("need one dropout mask per hidden layer");

  // Forward, caching pre-activations and layer inputs.
  std::vector<Eigen::MatrixXd> inputs{xs};
  std::vector<Eigen::MatrixXd> pre;
  for (std::size_t l = 0; l < hidden; ++l) {
    pre.push_back(affine(inputs.back(), layers_[l]));
    Eigen::MatrixXd a = activate(pre.back());
    if (masks) a = a.cwiseProduct((*masks)[l]);
    inputs.push_back(std::move(a));
  }
  const Eigen::MatrixXd z = affine(inputs.back(), layers_.back());

  double loss = 0.0;
  Eigen::MatrixXd probs(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    probs.row(i) = (z.row(i).array() - lse).exp();
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= config_.num_classes) throw ArgumentError("label out of range");
    loss -= z(i, y) - lse;
  }
  loss /= static_cast<double>(n);
  if (!gradient) return loss;

  Eigen::MatrixXd delta = probs;
  for (Eigen::Index i = 0; i < n; ++i) delta(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  delta /= static_cast<double>(n);

  std::vector<Eigen::MatrixXd> grad_w(layers_.size());
  std::vector<Eigen::VectorXd> grad_b(layers_.size());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    grad_w[l] = delta.transpose() * inputs[l];
    grad_b[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd d_in = delta * layers_[l].weight;
    if (masks) d_in = d_in.cwiseProduct((*masks)[l - 1]);
    const auto& p = pre[l - 1];
    if (config_.activation == Activation::Relu) {
      d_in = d_in.cwiseProduct((p.array() > 0.0).cast<double>().matrix());
    } else {
      d_in = d_in.cwiseProduct((1.0 - p.array().tanh().square()).matrix());
    }
    delta = std::move(d_in);
  }

  gradient->clear();
  gradient->reserve(parameter_count());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    for (Eigen::Index i = 0; i < grad_w[l].rows(); ++i)
      for (Eigen::Index j = 0; j < grad_w[l].cols(); ++j) gradient->push_back(grad_w[l](i, j));
    for (Eigen::Index i = 0; i < grad_b[l].size(); ++i) gradient->push_back(grad_b[l](i));
  }
  return loss;
}

bool Classifier::operator==(const Classifier& other) const {
  if (config_.input_dim != other.config_.input_dim ||
      config_.hidden_dims != other.config_.hidden_dims ||
      config_.num_classes != other.config_.num_classes ||
      config_.dropout_rate != other.config_.dropout_rate ||
      config_.activation != other.config_.activation)
    return false;
  return parameters() == other.parameters();
}

void Classifier::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["magic"] = kCheckpointMagic;
  j["input_dim"] = config_.input_dim;
  j["hidden_dims"] = config_.hidden_dims;
  j["num_classes"] = config_.num_classes;
  j["dropout_rate"] = config_.dropout_rate;
  j["activation"] = to_string(config_.activation);
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : layers_) {
    std::vector<double> w;
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index k = 0; k < l.weight.cols(); ++k) w.push_back(l.weight(i, k));
    layers.push_back({{"rows", l.weight.rows()},
                      {"cols", l.weight.cols()},
                      {"weight", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

Classifier Classifier::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (j.value("magic", "") != kCheckpointMagic)
    throw SchemaError("checkpoint magic header is not " + std::string(kCheckpointMagic));
  try {
    ClassifierConfig cfg;
    cfg.input_dim = j.at("input_dim").get<std::size_t>();
    cfg.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
    cfg.activation = parse_activation(j.at("activation").get<std::string>());
    Classifier model(cfg);
    const auto& layers = j.at("layers");
    if (layers.size() != model.layers_.size()) throw SchemaError("checkpoint layer count mismatch");
    std::vector<double> flat;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto w = layers[l].at("weight").get<std::vector<double>>();
      const auto b = layers[l].at("bias").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(model.layers_[l].weight.size()) ||
          b.size() != static_cast<std::size_t>(model.layers_[l].bias.size()))
        throw SchemaError("checkpoint layer " + std::to_string(l) + " has wrong shape");
      flat.insert(flat.end(), w.begin(), w.end());
      flat.insert(flat.end(), b.begin(), b.end());
    }
    model.set_parameters(flat);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  }
}

Classifier fit(const ClassifierConfig& config, const LabelledData& train, const LabelledData& val,
               const TrainConfig& tcfg, const DynamicsProbe* probe) {
  tcfg.validate();
  if (train.size() == 0) throw ArgumentError("fit: empty training set");
  if (static_cast<std::size_t>(train.features.cols()) != config.input_dim)
    throw ArgumentError("fit: training features do not match input_dim");
  if (val.size() > 0 && static_cast<std::size_t>(val.features.cols()) != config.input_dim)
    throw ArgumentError("fit: validation features do not match input_dim");

  Classifier model = Classifier::initialized(config, derive_seed(tcfg.rng_seed, 1));
  Rng rng = make_rng(derive_seed(tcfg.rng_seed, 2));

  const std::size_t n = train.size();
  const std::size_t hidden = config.hidden_dims.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t step = 0;
  std::size_t snapshot = 0;
  std::size_t marks = 0;
  auto take_snapshot = [&] {
    const ProbMatrix p = model.predict_proba(probe->features);
    DynamicsSnapshot snap;
    snap.step = snapshot++;
    snap.gold_prob.resize(probe->labels.size());
    snap.predicted.resize(probe->labels.size());
    for (std::size_t i = 0; i < probe->labels.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      snap.gold_prob[i] = p(row, probe->labels[i]);
      Eigen::Index arg = 0;
      p.row(row).maxCoeff(&arg);
      snap.predicted[i] = static_cast<int>(arg);
    }
    probe->sink(snap);
  };

  std::vector<double> params = model.parameters();
  std::vector<double> best = params;
  double best_acc = -1.0;
  std::size_t stale = 0;
  std::vector<double> grad;
  std::vector<Eigen::MatrixXd> masks(hidden);

  for (std::size_t epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += tcfg.batch_size) {
      const std::size_t end = std::min(n, start + tcfg.batch_size);
      const auto rows = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd xb(rows, train.features.cols());
      std::vector<int> yb(end - start);
      for (std::size_t r = start; r < end; ++r) {
        xb.row(static_cast<Eigen::Index>(r - start)) =
            train.features.row(static_cast<Eigen::Index>(order[r]));
        yb[r - start] = train.labels[order[r]];
      }
      for (std::size_t l = 0; l < hidden; ++l) {
        const auto width = static_cast<Eigen::Index>(config.hidden_dims[l]);
        masks[l] = config.dropout_rate > 0.0
                       ? dropout_mask(rows, width, config.dropout_rate, rng)
                       : Eigen::MatrixXd::Ones(rows, width);
      }
      const double loss = model.loss_and_gradient(xb, yb, &grad, &masks);
      if (!std::isfinite(loss))
        throw NumericalError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                             std::to_string(epoch) + ")");
      for (std::size_t k = 0; k < params.size(); ++k) params[k] -= tcfg.learning_rate * grad[k];
      model.set_parameters(params);
      ++step;

      if (probe) {
        const double progress =
            static_cast<double>(epoch) + static_cast<double>(end) / static_cast<double>(n);
        while (static_cast<double>(marks + 1) * tcfg.eval_interval <= progress + 1e-9) {
          take_snapshot();
          ++marks;
        }
      }
    }

    if (val.size() > 0) {
      const double acc = model.accuracy(val);
      if (acc > best_acc) {
        best_acc = acc;
        best = params;
        stale = 0;
      } else if (++stale >= tcfg.patience) {
        break;
      }
    }
  }

  if (val.size() > 0) model.set_parameters(best);
  return model;
}

}  // namespace cartal
