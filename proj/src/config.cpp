#include "cartal/config.hpp"

#include <fstream>
#include <set>

#include "cartal/error.hpp"

namespace cartal {

namespace {

using nlohmann::json;

// Walks one JSON object, remembering which keys were read so leftovers can be
// rejected as typos.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  T get(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError("missing required key \"" + sub(key) + "\"");
    return convert<T>(j_.at(key), sub(key));
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), sub(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError("missing required key \"" + sub(key) + "\"");
    return j_.at(key);
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) throw ConfigError("unknown key \"" + sub(it.key()) + "\"");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : "\"" + path_ + "\""; }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError("key \"" + path + "\" has the wrong type");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string indexed(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

SourceSpec parse_source(const json& j, const std::string& path, std::uint64_t default_seed) {
  SourceSpec s;
  if (j.is_object() && j.contains("file")) {
    ObjectReader r(j, path);
    s.file = r.get<std::string>("file");
    r.finish();
    return s;
  }
  ObjectReader r(j, path);
  s.seed = r.get<std::uint64_t>("seed", default_seed);
  // The remaining keys belong to the generator spec.
  json spec = j;
  spec.erase("seed");
  s.synthetic = parse_synthetic_spec(spec, path);
  return s;
}

ClassifierConfig parse_classifier(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  ClassifierConfig c;
  c.hidden_dims = r.get<std::vector<std::size_t>>("hidden_dims", c.hidden_dims);
  c.dropout_rate = r.get<double>("dropout_rate", c.dropout_rate);
  if (r.has("activation")) c.activation = parse_activation(r.get<std::string>("activation"));
  r.finish();
  if (c.hidden_dims.empty()) throw ConfigError("\"" + r.sub("hidden_dims") + "\" is empty");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0))
    throw ConfigError("\"" + r.sub("dropout_rate") + "\" must lie in [0, 1)");
  return c;
}

TrainConfig parse_train(const json& j, const std::string& path, TrainConfig t) {
  ObjectReader r(j, path);
  t.learning_rate = r.get<double>("learning_rate", t.learning_rate);
  t.batch_size = r.get<std::size_t>("batch_size", t.batch_size);
  t.max_epochs = r.get<std::size_t>("max_epochs", t.max_epochs);
  t.patience = r.get<std::size_t>("patience", t.patience);
  t.eval_interval = r.get<double>("eval_interval", t.eval_interval);
  r.finish();
  try {
    t.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("\"" + path + "\": " + e.what());
  }
  return t;
}

json synthetic_to_json(const SyntheticSourceSpec& s) {
  return {{"name", s.name},
          {"n", s.n},
          {"class_centroids", s.class_centroids},
          {"noise_scale", s.noise_scale},
          {"label_flip_rate", s.label_flip_rate},
          {"centroid_overlap", s.centroid_overlap}};
}

json source_to_json(const SourceSpec& s) {
  if (!s.synthetic) return {{"file", s.file.string()}};
  json j = synthetic_to_json(*s.synthetic);
  j["seed"] = s.seed;
  return j;
}

json train_to_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},       {"patience", t.patience},
          {"eval_interval", t.eval_interval}};
}

}  // namespace

std::string SourceSpec::name() const {
  return synthetic ? synthetic->name : file.stem().string();
}

SyntheticSourceSpec parse_synthetic_spec(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  SyntheticSourceSpec s;
  s.name = r.get<std::string>("name");
  s.n = r.get<std::size_t>("n");
  s.class_centroids = r.get<std::vector<std::vector<double>>>("class_centroids");
  if (r.has("noise_scale")) {
    const auto& v = r.raw("noise_scale");
    s.noise_scale = v.is_array() ? r.get<std::vector<double>>("noise_scale")
                                 : std::vector<double>{r.get<double>("noise_scale")};
  }
  s.label_flip_rate = r.get<double>("label_flip_rate", 0.0);
  s.centroid_overlap = r.get<double>("centroid_overlap", 0.0);
  r.finish();
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("\"" + path + "\": " + e.what());
  }
  return s;
}

void ExperimentConfig::validate() const {
  if (sources.empty()) throw ConfigError("\"sources\" must list at least one source");
  if (rounds < 1) throw ConfigError("\"rounds\" must be at least 1");
  if (k < 1) throw ConfigError("\"k\" must be at least 1");
  if (seeds.empty()) throw ConfigError("\"seeds\" must be non-empty");
  if (strategies.empty()) throw ConfigError("\"strategies\" must be non-empty");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("\"validation_fraction\" must lie in [0, 1)");
  if (ablation && !(*ablation >= 0.0 && *ablation < 1.0))
    throw ConfigError("\"ablation\" must lie in [0, 1)");
  if (parallel < 1) throw ConfigError("\"parallel\" must be at least 1");
  if (acquisition.mc_samples < 2) throw ConfigError("\"mc_samples\" must be at least 2");
  thresholds.validate();
  train.validate();
  cartography_train.validate();
}

ExperimentConfig parse_config(const json& doc) {
  ObjectReader r(doc, "");
  ExperimentConfig c;

  const auto& sources = r.raw("sources");
  if (!sources.is_array()) throw ConfigError("\"sources\" must be an array");
  for (std::size_t i = 0; i < sources.size(); ++i)
    c.sources.push_back(parse_source(sources[i], indexed("sources", i), i + 1));

  if (r.has("per_source_cap")) c.per_source_cap = r.get<std::size_t>("per_source_cap");
  c.validation_fraction = r.get<double>("validation_fraction", c.validation_fraction);

  if (r.has("test_sets")) {
    const auto& tests = r.raw("test_sets");
    if (!tests.is_array()) throw ConfigError("\"test_sets\" must be an array");
    for (std::size_t i = 0; i < tests.size(); ++i) {
      const auto path = indexed("test_sets", i);
      ObjectReader tr(tests[i], path);
      TestSetSpec t;
      t.name = tr.get<std::string>("name");
      const auto& members = tr.raw("sources");
      if (!members.is_array() || members.empty())
        throw ConfigError("\"" + tr.sub("sources") + "\" must be a non-empty array");
      for (std::size_t m = 0; m < members.size(); ++m)
        t.sources.push_back(parse_source(members[m], indexed(tr.sub("sources"), m),
                                         1000 + 100 * i + m));
      tr.finish();
      c.test_sets.push_back(std::move(t));
    }
  }

  c.seed_size = r.get<std::size_t>("seed_size", c.seed_size);
  c.k = r.get<std::size_t>("k", c.k);
  c.rounds = r.get<std::size_t>("rounds", c.rounds);
  if (r.has("strategies")) {
    c.strategies.clear();
    for (const auto& s : r.get<std::vector<std::string>>("strategies"))
      c.strategies.push_back(parse_strategy(s));
  }
  c.seeds = r.get<std::vector<std::uint64_t>>("seeds", c.seeds);
  c.base_seed = r.get<std::uint64_t>("base_seed", c.base_seed);

  if (r.has("classifier")) c.classifier = parse_classifier(r.raw("classifier"), "classifier");
  if (r.has("train")) c.train = parse_train(r.raw("train"), "train", c.train);
  c.cartography_train = c.train;
  if (r.has("cartography_train"))
    c.cartography_train = parse_train(r.raw("cartography_train"), "cartography_train", c.train);

  if (r.has("thresholds")) {
    ObjectReader tr(r.raw("thresholds"), "thresholds");
    c.thresholds.impossible_max = tr.get<double>("impossible_max", c.thresholds.impossible_max);
    c.thresholds.hard_max = tr.get<double>("hard_max", c.thresholds.hard_max);
    c.thresholds.medium_max = tr.get<double>("medium_max", c.thresholds.medium_max);
    tr.finish();
  }

  c.acquisition.mc_samples = r.get<std::size_t>("mc_samples", c.acquisition.mc_samples);
  if (r.has("dal")) {
    ObjectReader dr(r.raw("dal"), "dal");
    c.acquisition.dal.epochs = dr.get<std::size_t>("epochs", c.acquisition.dal.epochs);
    c.acquisition.dal.learning_rate =
        dr.get<double>("learning_rate", c.acquisition.dal.learning_rate);
    c.acquisition.dal.hidden = dr.get<std::size_t>("hidden", c.acquisition.dal.hidden);
    dr.finish();
  }

  c.cartography = r.get<bool>("cartography", c.cartography);
  c.stratify = r.get<bool>("stratify", c.stratify);
  if (r.has("ablation")) c.ablation = r.get<double>("ablation");
  if (r.has("difficulty_split")) {
    ObjectReader sr(r.raw("difficulty_split"), "difficulty_split");
    SplitConfig s;
    s.combos = sr.get<std::vector<std::string>>("combos", s.combos);
    s.n = sr.get<std::size_t>("n", s.n);
    sr.finish();
    for (const auto& combo : s.combos) {
      try {
        const auto parsed = parse_combo(combo);
        if (s.n % parsed.size() != 0)
          throw ConfigError("n is not divisible by |" + combo + "|");
      } catch (const Error& e) {
        throw ConfigError("\"difficulty_split.combos\": " + std::string(e.what()));
      }
    }
    c.difficulty_split = s;
  }
  c.parallel = r.get<std::size_t>("parallel", c.parallel);
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["sources"] = json::array();
  for (const auto& s : c.sources) j["sources"].push_back(source_to_json(s));
  if (c.per_source_cap != std::numeric_limits<std::size_t>::max())
    j["per_source_cap"] = c.per_source_cap;
  j["validation_fraction"] = c.validation_fraction;
  j["test_sets"] = json::array();
  for (const auto& t : c.test_sets) {
    json members = json::array();
    for (const auto& s : t.sources) members.push_back(source_to_json(s));
    j["test_sets"].push_back({{"name", t.name}, {"sources", members}});
  }
  j["seed_size"] = c.seed_size;
  j["k"] = c.k;
  j["rounds"] = c.rounds;
  j["strategies"] = json::array();
  for (auto s : c.strategies) j["strategies"].push_back(to_string(s));
  j["seeds"] = c.seeds;
  j["base_seed"] = c.base_seed;
  j["classifier"] = {{"hidden_dims", c.classifier.hidden_dims},
                     {"dropout_rate", c.classifier.dropout_rate},
                     {"activation", to_string(c.classifier.activation)}};
  j["train"] = train_to_json(c.train);
  j["cartography_train"] = train_to_json(c.cartography_train);
  j["thresholds"] = {{"impossible_max", c.thresholds.impossible_max},
                     {"hard_max", c.thresholds.hard_max},
                     {"medium_max", c.thresholds.medium_max}};
  j["mc_samples"] = c.acquisition.mc_samples;
  j["dal"] = {{"epochs", c.acquisition.dal.epochs},
              {"learning_rate", c.acquisition.dal.learning_rate},
              {"hidden", c.acquisition.dal.hidden}};
  j["cartography"] = c.cartography;
  j["stratify"] = c.stratify;
  if (c.ablation) j["ablation"] = *c.ablation;
  if (c.difficulty_split)
    j["difficulty_split"] = {{"combos", c.difficulty_split->combos},
                             {"n", c.difficulty_split->n}};
  j["parallel"] = c.parallel;
  return j;
}

}  // namespace cartal
