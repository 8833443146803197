#include "cartal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "cartal/csv.hpp"
#include "cartal/error.hpp"
#include "cartal/random.hpp"

namespace cartal {

namespace {

std::uint64_t split_seed(const ExperimentConfig& c, std::uint64_t seed) {
  return derive_seed(derive_seed(c.base_seed, hash_name("seed-split")), seed);
}

std::uint64_t run_seed(const ExperimentConfig& c, const std::string& strategy,
                       std::uint64_t seed) {
  return derive_seed(derive_seed(c.base_seed, hash_name(strategy)), seed);
}

TrainConfig seeded(TrainConfig t, std::uint64_t seed) {
  t.rng_seed = seed;
  return t;
}

std::vector<ExampleId> as_vector(const IdSet& ids) { return {ids.begin(), ids.end()}; }

std::vector<std::string> test_set_names(const PreparedData& data) {
  std::vector<std::string> names{"validation"};
  for (const auto& t : data.test_sets) names.push_back(t.name);
  return names;
}

std::map<std::string, double> evaluate(const Classifier& model, const PreparedData& data) {
  std::map<std::string, double> out;
  out["validation"] = model.accuracy(data.validation_data());
  for (const auto& t : data.test_sets) out[t.name] = model.accuracy(LabelledData::from(t));
  return out;
}

std::string opt_num(const std::optional<double>& v) { return v ? csv::num(*v) : ""; }

}  // namespace

Dataset materialize_source(const SourceSpec& spec) {
  if (spec.synthetic) return generate_synthetic_source(*spec.synthetic, spec.seed);
  return load_dataset(spec.file, format_from_path(spec.file));
}

PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData data;
  for (const auto& s : config.sources) data.sources.push_back(materialize_source(s));
  std::vector<Dataset> tests_raw;
  for (const auto& t : config.test_sets) {
    std::vector<Dataset> parts;
    for (const auto& s : t.sources) parts.push_back(materialize_source(s));
    tests_raw.push_back(concatenate(t.name, parts));
  }

  for (const auto& s : data.sources) {
    data.num_classes = std::max(data.num_classes, s.num_classes);
    if (!s.empty()) data.feature_dim = s.feature_dim;
  }
  for (const auto& t : tests_raw) data.num_classes = std::max(data.num_classes, t.num_classes);
  for (auto& s : data.sources) {
    s.num_classes = data.num_classes;
    if (s.empty()) s.feature_dim = data.feature_dim;
    if (s.feature_dim != data.feature_dim)
      throw SchemaError("source '" + s.name + "' has feature_dim " +
                        std::to_string(s.feature_dim) + ", expected " +
                        std::to_string(data.feature_dim));
  }

  std::vector<Dataset> held, rest;
  for (std::size_t i = 0; i < data.sources.size(); ++i) {
    auto [h, r] = hold_out(data.sources[i], config.validation_fraction,
                           derive_seed(derive_seed(config.base_seed, hash_name("validation")), i));
    held.push_back(std::move(h));
    rest.push_back(std::move(r));
  }
  data.pool = std::make_shared<const Dataset>(build_multi_source_pool(
      rest, config.per_source_cap, derive_seed(config.base_seed, hash_name("pool"))));
  data.validation = concatenate("validation", held);
  data.validation.num_classes = data.num_classes;
  data.validation.feature_dim = data.feature_dim;

  for (auto& t : tests_raw) {
    if (!t.empty() && t.feature_dim != data.feature_dim)
      throw SchemaError("test set '" + t.name + "' has feature_dim " +
                        std::to_string(t.feature_dim) + ", expected " +
                        std::to_string(data.feature_dim));
    t.num_classes = data.num_classes;
    t.feature_dim = data.feature_dim;
    data.test_sets.push_back(std::move(t));
  }
  return data;
}

PreparedData restrict_pool(const PreparedData& data, const IdSet& keep) {
  PreparedData out = data;
  out.pool = std::make_shared<const Dataset>(subset(*data.pool, keep));
  return out;
}

ClassifierConfig resolved_classifier(const ExperimentConfig& config, const PreparedData& data) {
  ClassifierConfig c = config.classifier;
  c.input_dim = data.feature_dim;
  c.num_classes = data.num_classes;
  return c;
}

Reference build_reference(const ExperimentConfig& config, const PreparedData& data) {
  auto result = run_cartography(
      *data.pool, *data.pool, resolved_classifier(config, data),
      seeded(config.cartography_train, derive_seed(config.base_seed, hash_name("cartography"))),
      config.thresholds, data.validation_data());
  spdlog::info("reference cartography: {} examples, {} snapshots", result.datamap.size(),
               result.snapshots);
  return {std::move(result.datamap), std::move(result.model)};
}

std::vector<std::vector<DatamapEntry>> build_test_datamaps(const ExperimentConfig& config,
                                                           const PreparedData& data) {
  std::vector<std::vector<DatamapEntry>> out;
  for (std::size_t i = 0; i < data.test_sets.size(); ++i) {
    const auto& t = data.test_sets[i];
    auto result = run_cartography(
        t, t, resolved_classifier(config, data),
        seeded(config.cartography_train,
               derive_seed(config.base_seed, hash_name("test-cartography:" + t.name))),
        config.thresholds, data.validation_data());
    out.push_back(std::move(result.datamap));
  }
  return out;
}

RunResult run_al(const ExperimentConfig& config, const PreparedData& data, StrategyKind strategy,
                 std::uint64_t seed, const RunContext& context) {
  const std::string name = to_string(strategy);
  const auto rseed = run_seed(config, name, seed);
  const auto& pool = *data.pool;
  const ClassifierConfig ccfg = resolved_classifier(config, data);
  const LabelledData val = data.validation_data();
  const Reference* ref = context.reference;
  const bool have_datamap = ref && !ref->datamap.empty();

  RunResult run;
  run.strategy = name;
  run.seed = seed;
  PoolState state = seed_split(data.pool, config.seed_size, split_seed(config, seed));
  run.initial_labelled = state.labelled();

  auto train_model = [&](std::uint64_t fit_seed) {
    ++run.fits;
    if (state.labelled().empty()) return Classifier::initialized(ccfg, fit_seed);
    const auto ids = as_vector(state.labelled());
    return fit(ccfg, LabelledData::from(pool, ids), val, seeded(config.train, fit_seed));
  };

  for (std::size_t r = 0; r < config.rounds; ++r) {
    if (config.k > state.unlabelled().size())
      throw CapacityError("pool exhausted in round " + std::to_string(r) + ": need " +
                          std::to_string(config.k) + ", have " +
                          std::to_string(state.unlabelled().size()));
    Classifier model = train_model(derive_seed(rseed, r));

    RoundLog log;
    log.strategy = name;
    log.seed = seed;
    log.round = r;
    log.labelled_size = state.labelled().size();
    log.val_accuracy = model.accuracy(val);

    log.acquired = select_batch(strategy, state, model, config.k,
                                derive_seed(derive_seed(rseed, r), hash_name("select")),
                                config.acquisition);
    log.metrics.round = r;
    log.metrics.acquisition_factor = acquisition_factor(log.acquired, state);
    std::vector<int> labels;
    for (auto id : log.acquired) {
      const auto& ex = pool.at(id);
      ++log.source_counts[ex.source];
      labels.push_back(ex.label);
    }
    log.metrics.class_distribution = class_distribution(labels, data.num_classes);

    state = transfer(state, log.acquired);

    log.metrics.input_diversity =
        input_diversity(token_set(pool, log.acquired), token_set(pool, state.unlabelled()));
    if (ref && ref->model)
      log.metrics.output_uncertainty =
          output_uncertainty(*ref->model, feature_matrix(pool, as_vector(log.acquired)));
    if (have_datamap) {
      const IdSet batch[] = {log.acquired};
      log.difficulty_counts = acquisition_by_difficulty(batch, ref->datamap).front();
    }
    spdlog::debug("{} seed {} round {}: val_acc {:.4f}", name, seed, r, log.val_accuracy);
    run.rounds.push_back(std::move(log));
  }

  Classifier final_model = train_model(derive_seed(rseed, config.rounds));
  run.test_accuracy = evaluate(final_model, data);
  if (context.test_datamaps) {
    for (std::size_t i = 0; i < data.test_sets.size(); ++i)
      run.stratified[data.test_sets[i].name] =
          stratified_accuracy(final_model, data.test_sets[i], (*context.test_datamaps)[i]);
  }

  if (!state.labelled().empty()) {
    run.profile.input_diversity =
        input_diversity(token_set(pool, state.labelled()), token_set(pool, state.unlabelled()));
    const auto ids = as_vector(state.labelled());
    if (ref && ref->model)
      run.profile.output_uncertainty = output_uncertainty(*ref->model, feature_matrix(pool, ids));
    run.profile.class_distribution = class_distribution(label_vector(pool, ids), data.num_classes);
  }
  run.final_model = std::move(final_model);
  run.final_state = std::move(state);
  return run;
}

PoolState replay(const RunResult& run, std::shared_ptr<const Dataset> pool) {
  IdSet unlabelled;
  for (const auto& e : pool->examples)
    if (!run.initial_labelled.contains(e.id)) unlabelled.insert(e.id);
  PoolState state(std::move(pool), run.initial_labelled, std::move(unlabelled));
  for (const auto& log : run.rounds) state = transfer(state, log.acquired);
  return state;
}

std::size_t SuiteResult::failures() const {
  return static_cast<std::size_t>(
      std::count_if(runs.begin(), runs.end(), [](const RunOutcome& r) { return !r.ok(); }));
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

std::vector<RunSummary> summarize(const std::vector<RunOutcome>& runs,
                                  const std::vector<std::string>& test_sets) {
  std::vector<std::string> strategies;
  for (const auto& r : runs)
    if (std::find(strategies.begin(), strategies.end(), r.strategy) == strategies.end())
      strategies.push_back(r.strategy);
  std::vector<RunSummary> out;
  for (const auto& s : strategies) {
    for (const auto& t : test_sets) {
      RunSummary sum;
      sum.strategy = s;
      sum.test_set = t;
      std::vector<double> acc;
      for (const auto& r : runs) {
        if (r.strategy != s) continue;
        if (!r.ok()) {
          ++sum.failed;
          continue;
        }
        auto it = r.result->test_accuracy.find(t);
        if (it == r.result->test_accuracy.end()) continue;
        acc.push_back(it->second);
        sum.final_labelled_size = r.result->final_state.labelled().size();
      }
      sum.completed = acc.size();
      std::tie(sum.mean, sum.std) = mean_std(acc);
      out.push_back(sum);
    }
  }
  return out;
}

SuiteResult run_suite(const ExperimentConfig& config, const PreparedData& data,
                      const RunContext& context, const RunFunction& runner) {
  SuiteResult suite;
  for (auto s : config.strategies)
    for (auto seed : config.seeds) suite.runs.push_back({to_string(s), seed, std::nullopt, ""});

  RunFunction run = runner ? runner : [&](StrategyKind s, std::uint64_t seed) {
    return run_al(config, data, s, seed, context);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < suite.runs.size(); i = next++) {
      auto& outcome = suite.runs[i];
      try {
        outcome.result = run(parse_strategy(outcome.strategy), outcome.seed);
        spdlog::info("run {} seed {} finished", outcome.strategy, outcome.seed);
      } catch (const std::exception& e) {
        outcome.error = e.what();
        spdlog::error("run {} seed {} failed: {}", outcome.strategy, outcome.seed, e.what());
      }
    }
  };
  const std::size_t threads = std::min(config.parallel, suite.runs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  suite.summaries = summarize(suite.runs, test_set_names(data));
  return suite;
}

AblationResult run_ablated_suite(const ExperimentConfig& config, const PreparedData& data,
                                 const Reference& reference, bool with_original,
                                 const RunContext& context) {
  if (!config.ablation) throw ConfigError("ablation fraction is not configured");
  AblationResult out;
  out.retained = ablate_hard_to_learn(reference.datamap, data.pool->source_map(), *config.ablation);
  spdlog::info("ablation keeps {} of {} pool examples", out.retained.size(), data.pool->size());
  const PreparedData filtered = restrict_pool(data, out.retained);
  out.ablated = run_suite(config, filtered, context);
  if (with_original) out.original = run_suite(config, data, context);
  return out;
}

SplitResult run_difficulty_split(const ExperimentConfig& config, const PreparedData& data,
                                 const Reference& reference) {
  if (!config.difficulty_split) throw ConfigError("difficulty_split is not configured");
  const auto& split = *config.difficulty_split;
  const ClassifierConfig ccfg = resolved_classifier(config, data);
  const LabelledData val = data.validation_data();
  SplitResult out;
  std::vector<RunOutcome> outcomes;
  for (const auto& combo_str : split.combos) {
    const auto combo = parse_combo(combo_str);
    const auto base = derive_seed(config.base_seed, hash_name("difficulty-split:" + combo_str));
    for (auto seed : config.seeds) {
      SplitRun run;
      run.combo = combo_str;
      run.seed = seed;
      RunOutcome outcome{combo_str, seed, std::nullopt, ""};
      try {
        const auto ids = as_vector(
            build_difficulty_split(reference.datamap, combo, split.n, derive_seed(base, seed)));
        run.train_size = ids.size();
        const Classifier model = fit(ccfg, LabelledData::from(*data.pool, ids), val,
                                     seeded(config.train, derive_seed(base, seed + 1)));
        run.test_accuracy = evaluate(model, data);
        RunResult r;
        r.strategy = combo_str;
        r.seed = seed;
        r.test_accuracy = run.test_accuracy;
        r.final_state = PoolState(data.pool, IdSet(ids.begin(), ids.end()), {});
        outcome.result = std::move(r);
      } catch (const std::exception& e) {
        run.error = outcome.error = e.what();
        spdlog::error("split {} seed {} failed: {}", combo_str, seed, e.what());
      }
      out.runs.push_back(std::move(run));
      outcomes.push_back(std::move(outcome));
    }
  }
  out.summaries = summarize(outcomes, test_set_names(data));
  return out;
}

void write_rounds_csv(const SuiteResult& suite, const PreparedData& data,
                      const std::filesystem::path& path) {
  const auto sources = data.pool->source_names();
  csv::Table t;
  t.header = {"strategy", "seed", "round", "labelled_size", "val_acc"};
  for (const auto& s : sources) t.header.push_back("count_" + s);
  for (const auto& s : sources) t.header.push_back("factor_" + s);
  t.header.push_back("input_diversity");
  t.header.push_back("output_uncertainty");
  for (int c = 0; c < data.num_classes; ++c) t.header.push_back("class_" + std::to_string(c));
  for (auto d : kDifficulties) t.header.push_back("acquired_" + to_string(d));

  for (const auto& run : suite.runs) {
    if (!run.ok()) continue;
    for (const auto& log : run.result->rounds) {
      std::vector<std::string> row{log.strategy, std::to_string(log.seed),
                                   std::to_string(log.round), std::to_string(log.labelled_size),
                                   csv::num(log.val_accuracy)};
      for (const auto& s : sources) {
        auto it = log.source_counts.find(s);
        row.push_back(std::to_string(it == log.source_counts.end() ? 0 : it->second));
      }
      for (const auto& s : sources) {
        auto it = log.metrics.acquisition_factor.find(s);
        row.push_back(it == log.metrics.acquisition_factor.end() ? "" : csv::num(it->second));
      }
      row.push_back(csv::num(log.metrics.input_diversity));
      row.push_back(opt_num(log.metrics.output_uncertainty));
      for (double f : log.metrics.class_distribution) row.push_back(csv::num(f));
      for (std::size_t d = 0; d < 4; ++d)
        row.push_back(log.difficulty_counts ? std::to_string((*log.difficulty_counts)[d]) : "");
      t.rows.push_back(std::move(row));
    }
  }
  csv::write(t, path);
}

void write_acquisitions_csv(const SuiteResult& suite, const PreparedData& data,
                            const std::filesystem::path& path) {
  csv::Table t;
  t.header = {"strategy", "seed", "round", "id", "source"};
  for (const auto& run : suite.runs) {
    if (!run.ok()) continue;
    for (auto id : run.result->initial_labelled)
      t.rows.push_back({run.strategy, std::to_string(run.seed), "seed", std::to_string(id),
                        data.pool->at(id).source});
    for (const auto& log : run.result->rounds)
      for (auto id : log.acquired)
        t.rows.push_back({run.strategy, std::to_string(run.seed), std::to_string(log.round),
                          std::to_string(id), data.pool->at(id).source});
  }
  csv::write(t, path);
}

void write_runs_csv(const SuiteResult& suite, const PreparedData& data,
                    const std::filesystem::path& path) {
  const auto tests = test_set_names(data);
  csv::Table t;
  t.header = {"strategy", "seed", "status", "final_labelled_size"};
  for (const auto& name : tests) t.header.push_back("acc_" + name);
  t.header.push_back("error");
  for (const auto& run : suite.runs) {
    std::vector<std::string> row{run.strategy, std::to_string(run.seed), run.ok() ? "ok" : "failed",
                                 run.ok() ? std::to_string(run.result->final_state.labelled().size())
                                          : ""};
    for (const auto& name : tests) {
      if (!run.ok()) {
        row.emplace_back();
        continue;
      }
      auto it = run.result->test_accuracy.find(name);
      row.push_back(it == run.result->test_accuracy.end() ? "" : csv::num(it->second));
    }
    row.push_back(run.error);
    t.rows.push_back(std::move(row));
  }
  csv::write(t, path);
}

void write_summary_csv(const std::vector<RunSummary>& summaries,
                       const std::filesystem::path& path) {
  csv::Table t;
  t.header = {"strategy", "test_set", "mean", "std", "completed", "failed", "final_labelled_size"};
  for (const auto& s : summaries)
    t.rows.push_back({s.strategy, s.test_set, s.completed ? csv::num(s.mean) : "",
                      s.completed ? csv::num(s.std) : "", std::to_string(s.completed),
                      std::to_string(s.failed), std::to_string(s.final_labelled_size)});
  csv::write(t, path);
}

void write_profile_csv(const SuiteResult& suite, const PreparedData& data,
                       const std::filesystem::path& path) {
  csv::Table t;
  t.header = {"strategy", "seed", "labelled_size", "input_diversity", "output_uncertainty"};
  for (int c = 0; c < data.num_classes; ++c) t.header.push_back("class_" + std::to_string(c));
  for (const auto& run : suite.runs) {
    if (!run.ok()) continue;
    const auto& p = run.result->profile;
    std::vector<std::string> row{run.strategy, std::to_string(run.seed),
                                 std::to_string(run.result->final_state.labelled().size()),
                                 csv::num(p.input_diversity), opt_num(p.output_uncertainty)};
    for (int c = 0; c < data.num_classes; ++c)
      row.push_back(static_cast<std::size_t>(c) < p.class_distribution.size()
                        ? csv::num(p.class_distribution[static_cast<std::size_t>(c)])
                        : "");
    t.rows.push_back(std::move(row));
  }
  csv::write(t, path);
}

void write_stratified_csv(const SuiteResult& suite, const PreparedData& data,
                          const std::filesystem::path& path) {
  csv::Table t;
  t.header = {"strategy", "seed", "test_set", "difficulty", "count", "accuracy"};
  for (const auto& run : suite.runs) {
    if (!run.ok()) continue;
    for (const auto& test : data.test_sets) {
      auto it = run.result->stratified.find(test.name);
      if (it == run.result->stratified.end()) continue;
      const auto& sr = it->second;
      for (const auto& s : sr.strata)
        t.rows.push_back({run.strategy, std::to_string(run.seed), test.name, to_string(s.difficulty),
                          std::to_string(s.count), csv::num(s.accuracy)});
      t.rows.push_back({run.strategy, std::to_string(run.seed), test.name, "overall",
                        std::to_string(sr.total), csv::num(sr.overall)});
    }
  }
  csv::write(t, path);
}

void write_splits_csv(const SplitResult& result, const PreparedData& data,
                      const std::filesystem::path& path) {
  const auto tests = test_set_names(data);
  csv::Table t;
  t.header = {"combo", "seed", "train_size", "status"};
  for (const auto& name : tests) t.header.push_back("acc_" + name);
  t.header.push_back("error");
  for (const auto& run : result.runs) {
    std::vector<std::string> row{run.combo, std::to_string(run.seed),
                                 std::to_string(run.train_size),
                                 run.error.empty() ? "ok" : "failed"};
    for (const auto& name : tests) {
      auto it = run.test_accuracy.find(name);
      row.push_back(it == run.test_accuracy.end() ? "" : csv::num(it->second));
    }
    row.push_back(run.error);
    t.rows.push_back(std::move(row));
  }
  csv::write(t, path);
}

}  // namespace cartal
