// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "cartal/acquisition.hpp"
#include "cartal/cartography.hpp"
#include "cartal/classifier.hpp"
#include "cartal/cli.hpp"
#include "cartal/error.hpp"
#include "cartal/experiment.hpp"
#include "cartal/metrics.hpp"
#include "cartal/random.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace cartal;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

template <typename E, typename F>
bool throws(F&& f) {
  try {
    f();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Criterion 1

void formula_oracles(Outcome& out) {
  std::mt19937_64 rng(11);
  const int trials = 1000;
  double worst = 0.0;
  auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

  for (int i = 0; i < trials; ++i) {
    const auto p = oracle::random_simplex(1 + rng() % 5, rng, true);
    track(predictive_entropy(p), oracle::entropy(p));
  }

  for (int i = 0; i < trials; ++i) {
    const std::size_t t = 2 + rng() % 7, c = 2 + rng() % 4, n = 1 + rng() % 4;
    std::vector<oracle::Matrix> samples(t, oracle::Matrix(n));
    std::vector<ProbMatrix> mc(t, ProbMatrix(n, c));
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t r = 0; r < n; ++r) {
        samples[s][r] = oracle::random_simplex(c, rng, true);
        for (std::size_t k = 0; k < c; ++k) mc[s](r, k) = samples[s][r][k];
      }
    std::vector<ExampleId> ids(n);
    for (std::size_t r = 0; r < n; ++r) ids[r] = r;
    const auto m = score_mcme(mc, ids);
    const auto b = score_bald(mc, ids);
    for (std::size_t r = 0; r < n; ++r) {
      track(m[r].score, oracle::mcme(samples, r));
      track(b[r].score, oracle::bald(samples, r));
    }
  }

  for (int i = 0; i < trials; ++i) {
    TokenSet a, b;
    const int vocab = 1 + static_cast<int>(rng() % 30);
    for (int k = 0; k < 25; ++k) {
      if (rng() % 2) a.insert("w" + std::to_string(rng() % vocab));
      if (rng() % 2) b.insert("w" + std::to_string(rng() % vocab));
    }
    track(input_diversity(a, b), oracle::jaccard(a, b));
  }

  for (int i = 0; i < trials; ++i) {
    Dataset ds;
    ds.name = "pool";
    ds.num_classes = 2;
    ds.feature_dim = 1;
    const std::size_t n = 20 + rng() % 80;
    std::vector<std::string> pool_sources;
    IdSet all;
    for (ExampleId id = 0; id < n; ++id) {
      const std::string s = "s" + std::to_string(rng() % 4);
      ds.examples.push_back({id, s, {0.0}, {}, 0});
      pool_sources.push_back(s);
      all.insert(id);
    }
    const PoolState state(std::make_shared<const Dataset>(std::move(ds)), {}, all);
    IdSet batch;
    const std::size_t k = 1 + rng() % n;
    while (batch.size() < k) batch.insert(rng() % n);
    std::vector<std::string> batch_sources;
    for (auto id : batch) batch_sources.push_back(pool_sources[id]);
    const auto got = acquisition_factor(batch, state);
    for (const auto& [s, v] : oracle::acquisition_factor(batch_sources, pool_sources))
      track(got.at(s), v);
  }

  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<DynamicsTrace> traces;
  for (ExampleId id = 0; id < static_cast<ExampleId>(trials); ++id) {
    DynamicsTrace t{id, {}, {}};
    const std::size_t len = 1 + rng() % 16;
    for (std::size_t s = 0; s < len; ++s) {
      t.confidences.push_back(u(rng));
      t.correct_flags.push_back(rng() % 2);
    }
    traces.push_back(std::move(t));
  }
  const auto map = compute_datamap(traces);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto o = oracle::datamap_entry(traces[i].confidences, traces[i].correct_flags);
    track(map[i].mean_confidence, o.mean);
    track(map[i].variability, o.std);
    track(map[i].correctness, o.correctness);
  }

  out.detail << "max abs error " << worst << " over 6 formulas x " << trials << " inputs";
  out.require(worst <= 1e-9, "max abs error <= 1e-9");
}

// ---------------------------------------------------------------------------
// Criterion 2

void gradient_check(Outcome& out) {
  std::mt19937_64 rng(2025);
  double worst = 0.0;
  for (int net = 0; net < 20; ++net) {
    ClassifierConfig cfg;
    cfg.input_dim = 1 + rng() % 6;
    cfg.hidden_dims = {1 + rng() % 8};
    if (net % 3) cfg.hidden_dims.push_back(1 + rng() % 8);
    cfg.num_classes = 2 + static_cast<int>(rng() % 4);
    cfg.activation = net % 2 ? Activation::Relu : Activation::Tanh;
    Classifier model = Classifier::initialized(cfg, rng());
    // Move off the zero-bias point so no pre-activation sits on a ReLU kink.
    std::normal_distribution<double> jitter(0.0, 0.5);
    auto params = model.parameters();
    for (auto& p : params) p += jitter(rng);
    model.set_parameters(params);

    const Eigen::MatrixXd xs = Eigen::MatrixXd::Random(8, static_cast<Eigen::Index>(cfg.input_dim));
    std::vector<int> ys(8);
    for (auto& y : ys) y = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.num_classes));

    std::vector<double> grad;
    model.loss_and_gradient(xs, ys, &grad);
    const double h = 1e-6;
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double saved = params[k];
      params[k] = saved + h;
      model.set_parameters(params);
      const double up = model.loss_and_gradient(xs, ys, nullptr);
      params[k] = saved - h;
      model.set_parameters(params);
      const double down = model.loss_and_gradient(xs, ys, nullptr);
      params[k] = saved;
      model.set_parameters(params);
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(numeric), std::abs(grad[k]), 1e-6});
      worst = std::max(worst, std::abs(numeric - grad[k]) / denom);
    }
  }
  out.detail << "max relative error " << worst << " over 20 networks";
  out.require(worst < 1e-4, "relative error < 1e-4");
}

// ---------------------------------------------------------------------------
// Criterion 3

// Three classes on the first three axes; `shift` moves the whole source along
// axis `shift_axis` so that sources occupy distinct regions.
SyntheticSourceSpec blob(const std::string& name, std::size_t n, double scale, double noise,
                         double flip, double overlap = 0.0, double shift = 0.0,
                         std::size_t shift_axis = 3) {
  SyntheticSourceSpec s;
  s.name = name;
  s.n = n;
  s.class_centroids.assign(3, std::vector<double>(10, 0.0));
  for (std::size_t c = 0; c < 3; ++c) {
    s.class_centroids[c][c] = scale;
    s.class_centroids[c][shift_axis] = shift;
  }
  s.noise_scale = {noise};
  s.label_flip_rate = flip;
  s.centroid_overlap = overlap;
  return s;
}

SourceSpec source(SyntheticSourceSpec spec, std::uint64_t seed) {
  SourceSpec s;
  s.synthetic = std::move(spec);
  s.seed = seed;
  return s;
}

void loop_bookkeeping(Outcome& out) {
  ExperimentConfig c;
  c.sources = {source(blob("a", 2500, 2.0, 1.0, 0.0), 1), source(blob("b", 2500, 2.0, 1.0, 0.1), 2)};
  c.cartography = false;
  const auto data = prepare_data(c);
  bool all_ok = true;
  std::size_t final_size = 0;
  for (auto strategy : {StrategyKind::Random, StrategyKind::Mcme}) {
    const auto run = run_al(c, data, strategy, 1);
    IdSet unlabelled;
    for (const auto& e : data.pool->examples)
      if (!run.initial_labelled.contains(e.id)) unlabelled.insert(e.id);
    PoolState state(data.pool, run.initial_labelled, unlabelled);
    for (const auto& log : run.rounds) {
      state = transfer(state, log.acquired);
      for (auto id : state.labelled()) all_ok &= !state.unlabelled().contains(id);
      all_ok &= state.labelled().size() + state.unlabelled().size() == data.pool->size();
      all_ok &= state.labelled().size() == c.seed_size + c.k * (log.round + 1);
    }
    final_size = run.final_state.labelled().size();
    out.require(final_size == 4000, "final |D_train| = 4000 (" + to_string(strategy) + ")");
    out.require(replay(run, data.pool).labelled() == run.final_state.labelled() &&
                    replay(run, data.pool).unlabelled() == run.final_state.unlabelled(),
                "replay reconstructs final state (" + to_string(strategy) + ")");
  }
  out.require(all_ok, "disjointness after every transfer");
  out.detail << "pool " << data.pool->size() << ", final labelled " << final_size
             << ", 7 rounds x 2 strategies";
}

// ---------------------------------------------------------------------------
// Criterion 4

void determinism(Outcome& out) {
  const auto dir = testutil::temp_dir("acceptance_det");
  testutil::write_file(dir / "config.json", R"({
    "sources": [
      {"name": "a", "n": 300, "class_centroids": [[2, 0, 0], [0, 2, 0], [0, 0, 2]]},
      {"name": "b", "n": 300, "class_centroids": [[2, 0, 0], [0, 2, 0], [0, 0, 2]],
       "label_flip_rate": 0.2}
    ],
    "test_sets": [{"name": "clean", "sources": [
      {"name": "t", "n": 150, "class_centroids": [[2, 0, 0], [0, 2, 0], [0, 0, 2]]}]}],
    "seed_size": 40, "k": 40, "rounds": 3, "seeds": [1, 2],
    "train": {"max_epochs": 8}
  })");
  std::vector<std::string> files{"rounds.csv", "summary.csv"};
  int rc[2];
  for (int i = 0; i < 2; ++i)
    rc[i] = cli::run({"cartal", "run", "--config", (dir / "config.json").string(), "--out",
                      (dir / ("run" + std::to_string(i))).string()});
  out.require(rc[0] == 0 && rc[1] == 0, "both runs exit 0");
  for (const auto& f : files) {
    const auto a = testutil::read_file(dir / "run0" / f);
    const auto b = testutil::read_file(dir / "run1" / f);
    out.require(!a.empty() && a == b, f + " identical");
  }
  out.detail << "4 strategies x 2 seeds, rounds.csv and summary.csv byte-identical";
}

// ---------------------------------------------------------------------------
// Reference benchmark shared by criteria 5 to 8.

struct Benchmark {
  ExperimentConfig config;
  PreparedData data;
  Reference reference;
};

// Benchmark geometry: class centroids at distance 3 on the first three axes,
// each source shifted by 3 along its own axis. The "overlap" source scales its
// centroids by half toward the origin; "noisy" flips 30% of its labels.
constexpr double kScale = 3.0;
constexpr double kShift = 3.0;
constexpr double kOverlap = 0.5;

ExperimentConfig benchmark_config() {
  ExperimentConfig c;
  c.sources = {source(blob("clean", 2000, kScale, 1.0, 0.0, 0.0, kShift, 3), 1),
               source(blob("overlap", 2000, kScale, 1.0, 0.0, kOverlap, kShift, 4), 2),
               source(blob("noisy", 2000, kScale, 1.0, 0.3, 0.0, kShift, 5), 3)};
  TestSetSpec clean;
  clean.name = "clean";
  clean.sources = {source(blob("clean", 600, kScale, 1.0, 0.0, 0.0, kShift, 3), 101),
                   source(blob("overlap", 600, kScale, 1.0, 0.0, kOverlap, kShift, 4), 102),
                   source(blob("noisy", 600, kScale, 1.0, 0.0, 0.0, kShift, 5), 103)};
  c.test_sets = {clean};
  c.seed_size = 200;
  c.k = 200;
  c.rounds = 5;
  c.seeds = {1, 2, 3, 4, 5};
  c.strategies = {StrategyKind::Random, StrategyKind::Mcme, StrategyKind::Bald};
  return c;
}

const Benchmark& benchmark() {
  static const Benchmark b = [] {
    Benchmark out;
    out.config = benchmark_config();
    out.data = prepare_data(out.config);
    out.reference = build_reference(out.config, out.data);
    return out;
  }();
  return b;
}

const std::string& clean_test() {
  static const std::string name = "clean";
  return name;
}

// ---------------------------------------------------------------------------
// Criterion 5

std::optional<SuiteResult> g_suite;

void collective_outliers(Outcome& out) {
  const auto& b = benchmark();
  const RunContext ctx{&b.reference, nullptr};
  g_suite = run_suite(b.config, b.data, ctx);
  out.require(g_suite->failures() == 0, "all runs complete");

  std::map<std::string, double> hi;  // mean over seeds of H+I count, final 2 rounds
  std::map<std::string, double> factor_sum;
  std::size_t random_rounds = 0;
  for (const auto& run : g_suite->runs) {
    if (!run.ok()) continue;
    const auto& rounds = run.result->rounds;
    for (std::size_t r = rounds.size() - 2; r < rounds.size(); ++r) {
      const auto& d = *rounds[r].difficulty_counts;
      hi[run.strategy] += static_cast<double>(d[2] + d[3]) / 5.0;
    }
    if (run.strategy == "random") {
      for (const auto& log : rounds) {
        for (const auto& [s, f] : log.metrics.acquisition_factor) factor_sum[s] += f;
        ++random_rounds;
      }
    }
  }
  const double base = hi["random"];
  out.detail << "H+I in final 2 rounds (seed mean): random " << fixed(base, 1) << ", mcme "
             << fixed(hi["mcme"], 1) << " (" << fixed(hi["mcme"] / base, 2) << "x), bald "
             << fixed(hi["bald"], 1) << " (" << fixed(hi["bald"] / base, 2) << "x); random factors";
  std::map<std::string, double> factor_mean;
  for (const auto& [s, total] : factor_sum) {
    factor_mean[s] = total / static_cast<double>(random_rounds);
    out.detail << " " << s << "=" << fixed(factor_mean[s]);
  }
  out.require(hi["mcme"] >= 1.5 * base, "mcme >= 1.5x random");
  out.require(hi["bald"] >= 1.5 * base, "bald >= 1.5x random");
  for (const auto& [s, mean] : factor_mean)
    out.require(mean >= 0.85 && mean <= 1.15, "random factor for " + s + " in [0.85, 1.15]");
}

// ---------------------------------------------------------------------------
// Criterion 6

void ablation_recovery(Outcome& out) {
  const auto& b = benchmark();
  ExperimentConfig c = b.config;
  c.strategies = {StrategyKind::Mcme};
  c.ablation = 0.25;
  const auto result = run_ablated_suite(c, b.data, b.reference, false);
  out.require(result.ablated.failures() == 0, "ablated runs complete");

  std::map<std::uint64_t, double> original;
  if (g_suite) {
    for (const auto& run : g_suite->runs)
      if (run.strategy == "mcme" && run.ok())
        original[run.seed] = run.result->test_accuracy.at(clean_test());
  } else {
    for (auto seed : c.seeds)
      original[seed] = run_al(c, b.data, StrategyKind::Mcme, seed).test_accuracy.at(clean_test());
  }
  int better = 0;
  out.detail << "seed: ablated vs original clean acc";
  for (const auto& run : result.ablated.runs) {
    if (!run.ok()) continue;
    const double a = run.result->test_accuracy.at(clean_test());
    const double o = original.at(run.seed);
    better += a > o;
    out.detail << " " << run.seed << ":" << fixed(a) << "/" << fixed(o);
  }
  out.detail << "; improved in " << better << "/5";
  out.require(better >= 4, "ablation improves mcme in >= 4 of 5 seeds");
}

// ---------------------------------------------------------------------------
// Criterion 7

void difficulty_splits(Outcome& out) {
  const auto& b = benchmark();
  ExperimentConfig c = b.config;
  c.difficulty_split = SplitConfig{{"EM", "EMH", "MH", "HI", "EMHI"}, 600};
  DifficultyCounts counts{};
  for (const auto& e : b.reference.datamap) ++counts[static_cast<std::size_t>(e.difficulty)];
  out.detail << "pool classes E/M/H/I " << counts[0] << "/" << counts[1] << "/" << counts[2] << "/"
             << counts[3] << ";";
  const auto result = run_difficulty_split(c, b.data, b.reference);
  std::map<std::uint64_t, std::map<std::string, double>> acc;
  for (const auto& run : result.runs) {
    out.require(run.error.empty(), run.combo + " seed " + std::to_string(run.seed) + ": " + run.error);
    if (run.error.empty()) acc[run.seed][run.combo] = run.test_accuracy.at(clean_test());
  }
  int worst_every_seed = 0;
  for (const auto& [seed, by_combo] : acc) {
    bool hi_lowest = by_combo.contains("HI");
    for (const auto& [combo, a] : by_combo)
      if (combo != "HI" && hi_lowest) hi_lowest = by_combo.at("HI") < a;
    worst_every_seed += hi_lowest;
  }
  for (const auto& s : result.summaries)
    if (s.test_set == clean_test()) out.detail << " " << s.strategy << "=" << fixed(s.mean);
  out.detail << "; HI lowest in " << worst_every_seed << "/5 seeds";
  out.require(worst_every_seed == 5, "HI lowest in every seed");
}

// ---------------------------------------------------------------------------
// Criterion 8

void stratified_consistency(Outcome& out) {
  const auto& b = benchmark();
  const SyntheticSourceSpec noisy_spec = blob("noisy_test", 900, kScale, 1.0, 0.3, 0.0, kShift, 5);
  const Dataset noisy = generate_synthetic_source(noisy_spec, 404);
  const ClassifierConfig ccfg = resolved_classifier(b.config, b.data);

  double worst = 0.0;
  std::size_t evaluated = 0;
  auto check_model = [&](const Classifier& model, const Dataset& test,
                         const std::vector<DatamapEntry>& map) {
    const auto s = stratified_accuracy(model, test, map);
    double weighted = 0.0;
    for (const auto& st : s.strata) weighted += st.accuracy * static_cast<double>(st.count);
    worst = std::max(worst, std::abs(weighted / static_cast<double>(s.total) - s.overall));
    worst = std::max(worst, std::abs(s.overall - model.accuracy(LabelledData::from(test))));
    ++evaluated;
  };

  double rate_sum = 0.0;
  std::vector<std::vector<DatamapEntry>> maps;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainConfig t = b.config.cartography_train;
    t.rng_seed = derive_seed(seed, hash_name("test-cartography"));
    const auto result = run_cartography(noisy, noisy, ccfg, t, b.config.thresholds,
                                        b.data.validation_data());
    const auto index = index_datamap(result.datamap);
    std::size_t hard = 0;
    for (const auto& [id, _] : noisy.flipped) {
      const auto d = index.at(id).difficulty;
      hard += d == Difficulty::Hard || d == Difficulty::Impossible;
    }
    rate_sum += static_cast<double>(hard) / static_cast<double>(noisy.flipped.size());
    check_model(result.model, noisy, result.datamap);
    maps.push_back(result.datamap);
  }
  const double rate = rate_sum / 5.0;

  // Every AL final model from the benchmark suite, stratified on the noisy test set.
  if (g_suite)
    for (const auto& run : g_suite->runs)
      if (run.ok() && run.result->final_model)
        for (const auto& map : maps) check_model(*run.result->final_model, noisy, map);

  out.detail << "flipped test ids in H+I: " << fixed(100.0 * rate, 1) << "% (5-seed mean); "
             << evaluated << " models, max recombination error " << worst;
  out.require(rate >= 0.6, "flipped rate >= 60%");
  out.require(worst <= 1e-12, "recombination error <= 1e-12");
}

// ---------------------------------------------------------------------------
// Criterion 9

void degenerate_inputs(Outcome& out) {
  const auto dir = testutil::temp_dir("acceptance_degenerate");
  int checks = 0;
  auto expect = [&](bool ok, const std::string& what) {
    ++checks;
    out.require(ok, what);
  };

  // Empty files load as empty datasets; training on them is an argument error.
  testutil::write_file(dir / "empty.jsonl", "");
  testutil::write_file(dir / "empty.csv", "");
  const Dataset ej = load_dataset(dir / "empty.jsonl", DatasetFormat::Jsonl);
  const Dataset ec = load_dataset(dir / "empty.csv", DatasetFormat::Csv);
  expect(ej.empty() && ec.empty(), "empty files give empty datasets");
  ClassifierConfig cfg;
  cfg.input_dim = 2;
  cfg.num_classes = 3;
  expect(throws<ArgumentError>([&] { fit(cfg, LabelledData::from(ej), {}, TrainConfig{}); }),
         "fit on empty data raises argument error");
  SyntheticSourceSpec zero = testutil::blob_spec("z", 0);
  expect(generate_synthetic_source(zero, 1).empty(), "n = 0 generates an empty dataset");
  zero.class_centroids.resize(1);
  expect(throws<ConfigError>([&] { generate_synthetic_source(zero, 1); }), "C < 2 is a config error");

  // k = |unlabelled| takes the whole pool for every strategy; k + 1 is an error.
  auto pool = std::make_shared<const Dataset>(
      generate_synthetic_source(testutil::blob_spec("p", 60), 5));
  const PoolState state = seed_split(pool, 20, 3);
  cfg.hidden_dims = {8};
  const Classifier model = fit(cfg, LabelledData::from(*pool, std::vector<ExampleId>(
                                                                  state.labelled().begin(),
                                                                  state.labelled().end())),
                               {}, TrainConfig{});
  for (auto s : {StrategyKind::Random, StrategyKind::Mcme, StrategyKind::Bald, StrategyKind::Dal}) {
    expect(select_batch(s, state, model, 40, 9) == state.unlabelled(),
           "k = |unlabelled| returns the pool for " + to_string(s));
    expect(throws<ArgumentError>([&] { select_batch(s, state, model, 41, 9); }),
           "k > |unlabelled| raises for " + to_string(s));
  }
  expect(seed_split(pool, 0, 1).labelled().empty(), "seed_size 0 gives a cold start");
  expect(seed_split(pool, 60, 1).unlabelled().empty(), "seed_size = |pool| empties the pool");

  // Fraction 0 ablation keeps everything and reproduces the plain suite.
  {
    ExperimentConfig c;
    c.sources = {source(blob("a", 200, 2.0, 1.0, 0.0), 1), source(blob("b", 200, 2.0, 1.0, 0.3), 2)};
    c.seed_size = 30;
    c.k = 30;
    c.rounds = 2;
    c.seeds = {1};
    c.strategies = {StrategyKind::Mcme};
    c.train.max_epochs = 5;
    c.cartography_train = c.train;
    c.ablation = 0.0;
    const auto data = prepare_data(c);
    const auto ref = build_reference(c, data);
    const auto ablated = run_ablated_suite(c, data, ref, true);
    expect(ablated.retained.size() == data.pool->size(), "fraction 0 retains the whole pool");
    const auto& a = *ablated.ablated.runs[0].result;
    const auto& o = *ablated.original->runs[0].result;
    bool same = a.test_accuracy == o.test_accuracy;
    for (std::size_t r = 0; r < a.rounds.size(); ++r) same &= a.rounds[r].acquired == o.rounds[r].acquired;
    expect(same, "fraction 0 ablation is identical to the plain suite");
  }

  // Dropout 0: every MC sample equals the deterministic prediction; BALD is 0.
  {
    ClassifierConfig c0 = cfg;
    c0.dropout_rate = 0.0;
    const Classifier m = Classifier::initialized(c0, 4);
    const Eigen::MatrixXd xs = feature_matrix(*pool);
    const auto det = m.predict_proba(xs);
    const auto mc = m.mc_predict_proba(xs, 4, 8);
    bool identical = true;
    for (const auto& s : mc) identical &= s == det;
    expect(identical, "dropout 0 MC samples equal predict_proba");
    std::vector<ExampleId> ids(static_cast<std::size_t>(xs.rows()));
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    bool zero_bald = true;
    for (const auto& s : score_bald(mc, ids)) zero_bald &= s.score == 0.0;
    expect(zero_bald, "dropout 0 BALD scores are 0");
    expect(throws<ArgumentError>([&] { score_bald({det}, ids); }), "BALD with T = 1 raises");
  }

  // Single-class training predicts that class everywhere.
  {
    Dataset one = generate_synthetic_source(testutil::blob_spec("one", 90), 6);
    for (auto& e : one.examples) e.label = 2;
    const auto train = LabelledData::from(one);
    const Classifier m = fit(cfg, train, {}, TrainConfig{});
    expect(m.accuracy(train) == 1.0, "single-class training reaches train accuracy 1");
    const auto preds = m.predict(Eigen::MatrixXd::Random(50, 2) * 10.0);
    expect(std::all_of(preds.begin(), preds.end(), [](int p) { return p == 2; }),
           "single-class model predicts that class everywhere");
  }
  out.detail << checks << " contract checks";
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  struct Criterion {
    int number;
    std::string name;
    std::function<void(Outcome&)> body;
  };
  const std::vector<Criterion> criteria{
      {1, "formula oracles", formula_oracles},
      {2, "gradient check", gradient_check},
      {3, "loop bookkeeping", loop_bookkeeping},
      {4, "end-to-end determinism", determinism},
      {5, "collective-outlier acquisition", collective_outliers},
      {6, "ablation recovery", ablation_recovery},
      {7, "difficulty-split ordering", difficulty_splits},
      {8, "stratified consistency", stratified_consistency},
      {9, "degenerate inputs", degenerate_inputs},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << c.number << " (" << c.name
              << ", " << fixed(secs, 1) << " s): " << out.detail.str() << std::endl;
  }
  return failed ? 1 : 0;
}
