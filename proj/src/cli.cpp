#include "cartal/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cartal/config.hpp"
#include "cartal/csv.hpp"
#include "cartal/error.hpp"
#include "cartal/experiment.hpp"
#include "cartal/report.hpp"

namespace cartal::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string config;
  std::string out;
  std::string exp;
  std::string format = "md";
  std::string strategies;
  std::string seeds;
  std::size_t parallel = 0;
  double fraction = -1.0;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  for (char c : s) {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (c != ' ') {
      item.push_back(c);
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

ExperimentConfig load_with_overrides(const Options& o) {
  ExperimentConfig c = load_config(o.config);
  if (!o.strategies.empty()) {
    c.strategies.clear();
    for (const auto& s : split_list(o.strategies)) c.strategies.push_back(parse_strategy(s));
  }
  if (!o.seeds.empty()) {
    c.seeds.clear();
    for (const auto& s : split_list(o.seeds)) {
      try {
        c.seeds.push_back(std::stoull(s));
      } catch (const std::exception&) {
        throw ConfigError("invalid seed '" + s + "'");
      }
    }
  }
  if (o.parallel > 0) c.parallel = o.parallel;
  if (o.fraction >= 0.0) c.ablation = o.fraction;
  c.validate();
  return c;
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + out);
  return dir;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw IoError("write failed for " + path.string());
}

void write_manifest(const fs::path& dir, const std::string& command) {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  write_json({{"command", command},
              {"final_evaluation", "refit on the final labelled set after the last transfer"},
              {"created_unix", std::chrono::duration_cast<std::chrono::seconds>(now).count()}},
             dir / "manifest.json");
}

void write_suite(const SuiteResult& suite, const PreparedData& data, const fs::path& dir,
                 const std::string& suffix) {
  write_rounds_csv(suite, data, dir / ("rounds" + suffix + ".csv"));
  write_acquisitions_csv(suite, data, dir / ("acquisitions" + suffix + ".csv"));
  write_runs_csv(suite, data, dir / ("runs" + suffix + ".csv"));
  write_summary_csv(suite.summaries, dir / ("summary" + suffix + ".csv"));
  write_profile_csv(suite, data, dir / ("profile" + suffix + ".csv"));
}

int cmd_generate(const Options& o) {
  const ExperimentConfig c = load_config(o.config);
  const fs::path dir = prepare_out(o.out);
  json manifest = {{"sources", json::array()}, {"test_sets", json::array()}};
  auto entry = [](const Dataset& ds, const std::string& file) {
    const auto flipped = ds.flipped_ids();
    return json{{"name", ds.name}, {"file", file}, {"n", ds.size()},
                {"flipped_ids", std::vector<ExampleId>(flipped.begin(), flipped.end())}};
  };
  for (const auto& s : c.sources) {
    if (!s.synthetic) continue;
    const Dataset ds = materialize_source(s);
    const std::string file = ds.name + ".jsonl";
    write_jsonl(ds, dir / file);
    json e = entry(ds, file);
    e["seed"] = s.seed;
    manifest["sources"].push_back(std::move(e));
  }
  for (const auto& t : c.test_sets) {
    std::vector<Dataset> parts;
    for (const auto& s : t.sources) parts.push_back(materialize_source(s));
    const Dataset ds = concatenate(t.name, parts);
    const std::string file = "test_" + t.name + ".jsonl";
    write_jsonl(ds, dir / file);
    manifest["test_sets"].push_back(entry(ds, file));
  }
  write_json(manifest, dir / "manifest.json");
  std::cout << "wrote " << manifest["sources"].size() << " source file(s) to " << dir.string()
            << "\n";
  return kExitOk;
}

int cmd_run(const Options& o, bool force_stratify, const std::string& command) {
  ExperimentConfig c = load_with_overrides(o);
  if (force_stratify) c.stratify = true;
  const fs::path dir = prepare_out(o.out);
  write_json(to_json(c), dir / "config.resolved.json");
  write_manifest(dir, command);

  const PreparedData data = prepare_data(c);
  std::optional<Reference> ref;
  if (c.cartography) {
    ref = build_reference(c, data);
    write_datamap_csv(ref->datamap, data.pool->source_map(), dir / "datamap.csv");
  }
  std::optional<std::vector<std::vector<DatamapEntry>>> test_maps;
  if (c.stratify) test_maps = build_test_datamaps(c, data);

  RunContext ctx{ref ? &*ref : nullptr, test_maps ? &*test_maps : nullptr};
  const SuiteResult suite = run_suite(c, data, ctx);
  write_suite(suite, data, dir, "");
  if (c.stratify) write_stratified_csv(suite, data, dir / "stratified.csv");
  std::cout << suite.runs.size() - suite.failures() << "/" << suite.runs.size()
            << " runs completed\n";
  return suite.failures() ? kExitPartial : kExitOk;
}

int cmd_ablate(const Options& o) {
  ExperimentConfig c = load_with_overrides(o);
  if (!c.ablation) c.ablation = 0.25;
  const fs::path dir = prepare_out(o.out);
  write_json(to_json(c), dir / "config.resolved.json");
  write_manifest(dir, "ablate");

  const PreparedData data = prepare_data(c);
  const Reference ref = build_reference(c, data);
  write_datamap_csv(ref.datamap, data.pool->source_map(), dir / "datamap.csv");
  const bool with_original = !fs::exists(dir / "summary.csv");
  const RunContext ctx{&ref, nullptr};
  const AblationResult result = run_ablated_suite(c, data, ref, with_original, ctx);
  write_suite(result.ablated, data, dir, "_ablated");
  std::size_t failures = result.ablated.failures();
  if (result.original) {
    write_suite(*result.original, data, dir, "");
    failures += result.original->failures();
  }
  std::cout << "ablation retained " << result.retained.size() << " of " << data.pool->size()
            << " pool examples\n";
  return failures ? kExitPartial : kExitOk;
}

int cmd_splits(const Options& o) {
  ExperimentConfig c = load_with_overrides(o);
  if (!c.difficulty_split) c.difficulty_split = SplitConfig{};
  const fs::path dir = prepare_out(o.out);
  write_json(to_json(c), dir / "config.resolved.json");
  write_manifest(dir, "splits");

  const PreparedData data = prepare_data(c);
  const Reference ref = build_reference(c, data);
  write_datamap_csv(ref.datamap, data.pool->source_map(), dir / "datamap.csv");
  const SplitResult result = run_difficulty_split(c, data, ref);
  write_splits_csv(result, data, dir / "splits.csv");
  write_summary_csv(result.summaries, dir / "splits_summary.csv");
  std::size_t failed = 0;
  for (const auto& r : result.runs) failed += !r.error.empty();
  return failed ? kExitPartial : kExitOk;
}

int cmd_report(const Options& o) {
  const auto written = write_report(o.exp, parse_report_format(o.format));
  for (const auto& p : written) std::cout << p.string() << "\n";
  return kExitOk;
}

}  // namespace

void configure_logging() {
  static bool done = false;
  if (!done) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("cartal"));
    done = true;
  }
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("CARTAL_LOG")) {
    const std::string v = env;
    if (v == "error") level = spdlog::level::err;
    else if (v == "warn") level = spdlog::level::warn;
    else if (v == "info") level = spdlog::level::info;
    else if (v == "debug") level = spdlog::level::debug;
  }
  spdlog::set_level(level);
}

int run(const std::vector<std::string>& args) {
  configure_logging();
  CLI::App app{"cartal: active-learning simulator and dataset-cartography diagnostics"};
  app.require_subcommand(1, 1);
  Options o;

  auto* gen = app.add_subcommand("generate", "write synthetic sources as JSONL plus a manifest");
  gen->add_option("--config", o.config, "experiment config (JSON)")->required();
  gen->add_option("--out", o.out, "output directory")->required();

  auto add_suite_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "experiment config (JSON)")->required();
    cmd->add_option("--out", o.out, "experiment directory")->required();
    cmd->add_option("--strategies", o.strategies, "comma-separated: random,mcme,bald,dal");
    cmd->add_option("--seeds", o.seeds, "comma-separated seeds");
    cmd->add_option("--parallel", o.parallel, "concurrent runs");
  };
  auto* run_cmd = app.add_subcommand("run", "run the AL suite (strategies x seeds)");
  add_suite_flags(run_cmd);
  auto* ablate = app.add_subcommand("ablate", "run the suite on a pool without hard-to-learn examples");
  add_suite_flags(ablate);
  ablate->add_option("--fraction", o.fraction, "per-source fraction to drop (default 0.25)");
  auto* splits = app.add_subcommand("splits", "train on difficulty-stratified training sets");
  add_suite_flags(splits);
  auto* stratify = app.add_subcommand("stratify", "run the suite with difficulty-stratified testing");
  add_suite_flags(stratify);
  auto* report = app.add_subcommand("report", "render tables from an experiment directory");
  report->add_option("--exp", o.exp, "experiment directory")->required();
  report->add_option("--format", o.format, "csv or md")->check(CLI::IsMember({"csv", "md"}));

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(o);
    if (*run_cmd) return cmd_run(o, false, "run");
    if (*ablate) return cmd_ablate(o);
    if (*splits) return cmd_splits(o);
    if (*stratify) return cmd_run(o, true, "stratify");
    if (*report) return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace cartal::cli
