#include "cartal/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "cartal/csv.hpp"
#include "cartal/error.hpp"
#include "cartal/experiment.hpp"

namespace cartal {

namespace {

namespace fs = std::filesystem;

csv::Table require(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing input file " + path.string());
  return csv::read(path);
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string pm(const std::vector<double>& values) {
  const auto [m, s] = mean_std(values);
  return fixed(m) + " ± " + fixed(s);
}

double to_double(const std::string& s) { return std::stod(s); }

// Insertion-ordered unique list.
void add_unique(std::vector<std::string>& v, const std::string& s) {
  for (const auto& x : v)
    if (x == s) return;
  v.push_back(s);
}

ReportTable learning_curve(const csv::Table& rounds) {
  const auto c_s = rounds.column("strategy"), c_r = rounds.column("round"),
             c_n = rounds.column("labelled_size"), c_v = rounds.column("val_acc");
  std::vector<std::string> strategies;
  std::map<std::size_t, std::size_t> sizes;
  std::map<std::pair<std::size_t, std::string>, std::vector<double>> acc;
  for (const auto& r : rounds.rows) {
    add_unique(strategies, r[c_s]);
    const auto round = static_cast<std::size_t>(std::stoul(r[c_r]));
    sizes[round] = std::stoul(r[c_n]);
    acc[{round, r[c_s]}].push_back(to_double(r[c_v]));
  }
  ReportTable t{"learning_curve", {"round", "labelled_size"}, {}};
  for (const auto& s : strategies) t.header.push_back(s);
  for (const auto& [round, size] : sizes) {
    std::vector<std::string> row{std::to_string(round), std::to_string(size)};
    for (const auto& s : strategies) {
      auto it = acc.find({round, s});
      row.push_back(it == acc.end() ? "" : pm(it->second));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

ReportTable acquisition_difficulty(const csv::Table& rounds) {
  ReportTable t{"acquisition_by_difficulty", {"strategy", "round"}, {}};
  static const char* cols[] = {"acquired_easy", "acquired_medium", "acquired_hard",
                               "acquired_impossible"};
  for (const char* c : cols) {
    if (!rounds.has_column(c)) return t;
    t.header.push_back(c);
  }
  const auto c_s = rounds.column("strategy"), c_r = rounds.column("round");
  std::vector<std::string> strategies;
  std::map<std::pair<std::string, std::size_t>, std::vector<std::vector<double>>> counts;
  for (const auto& r : rounds.rows) {
    if (r[rounds.column(cols[0])].empty()) continue;
    add_unique(strategies, r[c_s]);
    auto& slot = counts[{r[c_s], std::stoul(r[c_r])}];
    slot.resize(4);
    for (std::size_t d = 0; d < 4; ++d) slot[d].push_back(to_double(r[rounds.column(cols[d])]));
  }
  for (const auto& s : strategies)
    for (const auto& [key, slot] : counts) {
      if (key.first != s) continue;
      std::vector<std::string> row{s, std::to_string(key.second)};
      for (const auto& v : slot) row.push_back(pm(v));
      t.rows.push_back(std::move(row));
    }
  return t;
}

ReportTable profiling(const csv::Table& profile) {
  ReportTable t{"profiling", {"strategy", "input_diversity", "output_uncertainty"}, {}};
  std::vector<std::string> class_cols;
  for (const auto& h : profile.header)
    if (h.rfind("class_", 0) == 0) class_cols.push_back(h);
  for (const auto& c : class_cols) t.header.push_back(c);
  const auto c_s = profile.column("strategy");
  std::vector<std::string> strategies;
  for (const auto& r : profile.rows) add_unique(strategies, r[c_s]);
  for (const auto& s : strategies) {
    std::vector<double> div, unc;
    std::vector<std::vector<double>> cls(class_cols.size());
    for (const auto& r : profile.rows) {
      if (r[c_s] != s) continue;
      div.push_back(to_double(r[profile.column("input_diversity")]));
      const auto& u = r[profile.column("output_uncertainty")];
      if (!u.empty()) unc.push_back(to_double(u));
      for (std::size_t c = 0; c < class_cols.size(); ++c) {
        const auto& v = r[profile.column(class_cols[c])];
        if (!v.empty()) cls[c].push_back(to_double(v));
      }
    }
    std::vector<std::string> row{s, pm(div), unc.empty() ? "" : pm(unc)};
    for (const auto& v : cls) row.push_back(v.empty() ? "" : fixed(mean_std(v).first));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string summary_cell(const csv::Table& t, const std::vector<std::string>& row) {
  const auto& mean = row[t.column("mean")];
  if (mean.empty()) return "n/a";
  return fixed(to_double(mean)) + " ± " + fixed(to_double(row[t.column("std")]));
}

ReportTable paired(const csv::Table& ablated, const csv::Table& original) {
  ReportTable t{"ablated_vs_original", {"strategy", "test_set", "ablated | original"}, {}};
  std::map<std::pair<std::string, std::string>, std::string> orig;
  for (const auto& r : original.rows)
    orig[{r[original.column("strategy")], r[original.column("test_set")]}] =
        summary_cell(original, r);
  for (const auto& r : ablated.rows) {
    const auto key = std::make_pair(r[ablated.column("strategy")], r[ablated.column("test_set")]);
    auto it = orig.find(key);
    t.rows.push_back(
        {key.first, key.second,
         summary_cell(ablated, r) + " | " + (it == orig.end() ? "n/a" : it->second)});
  }
  return t;
}

ReportTable summary_table(const std::string& name, const csv::Table& summary,
                          const std::string& first_col) {
  ReportTable t{name, {first_col, "test_set", "accuracy", "completed", "failed"}, {}};
  for (const auto& r : summary.rows)
    t.rows.push_back({r[summary.column("strategy")], r[summary.column("test_set")],
                      summary_cell(summary, r), r[summary.column("completed")],
                      r[summary.column("failed")]});
  return t;
}

ReportTable stratified(const csv::Table& s) {
  ReportTable t{"stratified", {"strategy", "test_set", "difficulty", "count", "accuracy"}, {}};
  const auto c_s = s.column("strategy"), c_t = s.column("test_set"), c_d = s.column("difficulty"),
             c_n = s.column("count"), c_a = s.column("accuracy");
  std::vector<std::string> keys;
  std::map<std::string, std::vector<double>> acc;
  std::map<std::string, std::string> count;
  std::map<std::string, std::vector<std::string>> parts;
  for (const auto& r : s.rows) {
    const auto key = r[c_s] + "\x1f" + r[c_t] + "\x1f" + r[c_d];
    add_unique(keys, key);
    acc[key].push_back(to_double(r[c_a]));
    count[key] = r[c_n];
    parts[key] = {r[c_s], r[c_t], r[c_d]};
  }
  for (const auto& k : keys)
    t.rows.push_back({parts[k][0], parts[k][1], parts[k][2], count[k], pm(acc[k])});
  return t;
}

}  // namespace

ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "md") return ReportFormat::Md;
  throw ConfigError("unknown report format '" + s + "' (expected csv or md)");
}

std::vector<ReportTable> build_report(const fs::path& dir) {
  const auto rounds = require(dir / "rounds.csv");
  const auto summary = require(dir / "summary.csv");
  std::vector<ReportTable> out;
  out.push_back(learning_curve(rounds));
  out.push_back(summary_table("test_accuracy", summary, "strategy"));
  if (fs::exists(dir / "profile.csv")) out.push_back(profiling(csv::read(dir / "profile.csv")));
  if (auto t = acquisition_difficulty(rounds); !t.rows.empty()) out.push_back(std::move(t));
  if (fs::exists(dir / "summary_ablated.csv"))
    out.push_back(paired(csv::read(dir / "summary_ablated.csv"), summary));
  if (fs::exists(dir / "stratified.csv")) out.push_back(stratified(csv::read(dir / "stratified.csv")));
  if (fs::exists(dir / "splits_summary.csv"))
    out.push_back(summary_table("difficulty_splits", csv::read(dir / "splits_summary.csv"), "combo"));
  return out;
}

std::string render_markdown(const ReportTable& table) {
  auto line = [](const std::vector<std::string>& cells) {
    std::string s = "|";
    for (const auto& c : cells) {
      s += ' ';
      for (char ch : c) {
        if (ch == '|') s += '\\';
        s += ch;
      }
      s += " |";
    }
    return s + "\n";
  };
  std::string out = line(table.header);
  out += "|";
  for (std::size_t i = 0; i < table.header.size(); ++i) out += " --- |";
  out += "\n";
  for (const auto& r : table.rows) out += line(r);
  return out;
}

std::vector<fs::path> write_report(const fs::path& dir, ReportFormat format) {
  const auto tables = build_report(dir);
  std::vector<fs::path> written;
  if (format == ReportFormat::Md) {
    const auto path = dir / "report.md";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& t : tables) out << "## " << t.name << "\n\n" << render_markdown(t) << "\n";
    written.push_back(path);
  } else {
    for (const auto& t : tables) {
      const auto path = dir / ("report_" + t.name + ".csv");
      csv::write({t.header, t.rows}, path);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace cartal
