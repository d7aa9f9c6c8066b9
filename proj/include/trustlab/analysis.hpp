#pragma once

// Analysis tables over exported sessions: reliance per condition and trust
// window, trust-binned curves with correlations, bootstrap comparisons
// against a baseline condition, per-user aggregation, and plot data files.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trustlab/metrics.hpp"

namespace trustlab {

struct AnalysisOptions {
  std::optional<std::string> baseline;  // default: a NoIntervention condition, else the first
  std::size_t n_resamples = 10'000;
  std::uint64_t seed = 0;
  std::size_t min_per_user = 3;
  int low_threshold = 5;
  int high_threshold = 8;
  bool include_rejected = false;  // sessions that failed the quality gate
  std::optional<std::string> group_by;
  unsigned threads = 1;
};

struct RelianceRow {
  std::string condition;
  std::string window;  // all | low | high
  std::size_t n_users = 0;
  RelianceReport report;
};

struct BootstrapRow {
  std::string condition;
  std::string baseline;
  std::string window;
  std::string metric;
  BootstrapResult result;
};

struct MacroRow {
  std::string condition;
  std::string metric;
  std::size_t n_users = 0;
  std::optional<double> mean;
};

struct AnalysisResult {
  std::vector<std::string> conditions;
  std::string baseline;
  std::vector<RelianceRow> reliance;
  std::map<std::string, TrustBinnedReport> trust_binned;  // by condition
  std::vector<BootstrapRow> bootstrap;
  std::vector<MacroRow> macro;
  std::map<std::string, RelianceReport> groups;
  std::size_t excluded_sessions = 0;
};

namespace detail {

inline std::size_t distinct_users(const std::vector<AnalysisItem>& items) {
  std::set<std::string> u;
  for (const auto& it : items) u.insert(it.user_id);
  return u.size();
}

}  // namespace detail

inline AnalysisResult analyze_sessions(const std::vector<Session>& input, const AnalysisOptions& opt = {}) {
  AnalysisResult out;
  std::map<std::string, std::vector<Session>> by_condition;
  for (const auto& s : input) {
    const auto q = s.user_attributes.find("quality_gate");
    if (!opt.include_rejected && q != s.user_attributes.end() && q->second == "rejected") {
      ++out.excluded_sessions;
      continue;
    }
    if (!by_condition.count(s.condition_id)) out.conditions.push_back(s.condition_id);
    by_condition[s.condition_id].push_back(s);
  }
  if (out.conditions.empty()) throw DataError("analyze: no sessions");

  if (opt.baseline) {
    if (!by_condition.count(*opt.baseline)) throw ConfigError("analyze: baseline condition '" + *opt.baseline + "' not in logs");
    out.baseline = *opt.baseline;
  } else {
    out.baseline = out.conditions.front();
    for (const auto& c : out.conditions)
      if (c.find("NoIntervention") != std::string::npos || c == "none") out.baseline = c;
  }

  const std::vector<std::pair<std::string, TrustWindow>> windows = {
      {"all", {}}, {"low", low_trust_window(opt.low_threshold)}, {"high", high_trust_window(opt.high_threshold)}};

  for (const auto& c : out.conditions) {
    const auto& sessions = by_condition[c];
    for (const auto& [wname, w] : windows) {
      const auto items = filter_analysis_set(sessions, w);
      out.reliance.push_back({c, wname, detail::distinct_users(items), reliance_report(items)});
    }
    out.trust_binned[c] = trust_binned(filter_analysis_set(sessions));
    const auto macro = macro_aggregate(sessions, opt.min_per_user);
    for (const auto& m : kMetricNames) out.macro.push_back({c, m, macro.n_users.at(m), macro.mean.at(m)});
  }

  BootstrapOptions bo;
  bo.n_resamples = opt.n_resamples;
  bo.seed = opt.seed;
  bo.threads = opt.threads;
  for (const auto& c : out.conditions) {
    if (c == out.baseline) continue;
    for (const auto& [wname, w] : windows) {
      const auto a = user_clusters(filter_analysis_set(by_condition[c], w));
      const auto b = user_clusters(filter_analysis_set(by_condition[out.baseline], w));
      for (const auto& m : kMetricNames) {
        BootstrapRow row{c, out.baseline, wname, m, {}};
        if (a.empty() || b.empty()) continue;
        try {
          row.result = clustered_bootstrap(a, b, metric_by_name(m), bo);
        } catch (const DataError&) {
          continue;  // metric undefined for one side in this window
        }
        out.bootstrap.push_back(std::move(row));
      }
    }
  }

  if (opt.group_by) {
    std::vector<Session> kept;
    for (const auto& [_, ss] : by_condition) kept.insert(kept.end(), ss.begin(), ss.end());
    out.groups = group_compare(kept, user_attribute(*opt.group_by));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Writers

namespace detail {

inline std::string num(std::optional<double> v) {
  if (!v) return "";
  std::ostringstream ss;
  ss << std::setprecision(6) << *v;
  return ss.str();
}

inline std::string metric_cells(const RelianceReport& r) {
  std::string s;
  for (const auto& m : kMetricNames) s += "," + num(r.get(m));
  return s;
}

inline std::string metric_header() {
  std::string s;
  for (const auto& m : kMetricNames) s += "," + m;
  return s;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw DataError("cannot write " + p.string());
  return f;
}

inline std::string file_safe(std::string s) {
  for (auto& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  return s;
}

}  // namespace detail

inline Json to_json_report(const AnalysisResult& r) {
  Json j{{"baseline", r.baseline}, {"conditions", r.conditions}, {"excluded_sessions", r.excluded_sessions}};
  for (const auto& row : r.reliance) {
    Json cell = row.report;
    cell["n_users"] = row.n_users;
    j["reliance"][row.condition][row.window] = cell;
  }
  for (const auto& [c, tb] : r.trust_binned) {
    Json bins = Json::array();
    for (const auto& b : tb.bins) {
      Json cell = b.report;
      cell["trust"] = b.trust;
      bins.push_back(cell);
    }
    j["trust_binned"][c]["bins"] = bins;
    for (const auto& [m, v] : tb.correlation) j["trust_binned"][c]["correlation"][m] = v ? Json(*v) : Json(nullptr);
  }
  j["bootstrap"] = Json::array();
  for (const auto& b : r.bootstrap)
    j["bootstrap"].push_back({{"condition", b.condition},
                              {"baseline", b.baseline},
                              {"window", b.window},
                              {"metric", b.metric},
                              {"value", b.result.observed_a},
                              {"baseline_value", b.result.observed_b},
                              {"diff", b.result.observed_diff},
                              {"p_value", b.result.p_value},
                              {"n_resamples", b.result.n_resamples}});
  for (const auto& m : r.macro) j["macro"][m.condition][m.metric] = {{"n_users", m.n_users}, {"mean", m.mean ? Json(*m.mean) : Json(nullptr)}};
  for (const auto& [g, rep] : r.groups) j["groups"][g] = rep;
  return j;
}

/// CSV + JSON tables, per-condition plot data, and a gnuplot script.
inline void write_analysis(const AnalysisResult& r, const std::filesystem::path& dir) {
  using namespace detail;
  std::filesystem::create_directories(dir / "plots");
  {
    auto f = open_out(dir / "reliance.csv");
    f << "condition,window,n_users,n_interactions" << metric_header() << "\n";
    for (const auto& row : r.reliance)
      f << row.condition << "," << row.window << "," << row.n_users << "," << row.report.n_interactions
        << metric_cells(row.report) << "\n";
  }
  {
    auto f = open_out(dir / "trust_binned.csv");
    f << "condition,trust,n_interactions" << metric_header() << "\n";
    for (const auto& [c, tb] : r.trust_binned)
      for (const auto& b : tb.bins) f << c << "," << b.trust << "," << b.report.n_interactions << metric_cells(b.report) << "\n";
  }
  {
    auto f = open_out(dir / "correlations.csv");
    f << "condition,metric,weighted_pearson_r\n";
    for (const auto& [c, tb] : r.trust_binned)
      for (const auto& m : kMetricNames) f << c << "," << m << "," << num(tb.correlation.at(m)) << "\n";
  }
  {
    auto f = open_out(dir / "bootstrap.csv");
    f << "condition,baseline,window,metric,value,baseline_value,diff,p_value,n_resamples\n";
    for (const auto& b : r.bootstrap)
      f << b.condition << "," << b.baseline << "," << b.window << "," << b.metric << "," << num(b.result.observed_a) << ","
        << num(b.result.observed_b) << "," << num(b.result.observed_diff) << "," << num(b.result.p_value) << ","
        << b.result.n_resamples << "\n";
  }
  {
    auto f = open_out(dir / "macro.csv");
    f << "condition,metric,n_users,mean\n";
    for (const auto& m : r.macro) f << m.condition << "," << m.metric << "," << m.n_users << "," << num(m.mean) << "\n";
  }
  if (!r.groups.empty()) {
    auto f = open_out(dir / "groups.csv");
    f << "group,n_interactions" << metric_header() << "\n";
    for (const auto& [g, rep] : r.groups) f << g << "," << rep.n_interactions << metric_cells(rep) << "\n";
  }
  open_out(dir / "analysis.json") << to_json_report(r).dump(2) << "\n";

  // Plot data: one file per condition with metric-vs-trust columns, and one
  // per window with a row per condition.
  for (const auto& [c, tb] : r.trust_binned) {
    auto f = open_out(dir / "plots" / ("trust_" + file_safe(c) + ".dat"));
    f << "# trust n switch_rate under_reliance over_reliance total_inappropriate final_accuracy\n";
    for (const auto& b : tb.bins) {
      f << b.trust << " " << b.report.n_interactions;
      for (const auto& m : kMetricNames) {
        const auto v = b.report.get(m);
        f << " " << (v ? num(v) : "NaN");
      }
      f << "\n";
    }
  }
  for (const char* w : {"all", "low", "high"}) {
    auto f = open_out(dir / "plots" / (std::string("reliance_") + w + ".dat"));
    f << "# condition switch_rate under_reliance over_reliance total_inappropriate final_accuracy\n";
    for (const auto& row : r.reliance) {
      if (row.window != w) continue;
      f << '"' << row.condition << '"';
      for (const auto& m : kMetricNames) {
        const auto v = row.report.get(m);
        f << " " << (v ? num(v) : "NaN");
      }
      f << "\n";
    }
  }
  auto gp = open_out(dir / "plots" / "plot.gp");
  gp << "set terminal pngcairo size 900,600\n"
        "set datafile missing 'NaN'\n"
        "set xlabel 'Trust level'\nset xrange [-0.5:10.5]\nset yrange [0:1]\n"
        "set output 'switch_vs_trust.png'\nset ylabel 'Switch rate'\nplot \\\n";
  for (std::size_t i = 0; i < r.conditions.size(); ++i)
    gp << "  'trust_" << file_safe(r.conditions[i]) << ".dat' using 1:3 with linespoints title '" << r.conditions[i] << "'"
       << (i + 1 < r.conditions.size() ? ", \\\n" : "\n");
  gp << "set output 'reliance_vs_trust.png'\nset ylabel 'Rate'\nplot \\\n";
  for (std::size_t i = 0; i < r.conditions.size(); ++i) {
    const auto f = file_safe(r.conditions[i]);
    gp << "  'trust_" << f << ".dat' using 1:4 with linespoints title '" << r.conditions[i] << " under', \\\n"
       << "  'trust_" << f << ".dat' using 1:5 with linespoints title '" << r.conditions[i] << " over'"
       << (i + 1 < r.conditions.size() ? ", \\\n" : "\n");
  }
  gp << "set style data histograms\nset style fill solid 0.8\nset xrange [*:*]\nunset xlabel\n";
  for (const char* w : {"all", "low", "high"})
    gp << "set output 'reliance_" << w << ".png'\nplot 'reliance_" << w
       << ".dat' using 3:xtic(1) title 'under', '' using 4 title 'over', '' using 5 title 'total'\n";
}

}  // namespace trustlab
