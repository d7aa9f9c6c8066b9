#pragma once

// Reliance metrics over disagreement interactions, trust-binned
// aggregation, weighted correlation, clustered bootstrap tests, and the
// per-user (macro) and per-group aggregations.
//
// Undefined fractions (empty denominators) are std::nullopt, never 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "trustlab/core.hpp"
#include "trustlab/error.hpp"
#include "trustlab/rng.hpp"
#include "trustlab/serialization.hpp"

namespace trustlab {

using TrustWindow = std::function<bool(TrustLevel)>;

/// Trust windows matching the default intervention thresholds.
inline TrustWindow low_trust_window(int low_threshold = 5) {
  return [low_threshold](TrustLevel t) { return t.value < low_threshold; };
}
inline TrustWindow high_trust_window(int high_threshold = 8) {
  return [high_threshold](TrustLevel t) { return t.value > high_threshold; };
}

struct AnalysisItem {
  Interaction interaction;
  TrustLevel prior_trust;  // reported at the end of the previous round
  std::string user_id;
  std::string session_id;
};

/// Keeps rounds with a defined prior trust (drops each session's first
/// round) where the initial decision differs from the AI prediction,
/// optionally restricted to a prior-trust window.
inline std::vector<AnalysisItem> filter_analysis_set(const std::vector<Session>& sessions,
                                                     const TrustWindow& window = {}) {
  std::vector<AnalysisItem> out;
  for (const auto& s : sessions) {
    for (std::size_t i = 1; i < s.interactions.size(); ++i) {
      const auto& it = s.interactions[i];
      const auto prior = s.interactions[i - 1].trust_report;
      if (!it.disagreed()) continue;
      if (window && !window(prior)) continue;
      out.push_back({it, prior, s.user_id, s.session_id});
    }
  }
  return out;
}

/// Sufficient statistics for every reliance metric.
struct RelianceCounts {
  std::size_t n = 0;
  std::size_t switched = 0;
  std::size_t ai_correct = 0;
  std::size_t ai_correct_kept = 0;  // AI correct, user did not switch
  std::size_t ai_incorrect = 0;
  std::size_t ai_incorrect_switched = 0;
  std::size_t final_correct = 0;

  void add(const Interaction& it) {
    ++n;
    const bool sw = it.switched_to_ai();
    switched += sw ? 1 : 0;
    if (it.ai_correct()) {
      ++ai_correct;
      ai_correct_kept += sw ? 0 : 1;
    } else {
      ++ai_incorrect;
      ai_incorrect_switched += sw ? 1 : 0;
    }
    final_correct += it.final_correct() ? 1 : 0;
  }

  RelianceCounts& operator+=(const RelianceCounts& o) {
    n += o.n;
    switched += o.switched;
    ai_correct += o.ai_correct;
    ai_correct_kept += o.ai_correct_kept;
    ai_incorrect += o.ai_incorrect;
    ai_incorrect_switched += o.ai_incorrect_switched;
    final_correct += o.final_correct;
    return *this;
  }

  auto tie() const {
    return std::tie(n, switched, ai_correct, ai_correct_kept, ai_incorrect, ai_incorrect_switched, final_correct);
  }
  friend bool operator==(const RelianceCounts& a, const RelianceCounts& b) { return a.tie() == b.tie(); }
  friend bool operator<(const RelianceCounts& a, const RelianceCounts& b) { return a.tie() < b.tie(); }
};

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

namespace metric {

inline std::optional<double> switch_rate(const RelianceCounts& c) { return ratio(c.switched, c.n); }
inline std::optional<double> under_reliance(const RelianceCounts& c) { return ratio(c.ai_correct_kept, c.ai_correct); }
inline std::optional<double> over_reliance(const RelianceCounts& c) {
  return ratio(c.ai_incorrect_switched, c.ai_incorrect);
}
inline std::optional<double> total_inappropriate(const RelianceCounts& c) {
  const auto u = under_reliance(c);
  const auto o = over_reliance(c);
  if (!u || !o) return std::nullopt;
  return *u + *o;
}
inline std::optional<double> final_accuracy(const RelianceCounts& c) { return ratio(c.final_correct, c.n); }

}  // namespace metric

using MetricSelector = std::function<std::optional<double>(const RelianceCounts&)>;

/// Looks up a metric by its report name ("switch_rate", "under_reliance", ...).
inline MetricSelector metric_by_name(const std::string& name) {
  if (name == "switch_rate") return metric::switch_rate;
  if (name == "under_reliance") return metric::under_reliance;
  if (name == "over_reliance") return metric::over_reliance;
  if (name == "total_inappropriate") return metric::total_inappropriate;
  if (name == "final_accuracy") return metric::final_accuracy;
  throw ConfigError("unknown metric '" + name + "'");
}

inline const std::array<std::string, 5> kMetricNames = {"switch_rate", "under_reliance", "over_reliance",
                                                        "total_inappropriate", "final_accuracy"};

struct RelianceReport {
  RelianceCounts counts;
  std::size_t n_interactions = 0;
  std::optional<double> switch_rate;
  std::optional<double> under_reliance;
  std::optional<double> over_reliance;
  std::optional<double> total_inappropriate;
  std::optional<double> final_accuracy;

  std::optional<double> get(const std::string& name) const { return metric_by_name(name)(counts); }
};

inline RelianceReport make_report(const RelianceCounts& c) {
  return {c,
          c.n,
          metric::switch_rate(c),
          metric::under_reliance(c),
          metric::over_reliance(c),
          metric::total_inappropriate(c),
          metric::final_accuracy(c)};
}

inline RelianceCounts count_items(const std::vector<AnalysisItem>& items) {
  RelianceCounts c;
  for (const auto& it : items) c.add(it.interaction);
  return c;
}

inline RelianceReport reliance_report(const std::vector<AnalysisItem>& items) {
  return make_report(count_items(items));
}

inline void to_json(Json& j, const RelianceReport& r) {
  j = Json{{"n_interactions", r.n_interactions}};
  detail::put_optional(j, "switch_rate", r.switch_rate);
  detail::put_optional(j, "under_reliance", r.under_reliance);
  detail::put_optional(j, "over_reliance", r.over_reliance);
  detail::put_optional(j, "total_inappropriate", r.total_inappropriate);
  detail::put_optional(j, "final_accuracy", r.final_accuracy);
}

// ---------------------------------------------------------------------------
// Weighted Pearson correlation

/// Undefined with fewer than two points, non-positive total weight, or zero
/// variance on either side.
inline std::optional<double> weighted_pearson(const std::vector<double>& x, const std::vector<double>& y,
                                              const std::vector<double>& w) {
  if (x.size() != y.size() || x.size() != w.size()) throw DataError("weighted_pearson: length mismatch");
  if (x.size() < 2) return std::nullopt;
  double sw = 0, mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    mx += w[i] * x[i];
    my += w[i] * y[i];
  }
  if (!(sw > 0)) return std::nullopt;
  mx /= sw;
  my /= sw;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += w[i] * dx * dy;
    sxx += w[i] * dx * dx;
    syy += w[i] * dy * dy;
  }
  constexpr double kTiny = 1e-15;
  if (sxx <= kTiny * sw || syy <= kTiny * sw) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct TrustBin {
  int trust = 0;
  RelianceReport report;
};

struct TrustBinnedReport {
  std::array<TrustBin, kMaxTrust + 1> bins{};
  std::size_t total = 0;
  // weighted Pearson r of each metric against trust level, keyed by metric name
  std::map<std::string, std::optional<double>> correlation;
};

/// Denominator of a metric: the interactions the fraction is taken over.
inline std::size_t metric_weight(const std::string& name, const RelianceCounts& c) {
  if (name == "under_reliance") return c.ai_correct;
  if (name == "over_reliance") return c.ai_incorrect;
  if (name == "total_inappropriate") return std::min(c.ai_correct, c.ai_incorrect) > 0 ? c.n : 0;
  return c.n;
}

/// Bins items by prior trust (0..10) and correlates each metric with the
/// trust level across non-empty bins, weighting each bin by the number of
/// interactions the metric is computed over.
inline TrustBinnedReport trust_binned(const std::vector<AnalysisItem>& items) {
  TrustBinnedReport rep;
  std::array<RelianceCounts, kMaxTrust + 1> counts{};
  for (const auto& it : items) {
    if (!it.prior_trust.in_range()) throw DataError("trust_binned: prior trust outside 0..10");
    counts[static_cast<std::size_t>(it.prior_trust.value)].add(it.interaction);
  }
  for (int t = kMinTrust; t <= kMaxTrust; ++t) {
    rep.bins[static_cast<std::size_t>(t)] = {t, make_report(counts[static_cast<std::size_t>(t)])};
    rep.total += counts[static_cast<std::size_t>(t)].n;
  }
  for (const auto& name : kMetricNames) {
    std::vector<double> xs, ys, ws;
    const auto sel = metric_by_name(name);
    for (const auto& bin : rep.bins) {
      const auto v = sel(bin.report.counts);
      const auto w = metric_weight(name, bin.report.counts);
      if (!v || w == 0) continue;
      xs.push_back(bin.trust);
      ys.push_back(*v);
      ws.push_back(static_cast<double>(w));
    }
    rep.correlation[name] = weighted_pearson(xs, ys, ws);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Clustered bootstrap

enum class Alternative { TwoSided, Less, Greater };  // Less: metric(A) < metric(B)

struct BootstrapOptions {
  std::size_t n_resamples = 10'000;
  std::uint64_t seed = 0;
  Alternative alternative = Alternative::TwoSided;
  std::size_t max_redraws_per_resample = 100;
  unsigned threads = 1;
};

struct BootstrapResult {
  double p_value = 1.0;
  double observed_a = 0.0;
  double observed_b = 0.0;
  double observed_diff = 0.0;  // a - b
  std::size_t n_resamples = 0;
  std::size_t redraws = 0;     // resamples redrawn because the metric was undefined
};

inline void to_json(Json& j, const BootstrapResult& r) {
  j = Json{{"p_value", r.p_value},         {"observed_a", r.observed_a}, {"observed_b", r.observed_b},
           {"observed_diff", r.observed_diff}, {"n_resamples", r.n_resamples}, {"redraws", r.redraws}};
}

/// Per-user sufficient statistics (the resampling clusters), in a canonical
/// order that does not depend on user ids or interaction order.
inline std::vector<RelianceCounts> user_clusters(const std::vector<AnalysisItem>& items) {
  std::map<std::string, RelianceCounts> by_user;
  for (const auto& it : items) by_user[it.user_id].add(it.interaction);
  std::vector<RelianceCounts> out;
  out.reserve(by_user.size());
  for (const auto& [_, c] : by_user) out.push_back(c);
  std::sort(out.begin(), out.end());
  return out;
}

/// Two-group clustered bootstrap over precomputed user clusters. Each group
/// is resampled with replacement at the user level; resample b uses its own
/// RNG stream, so the result is independent of the thread count.
inline BootstrapResult clustered_bootstrap(std::vector<RelianceCounts> group_a, std::vector<RelianceCounts> group_b,
                                           const MetricSelector& metric, const BootstrapOptions& opt = {}) {
  if (group_a.empty() || group_b.empty()) throw DataError("clustered_bootstrap: empty group");
  if (opt.n_resamples == 0) throw ConfigError("clustered_bootstrap: n_resamples must be positive");
  std::sort(group_a.begin(), group_a.end());
  std::sort(group_b.begin(), group_b.end());

  auto total = [](const std::vector<RelianceCounts>& g) {
    RelianceCounts c;
    for (const auto& u : g) c += u;
    return c;
  };
  const auto obs_a = metric(total(group_a));
  const auto obs_b = metric(total(group_b));
  if (!obs_a || !obs_b) throw DataError("clustered_bootstrap: metric undefined on observed data");

  std::vector<double> diffs(opt.n_resamples);
  std::vector<std::size_t> redraws(opt.n_resamples, 0);
  const CounterRng root(opt.seed);

  auto resample_group = [](const std::vector<RelianceCounts>& g, CounterRng& rng) {
    RelianceCounts c;
    for (std::size_t i = 0; i < g.size(); ++i) c += g[rng.uniform_index(g.size())];
    return c;
  };
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      CounterRng rng = root.split(b);
      for (std::size_t attempt = 0;; ++attempt) {
        const auto ma = metric(resample_group(group_a, rng));
        const auto mb = metric(resample_group(group_b, rng));
        if (ma && mb) {
          diffs[b] = *ma - *mb;
          break;
        }
        if (attempt + 1 >= opt.max_redraws_per_resample)
          throw DataError("clustered_bootstrap: metric undefined in too many resamples");
        ++redraws[b];
      }
    }
  };

  const unsigned threads = std::max(1u, opt.threads);
  if (threads == 1) {
    run(0, opt.n_resamples);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (opt.n_resamples + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const auto begin = std::min(opt.n_resamples, t * chunk);
      const auto end = std::min(opt.n_resamples, begin + chunk);
      pool.emplace_back([&, t, begin, end] {
        try {
          run(begin, end);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::size_t le = 0, ge = 0;
  for (double d : diffs) {
    le += d <= 0.0 ? 1 : 0;
    ge += d >= 0.0 ? 1 : 0;
  }
  const auto B = static_cast<double>(opt.n_resamples);
  BootstrapResult res;
  res.observed_a = *obs_a;
  res.observed_b = *obs_b;
  res.observed_diff = *obs_a - *obs_b;
  res.n_resamples = opt.n_resamples;
  for (auto r : redraws) res.redraws += r;
  switch (opt.alternative) {
    case Alternative::TwoSided: res.p_value = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / B); break;
    case Alternative::Less: res.p_value = static_cast<double>(ge) / B; break;
    case Alternative::Greater: res.p_value = static_cast<double>(le) / B; break;
  }
  return res;
}

/// Session-level entry point: filters each group to its analysis set and
/// resamples users.
inline BootstrapResult clustered_bootstrap(const std::vector<Session>& group_a, const std::vector<Session>& group_b,
                                           const MetricSelector& metric, const BootstrapOptions& opt = {},
                                           const TrustWindow& window = {}) {
  return clustered_bootstrap(user_clusters(filter_analysis_set(group_a, window)),
                             user_clusters(filter_analysis_set(group_b, window)), metric, opt);
}

// ---------------------------------------------------------------------------
// Macro aggregation and grouped comparisons

struct UserMetrics {
  std::string user_id;
  RelianceCounts counts;
  std::map<std::string, std::optional<double>> values;  // nullopt: user filtered out for that metric
};

struct MacroReport {
  std::vector<UserMetrics> users;
  std::map<std::string, std::optional<double>> mean;
  std::map<std::string, std::size_t> n_users;
};

/// Number of qualifying interactions a user needs for a metric.
inline std::size_t qualifying_count(const std::string& name, const RelianceCounts& c) {
  if (name == "under_reliance") return c.ai_correct;
  if (name == "over_reliance") return c.ai_incorrect;
  if (name == "total_inappropriate") return std::min(c.ai_correct, c.ai_incorrect);
  return c.n;
}

/// Per-user metrics averaged over users. A user contributes to a metric only
/// with at least `min_qualifying` interactions meeting that metric's criteria.
inline MacroReport macro_aggregate(const std::vector<Session>& sessions, std::size_t min_qualifying = 3,
                                   const TrustWindow& window = {}) {
  const auto items = filter_analysis_set(sessions, window);
  std::map<std::string, RelianceCounts> by_user;
  for (const auto& s : sessions) by_user.try_emplace(s.user_id);
  for (const auto& it : items) by_user[it.user_id].add(it.interaction);

  MacroReport rep;
  std::map<std::string, double> sums;
  for (const auto& [user, c] : by_user) {
    UserMetrics um{user, c, {}};
    for (const auto& name : kMetricNames) {
      std::optional<double> v;
      if (qualifying_count(name, c) >= min_qualifying) v = metric_by_name(name)(c);
      um.values[name] = v;
      if (v) {
        sums[name] += *v;
        ++rep.n_users[name];
      }
    }
    rep.users.push_back(std::move(um));
  }
  for (const auto& name : kMetricNames) {
    const auto n = rep.n_users[name];
    rep.mean[name] = n ? std::optional<double>(sums[name] / static_cast<double>(n)) : std::nullopt;
  }
  return rep;
}

using SessionAttribute = std::function<std::optional<std::string>(const Session&)>;

inline SessionAttribute user_attribute(std::string key) {
  return [key = std::move(key)](const Session& s) -> std::optional<std::string> {
    auto it = s.user_attributes.find(key);
    if (it == s.user_attributes.end()) return std::nullopt;
    return it->second;
  };
}

/// Micro-aggregated report per attribute value.
inline std::map<std::string, RelianceReport> group_compare(const std::vector<Session>& sessions,
                                                           const SessionAttribute& attribute,
                                                           const TrustWindow& window = {}) {
  std::map<std::string, std::vector<Session>> groups;
  for (const auto& s : sessions) {
    auto v = attribute(s);
    if (!v) throw DataError("group_compare: session " + s.session_id + " lacks the grouping attribute");
    groups[*v].push_back(s);
  }
  std::map<std::string, RelianceReport> out;
  for (const auto& [value, group] : groups) out[value] = reliance_report(filter_analysis_set(group, window));
  return out;
}

}  // namespace trustlab
