#pragma once

// Simulated assistants with controllable calibration, fixed problem
// sequences built from them, and calibration diagnostics.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "trustlab/core.hpp"
#include "trustlab/error.hpp"
#include "trustlab/rng.hpp"
#include "trustlab/serialization.hpp"

namespace trustlab {

enum class AssistantKind { Calibrated, Overconfident };

NLOHMANN_JSON_SERIALIZE_ENUM(AssistantKind, {{AssistantKind::Calibrated, "Calibrated"},
                                             {AssistantKind::Overconfident, "Overconfident"}})

struct AssistantProfile {
  std::string profile_id = "calibrated";
  AssistantKind kind = AssistantKind::Calibrated;
  double conf_low = 0.5;
  double conf_high = 0.95;
  std::uint64_t seed = 0;

  void check() const {
    if (!(conf_low >= 0.5 && conf_low < conf_high && conf_high <= 1.0))
      throw ConfigError("assistant profile '" + profile_id + "': need 0.5 <= conf_low < conf_high <= 1.0");
  }
};

inline void to_json(Json& j, const AssistantProfile& p) {
  j = Json{{"profile_id", p.profile_id}, {"kind", p.kind}, {"conf_low", p.conf_low},
           {"conf_high", p.conf_high},   {"seed", p.seed}};
}
inline void from_json(const Json& j, AssistantProfile& p) {
  p.profile_id = j.value("profile_id", std::string("calibrated"));
  j.at("kind").get_to(p.kind);
  if (Json(p.kind) != j.at("kind")) throw ConfigError("unknown assistant kind " + j.at("kind").dump());
  p.conf_low = j.value("conf_low", 0.5);
  p.conf_high = j.value("conf_high", 0.95);
  p.seed = j.value("seed", std::uint64_t{0});
}

/// Anything that hands out uniform reals and bounded integers. CounterRng
/// qualifies; tests substitute scripted sources.
template <typename S>
concept UniformSource = requires(S& s, std::uint64_t n) {
  { s.uniform01() } -> std::convertible_to<double>;
  { s.uniform_index(n) } -> std::convertible_to<std::uint64_t>;
};

/// Inverse CDF of Triangular(min = 0.5, mode = c, max = c).
inline double triangular_mode_at_max(double c, double u) noexcept {
  return 0.5 + (c - 0.5) * std::sqrt(u);
}

/// Probability that the prediction is correct given the displayed confidence.
/// Calibrated: the confidence itself. Overconfident: a draw c' below it.
template <UniformSource Source>
double correctness_probability(const AssistantProfile& profile, double confidence, Source& src) {
  if (profile.kind == AssistantKind::Calibrated) return confidence;
  return triangular_mode_at_max(confidence, src.uniform01());
}

/// Draw order: confidence, [c' for overconfident], correctness, wrong option.
template <UniformSource Source>
Recommendation sample_recommendation(const AssistantProfile& profile, const Problem& problem, Source& src) {
  profile.check();
  const auto n_options = problem.options.size();
  if (n_options < 2 || problem.correct_index < 0 || problem.correct_index >= static_cast<int>(n_options))
    throw DataError("invalid problem " + problem.problem_id);

  Recommendation rec;
  rec.confidence = profile.conf_low + (profile.conf_high - profile.conf_low) * src.uniform01();
  const double p_correct = correctness_probability(profile, rec.confidence, src);
  if (src.uniform01() < p_correct) {
    rec.prediction_index = problem.correct_index;
  } else {
    // uniform over the wrong options
    auto k = static_cast<int>(src.uniform_index(n_options - 1));
    rec.prediction_index = k >= problem.correct_index ? k + 1 : k;
  }
  return rec;
}

/// Reproducible single draw keyed by (profile seed, draw index).
inline Recommendation sample_recommendation(const AssistantProfile& profile, const Problem& problem,
                                            std::uint64_t draw_index) {
  CounterRng rng = CounterRng(profile.seed).split(draw_index);
  return sample_recommendation(profile, problem, rng);
}

using ExplanationSource =
    std::function<std::optional<std::string>(const Problem&, int option_index, ExplanationKind)>;

/// Placeholder explanations for runs without a generated explanation cache.
inline std::optional<std::string> template_explanation(const Problem& p, int option, ExplanationKind kind) {
  const auto& text = p.options.at(static_cast<std::size_t>(option));
  if (kind == ExplanationKind::Support) return text + " is the correct answer given the details in the question.";
  return "While I think " + text + " is the correct answer, some details in the question point elsewhere.";
}

struct SequenceOptions {
  std::string id_prefix = "S";
  // Per-sequence option shuffling; off by default (fixed order from ingestion).
  bool shuffle_options = false;
  ExplanationSource explanations = template_explanation;
};

namespace detail {

inline void shuffle_problem_options(SequenceItem& item, CounterRng& rng) {
  auto& opts = item.problem.options;
  std::vector<int> perm(opts.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  std::vector<std::string> shuffled(opts.size());
  std::vector<int> new_pos(opts.size());
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    shuffled[pos] = opts[static_cast<std::size_t>(perm[pos])];
    new_pos[static_cast<std::size_t>(perm[pos])] = static_cast<int>(pos);
  }
  opts = std::move(shuffled);
  item.problem.correct_index = new_pos[static_cast<std::size_t>(item.problem.correct_index)];
  item.recommendation.prediction_index = new_pos[static_cast<std::size_t>(item.recommendation.prediction_index)];
}

}  // namespace detail

/// n_sequences sequences of `length` distinct problems, each bound to one
/// sampled recommendation. Sequence i draws only from stream i of the seed.
inline std::vector<ProblemSequence> generate_sequences(const std::vector<Problem>& problems,
                                                       const AssistantProfile& profile,
                                                       std::size_t n_sequences, std::size_t length,
                                                       std::uint64_t seed, const SequenceOptions& opts = {}) {
  profile.check();
  if (length == 0) throw ConfigError("sequence length must be positive");
  if (problems.size() < length)
    throw DataError("need at least " + std::to_string(length) + " problems, have " +
                    std::to_string(problems.size()));
  for (const auto& p : problems)
    if (auto v = validate(p); !v) throw DataError("problem " + p.problem_id + ": " + v.violations.front());

  std::vector<ProblemSequence> out;
  out.reserve(n_sequences);
  const CounterRng root(seed);
  for (std::size_t s = 0; s < n_sequences; ++s) {
    CounterRng rng = root.split(s);
    std::vector<std::size_t> order(problems.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // partial Fisher-Yates: first `length` slots are a uniform draw without repetition
    for (std::size_t i = 0; i < length; ++i) {
      const auto j = i + rng.uniform_index(order.size() - i);
      std::swap(order[i], order[j]);
    }
    ProblemSequence seq;
    seq.sequence_id = opts.id_prefix + std::to_string(s);
    seq.items.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
      SequenceItem item{problems[order[i]], sample_recommendation(profile, problems[order[i]], rng)};
      if (opts.shuffle_options) detail::shuffle_problem_options(item, rng);
      if (opts.explanations) {
        item.recommendation.support_explanation =
            opts.explanations(item.problem, item.recommendation.prediction_index, ExplanationKind::Support);
        item.recommendation.counter_explanation =
            opts.explanations(item.problem, item.recommendation.prediction_index, ExplanationKind::Counter);
      }
      seq.items.push_back(std::move(item));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

/// Fraction of items whose recommendation is correct.
inline double realized_accuracy(const ProblemSequence& seq) {
  if (seq.items.empty()) return 0.0;
  const auto hits = std::count_if(seq.items.begin(), seq.items.end(), [](const SequenceItem& it) {
    return it.recommendation.prediction_index == it.problem.correct_index;
  });
  return static_cast<double>(hits) / static_cast<double>(seq.items.size());
}

// ---------------------------------------------------------------------------
// Calibration diagnostics

struct CalibrationPair {
  double confidence = 0.5;
  bool correct = false;
};

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_confidence;  // absent for empty bins
  std::optional<double> accuracy;
};

struct CalibrationReport {
  std::vector<double> bin_edges;
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
  std::size_t n_samples = 0;
};

/// Equal-width bins over [range_low, range_high]; confidences outside the
/// range land in the nearest end bin. ECE = sum_b (n_b / N) |acc_b - conf_b|.
inline CalibrationReport calibration_report(const std::vector<CalibrationPair>& pairs, std::size_t n_bins = 9,
                                            double range_low = 0.5, double range_high = 1.0) {
  if (pairs.empty()) throw DataError("calibration_report: no samples");
  if (n_bins == 0) throw ConfigError("calibration_report: n_bins must be >= 1");
  if (!(range_low < range_high)) throw ConfigError("calibration_report: empty range");

  CalibrationReport rep;
  rep.n_samples = pairs.size();
  const double width = (range_high - range_low) / static_cast<double>(n_bins);
  for (std::size_t b = 0; b <= n_bins; ++b) rep.bin_edges.push_back(range_low + width * static_cast<double>(b));
  rep.bin_edges.back() = range_high;

  std::vector<double> conf_sum(n_bins, 0.0);
  std::vector<std::size_t> hits(n_bins, 0), count(n_bins, 0);
  for (const auto& p : pairs) {
    if (!(p.confidence >= 0.5 && p.confidence <= 1.0)) throw DataError("calibration_report: confidence outside [0.5, 1]");
    auto b = static_cast<std::ptrdiff_t>(std::floor((p.confidence - range_low) / width));
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(n_bins) - 1);
    const auto bi = static_cast<std::size_t>(b);
    conf_sum[bi] += p.confidence;
    hits[bi] += p.correct ? 1 : 0;
    ++count[bi];
  }
  const auto total = static_cast<double>(pairs.size());
  for (std::size_t b = 0; b < n_bins; ++b) {
    CalibrationBin bin{rep.bin_edges[b], rep.bin_edges[b + 1], count[b], std::nullopt, std::nullopt};
    if (count[b] > 0) {
      const auto n = static_cast<double>(count[b]);
      bin.mean_confidence = conf_sum[b] / n;
      bin.accuracy = static_cast<double>(hits[b]) / n;
      rep.ece += (n / total) * std::abs(*bin.accuracy - *bin.mean_confidence);
    }
    rep.bins.push_back(bin);
  }
  return rep;
}

/// Draws `n` recommendations on a synthetic problem with `n_options` options
/// and returns (displayed confidence, correct) pairs.
inline std::vector<CalibrationPair> sample_calibration_pairs(const AssistantProfile& profile, std::size_t n,
                                                             int n_options = 2) {
  Problem p;
  p.problem_id = "calibration-probe";
  for (int i = 0; i < n_options; ++i) p.options.push_back("option " + std::to_string(i));
  p.correct_index = 0;
  CounterRng rng(profile.seed);
  std::vector<CalibrationPair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto rec = sample_recommendation(profile, p, rng);
    out.push_back({rec.confidence, rec.prediction_index == p.correct_index});
  }
  return out;
}

}  // namespace trustlab
