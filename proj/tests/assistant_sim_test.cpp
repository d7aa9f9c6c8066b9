#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <map>

#include "test_support.hpp"
#include "trustlab/assistant_sim.hpp"

using namespace trustlab;
using trustlab::testing::make_pool;
using trustlab::testing::make_problem;

namespace {

// Scripted uniform source for pinning individual draws.
struct ScriptedSource {
  std::deque<double> reals;
  std::deque<std::uint64_t> indices;
  double uniform01() {
    const double v = reals.front();
    reals.pop_front();
    return v;
  }
  std::uint64_t uniform_index(std::uint64_t) {
    const auto v = indices.front();
    indices.pop_front();
    return v;
  }
};

// Composite Simpson rule.
template <typename F>
double simpson(F f, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

// Triangular(min=0.5, mode=c, max=c) density, written from the definition.
double triangular_pdf(double x, double c) {
  if (x < 0.5 || x > c) return 0.0;
  return 2.0 * (x - 0.5) / ((c - 0.5) * (c - 0.5));
}

// Expected accuracy of the assistant by quadrature over the confidence
// distribution; independent of the sampler's inverse-CDF route.
double expected_accuracy_quadrature(bool overconfident) {
  const double lo = 0.5, hi = 0.95;
  auto p_correct = [&](double c) {
    if (!overconfident) return c;
    if (c - 0.5 < 1e-9) return 0.5;
    return simpson([&](double x) { return x * triangular_pdf(x, c); }, 0.5, c, 400);
  };
  return simpson(p_correct, lo, hi, 400) / (hi - lo);
}

AssistantProfile calibrated(std::uint64_t seed = 1) {
  return AssistantProfile{"calibrated", AssistantKind::Calibrated, 0.5, 0.95, seed};
}
AssistantProfile overconfident(std::uint64_t seed = 1) {
  return AssistantProfile{"overconfident", AssistantKind::Overconfident, 0.5, 0.95, seed};
}

}  // namespace

TEST(AnalyticOracle, QuadratureMeans) {
  // Frozen values: 0.725 = E[Uniform(0.5, 0.95)], 0.65 = E[(0.5 + 2c) / 3].
  EXPECT_NEAR(expected_accuracy_quadrature(false), 0.725, 1e-9);
  EXPECT_NEAR(expected_accuracy_quadrature(true), 0.65, 1e-6);
}

TEST(SampleRecommendation, CorrectnessDrawBelowConfidenceGivesCorrectPrediction) {
  const auto p = make_problem("q", 2, 1);
  ScriptedSource src{{1.0, 0.10}, {}};  // u = 1.0 maps to c = 0.95
  const auto rec = sample_recommendation(calibrated(), p, src);
  EXPECT_EQ(rec.prediction_index, 1);
  EXPECT_DOUBLE_EQ(rec.confidence, 0.95);
}

TEST(SampleRecommendation, CorrectnessDrawAboveConfidencePicksAWrongOption) {
  const auto p = make_problem("q", 4, 1);
  ScriptedSource src{{0.0, 0.60}, {1}};  // c = 0.5; wrong-option slot 1 skips the correct index
  const auto rec = sample_recommendation(calibrated(), p, src);
  EXPECT_DOUBLE_EQ(rec.confidence, 0.5);
  EXPECT_EQ(rec.prediction_index, 2);
}

TEST(SampleRecommendation, OverconfidentUsesLowerCorrectnessProbability) {
  const auto p = make_problem("q", 2, 0);
  // c = 0.95, c' = 0.5 + 0.45 * sqrt(0.25) = 0.725; correctness draw 0.8 > c' -> wrong
  ScriptedSource src{{1.0, 0.25, 0.8}, {0}};
  const auto rec = sample_recommendation(overconfident(), p, src);
  EXPECT_EQ(rec.prediction_index, 1);
  EXPECT_DOUBLE_EQ(rec.confidence, 0.95);
}

TEST(SampleRecommendation, InvalidProfileIsConfigError) {
  auto prof = calibrated();
  prof.conf_low = 0.4;
  EXPECT_THROW(sample_recommendation(prof, make_problem("q"), 0), ConfigError);
  prof.conf_low = 0.9;
  prof.conf_high = 0.8;
  EXPECT_THROW(sample_recommendation(prof, make_problem("q"), 0), ConfigError);
}

TEST(SampleRecommendation, DeterministicPerDrawIndex) {
  const auto p = make_problem("q", 4, 3);
  for (std::uint64_t i = 0; i < 50; ++i)
    EXPECT_EQ(sample_recommendation(overconfident(9), p, i), sample_recommendation(overconfident(9), p, i));
}

TEST(SampleRecommendation, CalibratedMonteCarloAccuracy) {
  const auto pairs = sample_calibration_pairs(calibrated(3), 200'000);
  double acc = 0;
  for (const auto& pr : pairs) acc += pr.correct;
  EXPECT_NEAR(acc / pairs.size(), expected_accuracy_quadrature(false), 0.005);
}

TEST(SampleRecommendation, OverconfidentMonteCarloAccuracyAndConfidence) {
  const auto pairs = sample_calibration_pairs(overconfident(3), 200'000);
  double acc = 0, conf = 0;
  for (const auto& pr : pairs) {
    acc += pr.correct;
    conf += pr.confidence;
  }
  EXPECT_NEAR(acc / pairs.size(), expected_accuracy_quadrature(true), 0.005);
  EXPECT_NEAR(conf / pairs.size(), 0.725, 0.005);
}

TEST(SampleRecommendation, WrongOptionIsUniform) {
  const auto p = make_problem("q", 4, 2);
  CounterRng rng(17);
  std::map<int, int> counts;
  int wrong = 0;
  // Confidence 0.5 bounds: force the lowest confidence so most draws are wrong.
  AssistantProfile prof{"low", AssistantKind::Calibrated, 0.5, 0.5000001, 17};
  while (wrong < 100'000) {
    const auto rec = sample_recommendation(prof, p, rng);
    if (rec.prediction_index == p.correct_index) continue;
    ++counts[rec.prediction_index];
    ++wrong;
  }
  ASSERT_EQ(counts.size(), 3u);
  for (const auto& [opt, c] : counts) EXPECT_NEAR(c / 100'000.0, 1.0 / 3.0, 0.02) << opt;
}

TEST(CalibrationReport, PerfectlyCalibratedBin) {
  std::vector<CalibrationPair> pairs;
  for (int i = 0; i < 10; ++i) pairs.push_back({0.8, i < 8});
  EXPECT_NEAR(calibration_report(pairs).ece, 0.0, 1e-12);
}

TEST(CalibrationReport, AllWrongAtNinety) {
  std::vector<CalibrationPair> pairs(20, {0.9, false});
  const auto rep = calibration_report(pairs);
  EXPECT_NEAR(rep.ece, 0.9, 1e-12);
  EXPECT_EQ(rep.n_samples, 20u);
}

TEST(CalibrationReport, EmptyInputIsError) {
  EXPECT_THROW(calibration_report({}), DataError);
  EXPECT_THROW(calibration_report({{0.7, true}}, 0), ConfigError);
}

TEST(CalibrationReport, BinsPartitionTheRange) {
  const auto rep = calibration_report({{0.5, true}, {1.0, false}, {0.75, true}}, 4);
  ASSERT_EQ(rep.bin_edges.size(), 5u);
  EXPECT_DOUBLE_EQ(rep.bin_edges.front(), 0.5);
  EXPECT_DOUBLE_EQ(rep.bin_edges.back(), 1.0);
  std::size_t total = 0;
  for (const auto& b : rep.bins) total += b.count;
  EXPECT_EQ(total, 3u);
  EXPECT_EQ(rep.bins.back().count, 1u);  // 1.0 lands in the last bin
  EXPECT_FALSE(rep.bins[1].accuracy.has_value());
}

TEST(CalibrationReport, CalibratedSamplerPerBinGap) {
  const auto rep = calibration_report(sample_calibration_pairs(calibrated(5), 200'000), 9, 0.5, 0.95);
  EXPECT_LT(rep.ece, 0.01);
  for (const auto& b : rep.bins) {
    ASSERT_TRUE(b.accuracy);
    EXPECT_LT(std::abs(*b.accuracy - *b.mean_confidence), 0.02);
  }
}

TEST(CalibrationReport, OverconfidentSamplerNeverAboveConfidence) {
  const auto rep = calibration_report(sample_calibration_pairs(overconfident(5), 200'000), 9, 0.5, 0.95);
  for (const auto& b : rep.bins) {
    if (b.count < 1000) continue;
    EXPECT_LE(*b.accuracy, *b.mean_confidence);
  }
  EXPECT_NEAR(rep.ece, 0.075, 0.01);
}

TEST(GenerateSequences, TenSequencesOfThirtyDistinct) {
  const auto pool = make_pool(39);
  const auto seqs = generate_sequences(pool, calibrated(), 10, 30, 2024);
  ASSERT_EQ(seqs.size(), 10u);
  for (const auto& s : seqs) {
    ASSERT_EQ(s.items.size(), 30u);
    EXPECT_TRUE(validate(s).ok());
    std::set<std::string> ids;
    for (const auto& it : s.items) ids.insert(it.problem.problem_id);
    EXPECT_EQ(ids.size(), 30u);
    EXPECT_TRUE(s.items.front().recommendation.support_explanation.has_value());
  }
}

TEST(GenerateSequences, FullLengthIsAPermutation) {
  const auto pool = make_pool(12);
  for (const auto& s : generate_sequences(pool, calibrated(), 3, 12, 5)) {
    std::set<std::string> ids;
    for (const auto& it : s.items) ids.insert(it.problem.problem_id);
    EXPECT_EQ(ids.size(), 12u);
  }
}

TEST(GenerateSequences, SameSeedIsByteIdentical) {
  const auto pool = make_pool(39);
  const auto a = Json(generate_sequences(pool, overconfident(), 10, 30, 77)).dump();
  const auto b = Json(generate_sequences(pool, overconfident(), 10, 30, 77)).dump();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, Json(generate_sequences(pool, overconfident(), 10, 30, 78)).dump());
}

TEST(GenerateSequences, InsufficientProblems) {
  EXPECT_THROW(generate_sequences(make_pool(10), calibrated(), 1, 30, 0), DataError);
}

TEST(GenerateSequences, ShuffleKeepsAnswersConsistent) {
  SequenceOptions opts;
  opts.shuffle_options = true;
  const auto pool = make_pool(20, 4);
  for (const auto& s : generate_sequences(pool, calibrated(), 4, 20, 3, opts)) {
    for (const auto& it : s.items) {
      const auto& orig = *std::find_if(pool.begin(), pool.end(),
                                       [&](const Problem& p) { return p.problem_id == it.problem.problem_id; });
      EXPECT_EQ(it.problem.options[it.problem.correct_index], orig.options[orig.correct_index]);
    }
  }
}

TEST(GenerateSequences, RealizedAccuracyBracketsAnalyticMeans) {
  const auto pool = make_pool(39);
  auto mean_accuracy = [&](const AssistantProfile& prof) {
    const auto seqs = generate_sequences(pool, prof, 1000, 30, 99, {"S", false, nullptr});
    double sum = 0;
    for (const auto& s : seqs) sum += realized_accuracy(s);
    return sum / seqs.size();
  };
  EXPECT_NEAR(mean_accuracy(calibrated()), 0.725, 0.03);
  EXPECT_NEAR(mean_accuracy(overconfident()), 0.65, 0.03);
}
