#pragma once

// Trust estimation from interaction outcomes alone, with the fit/evaluate
// harness used to score estimators against self-reported trust.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>
#include <utility>

#include "trustlab/core.hpp"
#include "trustlab/error.hpp"
#include "trustlab/metrics.hpp"
#include "trustlab/rng.hpp"
#include "trustlab/serialization.hpp"

namespace trustlab {

enum class EstimatorMethod { AIAcc5, CapabilityDiff, SmoothOutcomes, SmoothConfs, TrustModel };

NLOHMANN_JSON_SERIALIZE_ENUM(EstimatorMethod, {{EstimatorMethod::AIAcc5, "AIAcc5"},
                                               {EstimatorMethod::CapabilityDiff, "CapabilityDiff"},
                                               {EstimatorMethod::SmoothOutcomes, "SmoothOutcomes"},
                                               {EstimatorMethod::SmoothConfs, "SmoothConfs"},
                                               {EstimatorMethod::TrustModel, "TrustModel"}})

inline std::string to_string(EstimatorMethod m) { return Json(m).get<std::string>(); }

/// What an estimator may observe about one finished round.
struct RoundOutcome {
  bool ai_correct = false;
  double ai_confidence = 1.0;
  bool user_initial_correct = false;
  bool user_switched = false;
  bool user_final_correct = false;
  bool agreed = false;  // initial decision matched the AI
};

inline RoundOutcome outcome_of(const Interaction& it) {
  return {it.ai_correct(),    it.recommendation.confidence, it.initial_correct(),
          it.switched_to_ai(), it.final_correct(),          !it.disagreed()};
}

inline constexpr std::size_t kTrustModelFeatures = 6;
inline constexpr double kTrustModelInitial = 5.0;

/// Feature row: ai_correct, switched, final_correct, confidence, agreed, prior trust.
inline std::array<double, kTrustModelFeatures> trust_model_features(const RoundOutcome& o, double prior_trust) {
  return {o.ai_correct ? 1.0 : 0.0, o.user_switched ? 1.0 : 0.0, o.user_final_correct ? 1.0 : 0.0,
          o.ai_confidence,          o.agreed ? 1.0 : 0.0,        prior_trust};
}

struct TrustModelCoefficients {
  double intercept = 0.0;
  std::array<double, kTrustModelFeatures> weights{};
  bool regularized = false;

  double predict_delta(const std::array<double, kTrustModelFeatures>& f) const {
    double d = intercept;
    for (std::size_t i = 0; i < f.size(); ++i) d += weights[i] * f[i];
    return d;
  }
};

inline void to_json(Json& j, const TrustModelCoefficients& c) {
  j = Json{{"intercept", c.intercept},
           {"weights", std::vector<double>(c.weights.begin(), c.weights.end())},
           {"feature_names", {"ai_correct", "switched", "final_correct", "confidence", "agreed", "prior_trust"}},
           {"regularized", c.regularized}};
}
inline void from_json(const Json& j, TrustModelCoefficients& c) {
  j.at("intercept").get_to(c.intercept);
  const auto w = j.at("weights").get<std::vector<double>>();
  if (w.size() != kTrustModelFeatures) throw DataError("trust model needs 6 weights");
  std::copy(w.begin(), w.end(), c.weights.begin());
  c.regularized = j.value("regularized", false);
}

class TrustEstimator {
public:
  static TrustEstimator ai_acc5() { return TrustEstimator(EstimatorMethod::AIAcc5); }
  static TrustEstimator capability_diff() { return TrustEstimator(EstimatorMethod::CapabilityDiff); }
  static TrustEstimator smooth_outcomes(double r) { return smoothing(EstimatorMethod::SmoothOutcomes, r); }
  static TrustEstimator smooth_confs(double r) { return smoothing(EstimatorMethod::SmoothConfs, r); }
  static TrustEstimator trust_model(TrustModelCoefficients coefficients) {
    TrustEstimator e(EstimatorMethod::TrustModel);
    e.model_ = std::make_shared<const TrustModelCoefficients>(coefficients);
    return e;
  }

  EstimatorMethod method() const noexcept { return method_; }
  double smoothing_parameter() const noexcept { return r_; }
  double tau() const noexcept { return tau_; }
  std::size_t window_size() const noexcept { return window_.size(); }

  void update(const RoundOutcome& o) {
    switch (method_) {
      case EstimatorMethod::AIAcc5:
        window_.push_back(o.ai_correct);
        if (window_.size() > kWindow) window_.pop_front();
        break;
      case EstimatorMethod::CapabilityDiff:
        ++rounds_;
        ai_hits_ += o.ai_correct ? 1 : 0;
        user_hits_ += o.user_initial_correct ? 1 : 0;
        break;
      case EstimatorMethod::SmoothOutcomes:
        tau_ = r_ * (o.ai_correct ? 1.0 : -1.0) + (1.0 - r_) * tau_;
        break;
      case EstimatorMethod::SmoothConfs:
        tau_ = r_ * (o.ai_correct ? 1.0 : -1.0) * o.ai_confidence + (1.0 - r_) * tau_;
        break;
      case EstimatorMethod::TrustModel:
        model_trust_ = std::clamp(model_trust_ + model_->predict_delta(trust_model_features(o, model_trust_)),
                                  static_cast<double>(kMinTrust), static_cast<double>(kMaxTrust));
        break;
    }
  }

  /// Natural-scale score: AI accuracy in [0,1], accuracy difference in
  /// [-1,1], tau in [-1,1], or the model's trust in [0,10].
  double raw_score() const {
    switch (method_) {
      case EstimatorMethod::AIAcc5:
        if (window_.empty()) return 0.5;
        return static_cast<double>(std::count(window_.begin(), window_.end(), true)) /
               static_cast<double>(window_.size());
      case EstimatorMethod::CapabilityDiff:
        if (rounds_ == 0) return 0.0;
        return (static_cast<double>(ai_hits_) - static_cast<double>(user_hits_)) / static_cast<double>(rounds_);
      case EstimatorMethod::SmoothOutcomes:
      case EstimatorMethod::SmoothConfs: return tau_;
      case EstimatorMethod::TrustModel: return model_trust_;
    }
    return 0.0;
  }

  /// Predicted trust on the 0..10 scale.
  double estimate() const {
    const double s = raw_score();
    double t = 0.0;
    switch (method_) {
      case EstimatorMethod::AIAcc5: t = 10.0 * s; break;
      case EstimatorMethod::CapabilityDiff:
      case EstimatorMethod::SmoothOutcomes:
      case EstimatorMethod::SmoothConfs: t = (s + 1.0) * 5.0; break;
      case EstimatorMethod::TrustModel: t = s; break;
    }
    return std::clamp(t, 0.0, 10.0);
  }

  /// Fresh state with the same method and parameters.
  TrustEstimator reset() const {
    TrustEstimator e(method_);
    e.r_ = r_;
    e.model_ = model_;
    return e;
  }

private:
  static constexpr std::size_t kWindow = 5;

  explicit TrustEstimator(EstimatorMethod m) : method_(m) {}
  static TrustEstimator smoothing(EstimatorMethod m, double r) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("smoothing parameter must lie in [0, 1]");
    TrustEstimator e(m);
    e.r_ = r;
    return e;
  }

  EstimatorMethod method_;
  double r_ = 0.0;
  double tau_ = 0.0;
  std::deque<bool> window_;
  std::size_t rounds_ = 0, ai_hits_ = 0, user_hits_ = 0;
  std::shared_ptr<const TrustModelCoefficients> model_;
  double model_trust_ = kTrustModelInitial;
};

// ---------------------------------------------------------------------------
// Linear trust-change model

struct LeastSquaresFit {
  Eigen::VectorXd coefficients;  // intercept first
  bool regularized = false;
  std::string warning;
};

/// Ordinary least squares with an intercept column. Rank-deficient designs
/// fall back to a ridge solve (intercept unpenalized) and say so.
inline LeastSquaresFit fit_least_squares(const Eigen::MatrixXd& features, const Eigen::VectorXd& target,
                                         double ridge_lambda = 1e-6) {
  if (features.rows() != target.size()) throw DataError("fit_least_squares: row mismatch");
  if (features.rows() == 0) throw DataError("fit_least_squares: no rows");
  Eigen::MatrixXd design(features.rows(), features.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(features.cols()) = features;

  LeastSquaresFit fit;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() == design.cols()) {
    fit.coefficients = qr.solve(target);
    return fit;
  }
  Eigen::MatrixXd gram = design.transpose() * design;
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(design.cols(), ridge_lambda * design.rows());
  penalty(0) = 0.0;
  gram.diagonal() += penalty;
  fit.coefficients = gram.ldlt().solve(design.transpose() * target);
  fit.regularized = true;
  fit.warning = "design matrix is rank deficient; used ridge regularization";
  return fit;
}

/// Fits the per-round trust change. The prior-trust feature is the report
/// from the previous round (the initial value for a session's first round).
inline TrustModelCoefficients fit_trust_model(const std::vector<Session>& train, std::string* warning = nullptr) {
  std::vector<std::array<double, kTrustModelFeatures>> rows;
  std::vector<double> deltas;
  for (const auto& s : train) {
    double prior = kTrustModelInitial;
    for (const auto& it : s.interactions) {
      rows.push_back(trust_model_features(outcome_of(it), prior));
      const auto report = static_cast<double>(it.trust_report.value);
      deltas.push_back(report - prior);
      prior = report;
    }
  }
  if (rows.empty()) throw DataError("fit_trust_model: no training interactions");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kTrustModelFeatures));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < kTrustModelFeatures; ++k)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    y(static_cast<Eigen::Index>(i)) = deltas[i];
  }
  const auto fit = fit_least_squares(x, y);
  if (warning) *warning = fit.warning;
  TrustModelCoefficients c;
  c.intercept = fit.coefficients(0);
  for (std::size_t k = 0; k < kTrustModelFeatures; ++k) c.weights[k] = fit.coefficients(static_cast<Eigen::Index>(k + 1));
  c.regularized = fit.regularized;
  return c;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Per-interaction trust predictions for one session.
using TrustPredictor = std::function<std::vector<double>(const Session&)>;

/// Runs a fresh copy of the estimator over each session; the prediction for
/// round t is the estimate after observing round t's outcome.
inline TrustPredictor predictor_of(const TrustEstimator& prototype) {
  return [prototype](const Session& s) {
    auto est = prototype.reset();
    std::vector<double> out;
    out.reserve(s.interactions.size());
    for (const auto& it : s.interactions) {
      est.update(outcome_of(it));
      out.push_back(est.estimate());
    }
    return out;
  };
}

/// Binary F1; undefined when there are no positives on either side.
inline std::optional<double> f1_score(const std::vector<bool>& predicted, const std::vector<bool>& actual) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    tp += predicted[i] && actual[i];
    fp += predicted[i] && !actual[i];
    fn += !predicted[i] && actual[i];
  }
  if (tp + fp + fn == 0) return std::nullopt;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

struct TrustEvaluation {
  std::optional<double> pearson_r;
  std::optional<double> low_trust_f1;
  std::optional<double> high_trust_f1;
  std::size_t n_interactions = 0;
};

inline TrustEvaluation evaluate(const TrustPredictor& predict, const std::vector<Session>& sessions,
                                int low_threshold = 5, int high_threshold = 8) {
  std::vector<double> pred, actual;
  for (const auto& s : sessions) {
    const auto p = predict(s);
    if (p.size() != s.interactions.size()) throw DataError("predictor returned the wrong number of estimates");
    for (std::size_t i = 0; i < p.size(); ++i) {
      pred.push_back(p[i]);
      actual.push_back(static_cast<double>(s.interactions[i].trust_report.value));
    }
  }
  TrustEvaluation ev;
  ev.n_interactions = pred.size();
  ev.pearson_r = weighted_pearson(pred, actual, std::vector<double>(pred.size(), 1.0));
  std::vector<bool> pl, al, ph, ah;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pl.push_back(pred[i] < low_threshold);
    al.push_back(actual[i] < low_threshold);
    ph.push_back(pred[i] > high_threshold);
    ah.push_back(actual[i] > high_threshold);
  }
  ev.low_trust_f1 = f1_score(pl, al);
  ev.high_trust_f1 = f1_score(ph, ah);
  return ev;
}

inline TrustEvaluation evaluate(const TrustEstimator& estimator, const std::vector<Session>& sessions) {
  return evaluate(predictor_of(estimator), sessions);
}

inline std::vector<double> default_smoothing_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 19; ++i) g.push_back(0.05 * i);
  return g;
}

/// Smoothing parameter maximizing training-set Pearson r (first best wins ties).
inline double select_smoothing(EstimatorMethod method, const std::vector<Session>& train,
                               const std::vector<double>& grid = default_smoothing_grid()) {
  if (method != EstimatorMethod::SmoothOutcomes && method != EstimatorMethod::SmoothConfs)
    throw ConfigError("select_smoothing applies to smoothing estimators only");
  double best_r = grid.empty() ? 0.5 : grid.front();
  double best = -2.0;
  for (double r : grid) {
    auto est = method == EstimatorMethod::SmoothOutcomes ? TrustEstimator::smooth_outcomes(r)
                                                         : TrustEstimator::smooth_confs(r);
    const auto ev = evaluate(est, train);
    if (ev.pearson_r && *ev.pearson_r > best) {
      best = *ev.pearson_r;
      best_r = r;
    }
  }
  return best_r;
}

/// Seeded split of sessions into n_train training sessions and the rest.
inline std::pair<std::vector<Session>, std::vector<Session>> split_sessions(std::vector<Session> sessions,
                                                                           std::size_t n_train,
                                                                           std::uint64_t seed) {
  if (n_train > sessions.size()) throw ConfigError("split_sessions: n_train exceeds session count");
  CounterRng rng(seed);
  for (std::size_t i = sessions.size(); i > 1; --i) std::swap(sessions[i - 1], sessions[rng.uniform_index(i)]);
  std::vector<Session> test(std::make_move_iterator(sessions.begin() + static_cast<std::ptrdiff_t>(n_train)),
                            std::make_move_iterator(sessions.end()));
  sessions.resize(n_train);
  return {std::move(sessions), std::move(test)};
}

struct TrustTableRow {
  EstimatorMethod method = EstimatorMethod::AIAcc5;
  double parameter = 0.0;  // r for smoothing methods
  TrustEvaluation train;
  TrustEvaluation test;
};

/// Fits/selects every estimator on `train` and scores it on both splits.
inline std::vector<TrustTableRow> trust_estimator_table(const std::vector<Session>& train,
                                                        const std::vector<Session>& test) {
  std::vector<TrustTableRow> rows;
  auto add = [&](EstimatorMethod m, const TrustEstimator& e, double param) {
    rows.push_back({m, param, evaluate(e, train), evaluate(e, test)});
  };
  add(EstimatorMethod::AIAcc5, TrustEstimator::ai_acc5(), 0.0);
  add(EstimatorMethod::CapabilityDiff, TrustEstimator::capability_diff(), 0.0);
  const double r_out = select_smoothing(EstimatorMethod::SmoothOutcomes, train);
  add(EstimatorMethod::SmoothOutcomes, TrustEstimator::smooth_outcomes(r_out), r_out);
  const double r_conf = select_smoothing(EstimatorMethod::SmoothConfs, train);
  add(EstimatorMethod::SmoothConfs, TrustEstimator::smooth_confs(r_conf), r_conf);
  add(EstimatorMethod::TrustModel, TrustEstimator::trust_model(fit_trust_model(train)), 0.0);
  return rows;
}

}  // namespace trustlab
