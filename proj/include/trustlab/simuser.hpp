#pragma once

// Synthetic participants. A harness for end-to-end runs and policy sweeps;
// the behavior model is deliberately simple and makes no fidelity claim.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "trustlab/core.hpp"
#include "trustlab/error.hpp"
#include "trustlab/policy.hpp"
#include "trustlab/rng.hpp"
#include "trustlab/serialization.hpp"

namespace trustlab {

using TrustCurve = std::array<double, kMaxTrust + 1>;

/// Piecewise-linear curve through (trust, value) knots; knots sorted by trust,
/// first at 0 and last at 10.
inline TrustCurve piecewise_linear(const std::vector<std::pair<int, double>>& knots) {
  if (knots.size() < 2 || knots.front().first != kMinTrust || knots.back().first != kMaxTrust)
    throw ConfigError("trust curve knots must span 0..10");
  TrustCurve out{};
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const auto [t0, v0] = knots[k];
    const auto [t1, v1] = knots[k + 1];
    if (t1 <= t0) throw ConfigError("trust curve knots must be increasing");
    for (int t = t0; t <= t1; ++t)
      out[static_cast<std::size_t>(t)] = v0 + (v1 - v0) * static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
  }
  return out;
}

struct UserModel {
  std::string preset = "arc-default";
  double skill = 0.67;  // P(initial decision correct)

  // P(switch | disagreement, heuristic response) by current trust level.
  TrustCurve trust_to_switch{};

  // P(deliberate evaluation) without intervention; scaled per intervention.
  double base_engagement = 0.2;
  std::array<double, kAllInterventions.size()> intervention_modifiers{1.0, 1.0, 1.0, 1.0, 1.0};
  // P(a deliberate evaluation settles on the correct one of {own answer, AI answer}).
  double deliberate_accuracy = 0.9;

  // Reported-trust dynamics: tau <- r (2a - 1) + (1 - r) tau, report round((tau + 1) 5).
  double trust_smoothing = 0.4;
  double initial_tau = 0.0;
  bool reporting_noise = false;

  std::uint64_t seed = 0;

  double modifier(Intervention i) const { return intervention_modifiers[static_cast<std::size_t>(i)]; }
  double engagement(Intervention i) const { return std::clamp(base_engagement * modifier(i), 0.0, 1.0); }

  void check() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(skill) || !prob(base_engagement) || !prob(deliberate_accuracy) || !prob(trust_smoothing))
      throw ConfigError("user model probabilities must lie in [0, 1]");
    if (!(initial_tau >= -1.0 && initial_tau <= 1.0)) throw ConfigError("initial_tau must lie in [-1, 1]");
    for (std::size_t t = 0; t < trust_to_switch.size(); ++t) {
      if (!prob(trust_to_switch[t])) throw ConfigError("trust_to_switch values must lie in [0, 1]");
      if (t > 0 && trust_to_switch[t] < trust_to_switch[t - 1])
        throw ConfigError("trust_to_switch must be non-decreasing");
    }
    for (double m : intervention_modifiers)
      if (m < 0.0) throw ConfigError("intervention modifiers must be non-negative");
  }
};

/// Switch curve anchored on reported human rates: about 8% acceptance of
/// wrong advice at low trust, about 68% at the top of the scale; the
/// intermediate knots are interpolations.
inline TrustCurve default_switch_curve() {
  return piecewise_linear({{0, 0.08}, {4, 0.20}, {7, 0.45}, {10, 0.68}});
}

inline UserModel arc_default_user(std::uint64_t seed = 0) {
  UserModel m;
  m.preset = "arc-default";
  m.skill = 0.67;
  m.trust_to_switch = default_switch_curve();
  m.intervention_modifiers = {1.0, 5.0, 5.0, 4.0, 4.0};
  m.seed = seed;
  return m;
}

inline UserModel diagnosis_default_user(std::uint64_t seed = 0) {
  UserModel m = arc_default_user(seed);
  m.preset = "diagnosis-default";
  m.skill = 0.74;
  return m;
}

inline void to_json(Json& j, const UserModel& m) {
  std::vector<double> curve(m.trust_to_switch.begin(), m.trust_to_switch.end());
  Json mods = Json::object();
  for (auto i : kAllInterventions) mods[std::string(to_string(i))] = m.modifier(i);
  j = Json{{"preset", m.preset},
           {"skill", m.skill},
           {"trust_to_switch", curve},
           {"base_engagement", m.base_engagement},
           {"intervention_modifiers", mods},
           {"deliberate_accuracy", m.deliberate_accuracy},
           {"trust_smoothing", m.trust_smoothing},
           {"initial_tau", m.initial_tau},
           {"reporting_noise", m.reporting_noise},
           {"seed", m.seed}};
}

inline void from_json(const Json& j, UserModel& m) {
  const auto preset = j.value("preset", std::string("arc-default"));
  m = preset == "diagnosis-default" ? diagnosis_default_user() : arc_default_user();
  m.preset = preset;
  m.skill = j.value("skill", m.skill);
  if (j.contains("trust_to_switch")) {
    auto curve = j.at("trust_to_switch").get<std::vector<double>>();
    if (curve.size() != m.trust_to_switch.size()) throw ConfigError("trust_to_switch needs 11 values");
    std::copy(curve.begin(), curve.end(), m.trust_to_switch.begin());
  }
  m.base_engagement = j.value("base_engagement", m.base_engagement);
  if (j.contains("intervention_modifiers"))
    for (auto i : kAllInterventions)
      m.intervention_modifiers[static_cast<std::size_t>(i)] =
          j.at("intervention_modifiers").value(std::string(to_string(i)), m.modifier(i));
  m.deliberate_accuracy = j.value("deliberate_accuracy", m.deliberate_accuracy);
  m.trust_smoothing = j.value("trust_smoothing", m.trust_smoothing);
  m.initial_tau = j.value("initial_tau", m.initial_tau);
  m.reporting_noise = j.value("reporting_noise", m.reporting_noise);
  m.seed = j.value("seed", m.seed);
  m.check();
}

namespace detail {

inline int uniform_wrong_option(const Problem& p, CounterRng& rng) {
  const auto k = static_cast<int>(rng.uniform_index(p.options.size() - 1));
  return k >= p.correct_index ? k + 1 : k;
}

}  // namespace detail

inline int act_initial(const UserModel& m, const Problem& p, CounterRng& rng) {
  if (rng.bernoulli(m.skill)) return p.correct_index;
  return detail::uniform_wrong_option(p, rng);
}

/// Final decision. Agreement with the AI is kept. On disagreement the user
/// either evaluates deliberately (probability scaled by the intervention)
/// and settles on the correct one of the two candidates with
/// deliberate_accuracy, or responds heuristically and switches with the
/// trust-dependent probability.
inline int act_final(const UserModel& m, const Problem& p, int initial, const RecommendationView& view,
                     const InterventionDecision& decision, TrustLevel trust, CounterRng& rng) {
  const int ai = view.prediction_index;
  if (initial == ai) return initial;
  if (rng.bernoulli(m.engagement(decision.action))) {
    const bool pick_better = rng.bernoulli(m.deliberate_accuracy);
    const bool ai_better = ai == p.correct_index;
    const bool own_better = initial == p.correct_index;
    if (!ai_better && !own_better) return initial;
    return (ai_better == pick_better) ? ai : initial;
  }
  const auto t = static_cast<std::size_t>(std::clamp(trust.value, kMinTrust, kMaxTrust));
  return rng.bernoulli(m.trust_to_switch[t]) ? ai : initial;
}

struct TrustDynamics {
  double tau = 0.0;
};

inline TrustLevel report_from_tau(double tau) {
  const int t = static_cast<int>(std::floor((tau + 1.0) * 5.0 + 0.5));
  return TrustLevel{std::clamp(t, kMinTrust, kMaxTrust)};
}

/// Updates the internal trust state from the round outcome and returns the report.
inline TrustLevel update_trust(const UserModel& m, TrustDynamics& state, bool ai_was_correct,
                               [[maybe_unused]] bool user_final_correct, CounterRng& rng) {
  const double r = m.trust_smoothing;
  state.tau = r * (ai_was_correct ? 1.0 : -1.0) + (1.0 - r) * state.tau;
  TrustLevel report = report_from_tau(state.tau);
  if (m.reporting_noise) {
    const int jitter = static_cast<int>(rng.uniform_index(3)) - 1;
    report.value = std::clamp(report.value + jitter, kMinTrust, kMaxTrust);
  }
  return report;
}

}  // namespace trustlab
