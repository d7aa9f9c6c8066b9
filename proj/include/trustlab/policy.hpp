#pragma once

// Trust-adaptive intervention policy: maps the last reported trust level to
// an assistant behavior for the next round.

#include <array>
#include <optional>
#include <string>

#include "trustlab/core.hpp"
#include "trustlab/error.hpp"
#include "trustlab/serialization.hpp"

namespace trustlab {

enum class PolicyKind {
  NoIntervention,
  SupportAlways,
  CounterAlways,
  SupportAdaptive,
  CounterAdaptive,
  BothAdaptive,
  ThinkingAdaptive,
  PauseAdaptive,
  ThinkingAndPauseAdaptive,
};

inline constexpr std::array<PolicyKind, 9> kAllPolicyKinds = {
    PolicyKind::NoIntervention,  PolicyKind::SupportAlways,   PolicyKind::CounterAlways,
    PolicyKind::SupportAdaptive, PolicyKind::CounterAdaptive, PolicyKind::BothAdaptive,
    PolicyKind::ThinkingAdaptive, PolicyKind::PauseAdaptive,  PolicyKind::ThinkingAndPauseAdaptive};

NLOHMANN_JSON_SERIALIZE_ENUM(PolicyKind, {{PolicyKind::NoIntervention, "NoIntervention"},
                                          {PolicyKind::SupportAlways, "SupportAlways"},
                                          {PolicyKind::CounterAlways, "CounterAlways"},
                                          {PolicyKind::SupportAdaptive, "SupportAdaptive"},
                                          {PolicyKind::CounterAdaptive, "CounterAdaptive"},
                                          {PolicyKind::BothAdaptive, "BothAdaptive"},
                                          {PolicyKind::ThinkingAdaptive, "ThinkingAdaptive"},
                                          {PolicyKind::PauseAdaptive, "PauseAdaptive"},
                                          {PolicyKind::ThinkingAndPauseAdaptive, "ThinkingAndPauseAdaptive"}})

inline std::string to_string(PolicyKind k) { return Json(k).get<std::string>(); }

struct PolicyConfig {
  PolicyKind kind = PolicyKind::NoIntervention;
  int low_threshold = 5;   // low side fires when trust < low_threshold
  int high_threshold = 8;  // high side fires when trust > high_threshold
  Millis explanation_gate_ms = 15'000;
  Millis thinking_delay_ms = 10'000;
  Millis pause_delay_ms = 10'000;

  void check() const {
    if (!(0 <= low_threshold && low_threshold <= high_threshold && high_threshold <= kMaxTrust))
      throw ConfigError("policy thresholds must satisfy 0 <= low <= high <= 10");
    if (explanation_gate_ms < 0 || thinking_delay_ms < 0 || pause_delay_ms < 0)
      throw ConfigError("policy durations must be non-negative");
  }
};

inline void to_json(Json& j, const PolicyConfig& c) {
  j = Json{{"kind", c.kind},
           {"low_threshold", c.low_threshold},
           {"high_threshold", c.high_threshold},
           {"explanation_gate_ms", c.explanation_gate_ms},
           {"thinking_delay_ms", c.thinking_delay_ms},
           {"pause_delay_ms", c.pause_delay_ms}};
}
inline void from_json(const Json& j, PolicyConfig& c) {
  j.at("kind").get_to(c.kind);
  if (Json(c.kind) != j.at("kind")) throw ConfigError("unknown policy kind " + j.at("kind").dump());
  c.low_threshold = j.value("low_threshold", 5);
  c.high_threshold = j.value("high_threshold", 8);
  c.explanation_gate_ms = j.value("explanation_gate_ms", Millis{15'000});
  c.thinking_delay_ms = j.value("thinking_delay_ms", Millis{10'000});
  c.pause_delay_ms = j.value("pause_delay_ms", Millis{10'000});
  c.check();
}

struct InterventionDecision {
  Intervention action = Intervention::None;
  Millis pre_reveal_delay_ms = 0;
  Millis post_reveal_gate_ms = 0;

  friend bool operator==(const InterventionDecision&, const InterventionDecision&) = default;
};

inline void to_json(Json& j, const InterventionDecision& d) {
  j = Json{{"action", d.action},
           {"pre_reveal_delay_ms", d.pre_reveal_delay_ms},
           {"post_reveal_gate_ms", d.post_reveal_gate_ms}};
}

/// Pure function of (config, last reported trust). No prior trust (first
/// round) never triggers an adaptive kind.
inline InterventionDecision decide(const PolicyConfig& cfg, std::optional<TrustLevel> prior_trust) {
  const auto support = InterventionDecision{Intervention::ShowSupport, 0, cfg.explanation_gate_ms};
  const auto counter = InterventionDecision{Intervention::ShowCounter, 0, cfg.explanation_gate_ms};
  const auto thinking = InterventionDecision{Intervention::AiThinking, cfg.thinking_delay_ms, 0};
  const auto pause = InterventionDecision{Intervention::ForcedPause, 0, cfg.pause_delay_ms};

  const bool low = prior_trust && prior_trust->value < cfg.low_threshold;
  const bool high = prior_trust && prior_trust->value > cfg.high_threshold;

  switch (cfg.kind) {
    case PolicyKind::NoIntervention: return {};
    case PolicyKind::SupportAlways: return support;
    case PolicyKind::CounterAlways: return counter;
    case PolicyKind::SupportAdaptive: return low ? support : InterventionDecision{};
    case PolicyKind::CounterAdaptive: return high ? counter : InterventionDecision{};
    case PolicyKind::BothAdaptive:
      if (low) return support;
      if (high) return counter;
      return {};
    case PolicyKind::ThinkingAdaptive: return low ? thinking : InterventionDecision{};
    case PolicyKind::PauseAdaptive: return high ? pause : InterventionDecision{};
    case PolicyKind::ThinkingAndPauseAdaptive:
      if (low) return thinking;
      if (high) return pause;
      return {};
  }
  return {};
}

/// What the participant may see for one round.
struct RecommendationView {
  int prediction_index = 0;
  double confidence = 0.5;
  std::optional<std::string> explanation;
  std::optional<ExplanationKind> explanation_kind;

  friend bool operator==(const RecommendationView&, const RecommendationView&) = default;
};

inline void to_json(Json& j, const RecommendationView& v) {
  j = Json{{"prediction_index", v.prediction_index},
           {"confidence", v.confidence},
           {"confidence_percent", display_percent(v.confidence)}};
  if (v.explanation) {
    j["explanation"] = *v.explanation;
    j["explanation_kind"] = std::string(to_string(*v.explanation_kind));
  }
}

/// Exposes the prediction and confidence, plus the one explanation the
/// decision authorizes. Throws DataError naming the problem if that
/// explanation is missing.
inline RecommendationView attach(const InterventionDecision& decision, const Recommendation& rec,
                                 const std::string& problem_id = {}) {
  RecommendationView view{rec.prediction_index, rec.confidence, std::nullopt, std::nullopt};
  auto require = [&](const std::optional<std::string>& text, ExplanationKind kind) {
    if (!text) throw DataError("problem " + problem_id + ": missing " + std::string(to_string(kind)) + " explanation");
    view.explanation = *text;
    view.explanation_kind = kind;
  };
  if (decision.action == Intervention::ShowSupport) require(rec.support_explanation, ExplanationKind::Support);
  if (decision.action == Intervention::ShowCounter) require(rec.counter_explanation, ExplanationKind::Counter);
  return view;
}

}  // namespace trustlab
