#pragma once

// Three-stage protocol state machine.
//
// Each round: the problem is shown and the initial-decision controls stay
// locked for a reading gate; the participant submits an initial decision;
// the policy picks an intervention from the last reported trust; the advice
// is revealed (possibly after an "AI is thinking" embargo) and the final
// decision is gated for any reading/pause time; the outcome is disclosed and
// the participant reports trust.
//
// All times are server-side milliseconds since session start. Every
// operation either applies completely or leaves the state untouched and
// returns the reason it was rejected.

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trustlab/core.hpp"
#include "trustlab/policy.hpp"
#include "trustlab/serialization.hpp"

namespace trustlab {

enum class Stage { AwaitingInitial, AwaitingReveal, AwaitingFinal, AwaitingTrust, Finished };

NLOHMANN_JSON_SERIALIZE_ENUM(Stage, {{Stage::AwaitingInitial, "AwaitingInitial"},
                                     {Stage::AwaitingReveal, "AwaitingReveal"},
                                     {Stage::AwaitingFinal, "AwaitingFinal"},
                                     {Stage::AwaitingTrust, "AwaitingTrust"},
                                     {Stage::Finished, "Finished"}})

enum class RejectReason {
  GateNotElapsed,   // timing gate still running
  WrongStage,       // event not valid in the current stage
  ClockRegression,  // event time not after the previous event
  InvalidDecision,  // option index out of range
  InvalidTrust,     // trust outside 0..10
  MissingExplanation,
};

NLOHMANN_JSON_SERIALIZE_ENUM(RejectReason, {{RejectReason::GateNotElapsed, "gate_not_elapsed"},
                                            {RejectReason::WrongStage, "wrong_stage"},
                                            {RejectReason::ClockRegression, "clock_regression"},
                                            {RejectReason::InvalidDecision, "invalid_decision"},
                                            {RejectReason::InvalidTrust, "invalid_trust"},
                                            {RejectReason::MissingExplanation, "missing_explanation"}})

struct Rejection {
  RejectReason reason = RejectReason::WrongStage;
  std::string message;
  Millis remaining_ms = 0;

  /// Data errors are bad payloads; the rest are protocol (ordering/timing) errors.
  bool is_data_error() const noexcept {
    return reason == RejectReason::InvalidDecision || reason == RejectReason::InvalidTrust ||
           reason == RejectReason::MissingExplanation;
  }
};

class Status {
public:
  static Status accepted() { return Status{}; }
  static Status rejected(RejectReason reason, std::string message, Millis remaining = 0) {
    Status s;
    s.rejection_ = Rejection{reason, std::move(message), remaining};
    return s;
  }
  bool ok() const noexcept { return !rejection_.has_value(); }
  explicit operator bool() const noexcept { return ok(); }
  const Rejection& rejection() const { return *rejection_; }

private:
  std::optional<Rejection> rejection_;
};

struct EngineOptions {
  std::size_t n_items = kDefaultSequenceLength;  // clipped to the sequence length
  Millis reading_gate_ms = 10'000;
  // Downgrade an explanation intervention to None when the recommendation
  // lacks that explanation (e.g. unanimous self-consistency votes leave no
  // counter rationale). Off: the round is rejected as a data error.
  bool fallback_on_missing_explanation = false;
};

inline void to_json(Json& j, const EngineOptions& o) {
  j = Json{{"n_items", o.n_items},
           {"reading_gate_ms", o.reading_gate_ms},
           {"fallback_on_missing_explanation", o.fallback_on_missing_explanation}};
}
inline void from_json(const Json& j, EngineOptions& o) {
  o.n_items = j.value("n_items", kDefaultSequenceLength);
  o.reading_gate_ms = j.value("reading_gate_ms", Millis{10'000});
  o.fallback_on_missing_explanation = j.value("fallback_on_missing_explanation", false);
}

struct SessionState {
  Session session;
  std::shared_ptr<const ProblemSequence> sequence;
  PolicyConfig policy;
  EngineOptions options;

  Stage stage = Stage::AwaitingInitial;
  std::size_t current_item = 0;
  std::optional<TrustLevel> last_trust;
  Millis last_event_at = 0;

  // current round
  Interaction pending;
  InterventionDecision decision;
  Millis reading_deadline = 0;
  Millis reveal_at = 0;
  Millis final_deadline = 0;

  std::size_t n_items() const noexcept {
    return sequence ? std::min(options.n_items, sequence->items.size()) : 0;
  }
  const SequenceItem& item() const { return sequence->items.at(current_item); }
  bool finished() const noexcept { return stage == Stage::Finished; }
};

/// Outcome disclosed after the final decision.
struct RoundFeedback {
  bool user_correct = false;
  bool ai_correct = false;
  int correct_index = 0;
};

namespace detail {

inline Status check_time(const SessionState& s, Millis at) {
  if (at <= s.last_event_at)
    return Status::rejected(RejectReason::ClockRegression, "event time must be after the previous event");
  return Status::accepted();
}

inline Status check_stage(const SessionState& s, Stage expected) {
  if (s.stage != expected)
    return Status::rejected(RejectReason::WrongStage,
                            "expected stage " + Json(expected).get<std::string>() + ", session is in " +
                                Json(s.stage).get<std::string>());
  return Status::accepted();
}

inline bool valid_option(const SessionState& s, int idx) {
  return idx >= 0 && idx < static_cast<int>(s.item().problem.options.size());
}

inline void begin_round(SessionState& s, Millis shown_at) {
  const auto& it = s.item();
  s.pending = Interaction{};
  s.pending.index = static_cast<int>(s.current_item);
  s.pending.problem_id = it.problem.problem_id;
  s.pending.option_count = static_cast<int>(it.problem.options.size());
  s.pending.correct_index = it.problem.correct_index;
  s.pending.recommendation = it.recommendation;
  s.pending.stamps.problem_shown = shown_at;
  s.decision = {};
  s.reading_deadline = shown_at + s.options.reading_gate_ms;
  s.reveal_at = 0;
  s.final_deadline = 0;
  s.stage = Stage::AwaitingInitial;
}

inline void reveal_at(SessionState& s, Millis at) {
  s.pending.stamps.advice_shown = at;
  s.final_deadline = at + s.decision.post_reveal_gate_ms;
  s.stage = Stage::AwaitingFinal;
}

}  // namespace detail

inline SessionState start_session(Session header, std::shared_ptr<const ProblemSequence> sequence,
                                  PolicyConfig policy, EngineOptions options = {}, Millis at = 0) {
  if (!sequence || sequence->items.empty()) throw DataError("start_session: empty sequence");
  if (auto v = validate(*sequence); !v) throw DataError("start_session: " + v.violations.front());
  policy.check();
  SessionState s;
  header.sequence_id = sequence->sequence_id;
  header.interactions.clear();
  s.session = std::move(header);
  s.sequence = std::move(sequence);
  s.policy = policy;
  s.options = options;
  s.last_event_at = at;
  detail::begin_round(s, at);
  return s;
}

/// Intervention for the current round, with the missing-explanation
/// fallback applied when enabled.
inline InterventionDecision effective_decision(const SessionState& s) {
  auto d = decide(s.policy, s.last_trust);
  if (!s.options.fallback_on_missing_explanation) return d;
  const auto& rec = s.item().recommendation;
  if ((d.action == Intervention::ShowSupport && !rec.support_explanation) ||
      (d.action == Intervention::ShowCounter && !rec.counter_explanation))
    return {};
  return d;
}

inline Status submit_initial(SessionState& s, int decision, Millis at) {
  if (auto st = detail::check_stage(s, Stage::AwaitingInitial); !st) return st;
  if (auto st = detail::check_time(s, at); !st) return st;
  if (at < s.reading_deadline)
    return Status::rejected(RejectReason::GateNotElapsed, "initial decision locked during reading time",
                            s.reading_deadline - at);
  if (!detail::valid_option(s, decision))
    return Status::rejected(RejectReason::InvalidDecision, "initial decision is not a valid option");

  const auto d = effective_decision(s);
  try {
    (void)attach(d, s.item().recommendation, s.item().problem.problem_id);
  } catch (const DataError& e) {
    return Status::rejected(RejectReason::MissingExplanation, e.what());
  }

  s.pending.initial_decision = decision;
  s.pending.stamps.initial_submitted = at;
  s.pending.intervention = d.action;
  s.decision = d;
  s.last_event_at = at;
  if (d.pre_reveal_delay_ms > 0) {
    s.reveal_at = at + d.pre_reveal_delay_ms;
    s.stage = Stage::AwaitingReveal;
  } else {
    detail::reveal_at(s, at);
  }
  return Status::accepted();
}

/// Ends an "AI is thinking" embargo.
inline Status reveal(SessionState& s, Millis at) {
  if (auto st = detail::check_stage(s, Stage::AwaitingReveal); !st) return st;
  if (auto st = detail::check_time(s, at); !st) return st;
  if (at < s.reveal_at)
    return Status::rejected(RejectReason::GateNotElapsed, "advice still embargoed", s.reveal_at - at);
  s.last_event_at = at;
  detail::reveal_at(s, at);
  return Status::accepted();
}

inline Status submit_final(SessionState& s, int decision, Millis at) {
  if (auto st = detail::check_stage(s, Stage::AwaitingFinal); !st) return st;
  if (auto st = detail::check_time(s, at); !st) return st;
  if (at < s.final_deadline)
    return Status::rejected(RejectReason::GateNotElapsed, "final decision locked", s.final_deadline - at);
  if (!detail::valid_option(s, decision))
    return Status::rejected(RejectReason::InvalidDecision, "final decision is not a valid option");
  s.pending.final_decision = decision;
  s.pending.stamps.final_submitted = at;
  s.last_event_at = at;
  s.stage = Stage::AwaitingTrust;
  return Status::accepted();
}

inline Status submit_trust(SessionState& s, TrustLevel trust, Millis at) {
  if (auto st = detail::check_stage(s, Stage::AwaitingTrust); !st) return st;
  if (auto st = detail::check_time(s, at); !st) return st;
  if (!trust.in_range()) return Status::rejected(RejectReason::InvalidTrust, "trust must be an integer in 0..10");
  s.pending.trust_report = trust;
  s.pending.stamps.trust_submitted = at;
  s.session.interactions.push_back(s.pending);
  s.last_trust = trust;
  s.last_event_at = at;
  if (s.current_item + 1 >= s.n_items()) {
    s.stage = Stage::Finished;
  } else {
    ++s.current_item;
    detail::begin_round(s, at);
  }
  return Status::accepted();
}

/// Available once the final decision is in, until the trust report.
inline std::optional<RoundFeedback> round_feedback(const SessionState& s) {
  if (s.stage != Stage::AwaitingTrust) return std::nullopt;
  return RoundFeedback{s.pending.final_correct(), s.pending.ai_correct(), s.pending.correct_index};
}

/// The participant-visible advice, only while it is revealed.
inline std::optional<RecommendationView> current_view(const SessionState& s) {
  if (s.stage != Stage::AwaitingFinal && s.stage != Stage::AwaitingTrust) return std::nullopt;
  return attach(s.decision, s.item().recommendation, s.item().problem.problem_id);
}

/// Milliseconds until the gate guarding the next participant action opens.
inline Millis remaining_gate_ms(const SessionState& s, Millis now) {
  Millis deadline = 0;
  switch (s.stage) {
    case Stage::AwaitingInitial: deadline = s.reading_deadline; break;
    case Stage::AwaitingReveal: deadline = s.reveal_at; break;
    case Stage::AwaitingFinal: deadline = s.final_deadline; break;
    default: return 0;
  }
  return deadline > now ? deadline - now : 0;
}

// ---------------------------------------------------------------------------
// Event sourcing

enum class EventKind { Initial, Reveal, Final, Trust };

NLOHMANN_JSON_SERIALIZE_ENUM(EventKind, {{EventKind::Initial, "initial"},
                                         {EventKind::Reveal, "reveal"},
                                         {EventKind::Final, "final"},
                                         {EventKind::Trust, "trust"}})

struct SessionEvent {
  EventKind kind = EventKind::Initial;
  int value = 0;  // option index or trust; unused for reveal
  Millis at = 0;

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

inline void to_json(Json& j, const SessionEvent& e) { j = Json{{"kind", e.kind}, {"value", e.value}, {"at", e.at}}; }
inline void from_json(const Json& j, SessionEvent& e) {
  j.at("kind").get_to(e.kind);
  e.value = j.value("value", 0);
  j.at("at").get_to(e.at);
}

inline Status apply(SessionState& s, const SessionEvent& e) {
  switch (e.kind) {
    case EventKind::Initial: return submit_initial(s, e.value, e.at);
    case EventKind::Reveal: return reveal(s, e.at);
    case EventKind::Final: return submit_final(s, e.value, e.at);
    case EventKind::Trust: return submit_trust(s, TrustLevel{e.value}, e.at);
  }
  return Status::rejected(RejectReason::WrongStage, "unknown event");
}

/// Rebuilds a session from its accepted events. Throws if any event is
/// rejected, since an accepted log must replay cleanly.
inline SessionState replay(SessionState initial, const std::vector<SessionEvent>& events) {
  for (const auto& e : events)
    if (auto st = apply(initial, e); !st)
      throw DataError("replay: event rejected: " + st.rejection().message);
  return initial;
}

}  // namespace trustlab
