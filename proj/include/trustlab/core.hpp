#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace trustlab {

/// Milliseconds since session start.
using Millis = std::int64_t;

inline constexpr int kMinTrust = 0;
inline constexpr int kMaxTrust = 10;
inline constexpr std::size_t kDefaultSequenceLength = 30;

enum class TaskId { Arc, Diagnosis, Custom };

enum class Intervention { None, ShowSupport, ShowCounter, AiThinking, ForcedPause };

enum class ExplanationKind { Support, Counter };

inline constexpr std::array<Intervention, 5> kAllInterventions = {
    Intervention::None, Intervention::ShowSupport, Intervention::ShowCounter,
    Intervention::AiThinking, Intervention::ForcedPause};

constexpr std::string_view to_string(TaskId t) noexcept {
  switch (t) {
    case TaskId::Arc: return "ARC";
    case TaskId::Diagnosis: return "Diagnosis";
    case TaskId::Custom: return "custom";
  }
  return "custom";
}

constexpr std::string_view to_string(ExplanationKind k) noexcept {
  return k == ExplanationKind::Support ? "support" : "counter";
}

constexpr std::string_view to_string(Intervention i) noexcept {
  switch (i) {
    case Intervention::None: return "None";
    case Intervention::ShowSupport: return "ShowSupport";
    case Intervention::ShowCounter: return "ShowCounter";
    case Intervention::AiThinking: return "AiThinking";
    case Intervention::ForcedPause: return "ForcedPause";
  }
  return "None";
}

struct Problem {
  std::string problem_id;
  TaskId task = TaskId::Custom;
  std::string prompt;
  std::vector<std::string> options;
  int correct_index = 0;

  friend bool operator==(const Problem&, const Problem&) = default;
};

struct Recommendation {
  int prediction_index = 0;
  double confidence = 0.5;  // continuous; shown to participants via display_percent
  std::optional<std::string> support_explanation;
  std::optional<std::string> counter_explanation;

  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

/// Self-reported trust, 0..10. Constructible out of range so that raw
/// reports can be validated rather than silently clamped.
struct TrustLevel {
  int value = 0;

  constexpr bool in_range() const noexcept { return value >= kMinTrust && value <= kMaxTrust; }
  friend constexpr auto operator<=>(const TrustLevel&, const TrustLevel&) = default;
};

/// Stage times of one round, in this order. advice_shown equals
/// initial_submitted when the advice is revealed without an embargo.
struct StageTimestamps {
  Millis problem_shown = 0;
  Millis initial_submitted = 0;
  Millis advice_shown = 0;
  Millis final_submitted = 0;
  Millis trust_submitted = 0;

  friend bool operator==(const StageTimestamps&, const StageTimestamps&) = default;
};

struct Interaction {
  int index = 0;
  std::string problem_id;
  int option_count = 2;
  int correct_index = 0;
  Recommendation recommendation;
  int initial_decision = 0;
  int final_decision = 0;
  TrustLevel trust_report;
  Intervention intervention = Intervention::None;
  StageTimestamps stamps;

  bool ai_correct() const noexcept { return recommendation.prediction_index == correct_index; }
  bool initial_correct() const noexcept { return initial_decision == correct_index; }
  bool final_correct() const noexcept { return final_decision == correct_index; }
  bool disagreed() const noexcept { return initial_decision != recommendation.prediction_index; }
  bool switched_to_ai() const noexcept {
    return disagreed() && final_decision == recommendation.prediction_index;
  }

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct Session {
  std::string session_id;
  std::string user_id;
  std::string condition_id;
  std::string sequence_id;
  std::string assistant_profile_id;
  std::map<std::string, std::string> user_attributes;
  std::vector<Interaction> interactions;

  friend bool operator==(const Session&, const Session&) = default;
};

struct SequenceItem {
  Problem problem;
  Recommendation recommendation;

  friend bool operator==(const SequenceItem&, const SequenceItem&) = default;
};

struct ProblemSequence {
  std::string sequence_id;
  std::vector<SequenceItem> items;

  friend bool operator==(const ProblemSequence&, const ProblemSequence&) = default;
};

/// Whole percentage shown to participants, rounded half-up.
inline int display_percent(double confidence) noexcept {
  return static_cast<int>(std::floor(confidence * 100.0 + 0.5));
}

// ---------------------------------------------------------------------------
// Validation. Violations are data: each check appends a message and never
// throws or mutates its argument.

struct ValidationResult {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
  explicit operator bool() const noexcept { return ok(); }
  void merge(const ValidationResult& other, std::string_view prefix = {}) {
    for (const auto& v : other.violations) violations.push_back(std::string(prefix) + v);
  }
  friend bool operator==(const ValidationResult&, const ValidationResult&) = default;
};

inline ValidationResult validate(const Problem& p) {
  ValidationResult r;
  const auto n = static_cast<int>(p.options.size());
  if (n < 2) r.violations.emplace_back("fewer than 2 options");
  if (p.task == TaskId::Arc && n != 2) r.violations.emplace_back("ARC problem must have exactly 2 options");
  if (p.task == TaskId::Diagnosis && n != 4)
    r.violations.emplace_back("Diagnosis problem must have exactly 4 options");
  if (p.correct_index < 0 || p.correct_index >= n) r.violations.emplace_back("correct_index out of range");
  if (std::set<std::string>(p.options.begin(), p.options.end()).size() != p.options.size())
    r.violations.emplace_back("option texts not distinct");
  if (p.problem_id.empty()) r.violations.emplace_back("empty problem_id");
  return r;
}

inline ValidationResult validate(const Recommendation& rec) {
  ValidationResult r;
  if (!(rec.confidence >= 0.5)) r.violations.emplace_back("confidence below 0.5");
  if (!(rec.confidence <= 1.0)) r.violations.emplace_back("confidence above 1.0");
  if (rec.prediction_index < 0) r.violations.emplace_back("negative prediction_index");
  return r;
}

inline ValidationResult validate(const Recommendation& rec, const Problem& p) {
  ValidationResult r = validate(rec);
  if (rec.prediction_index >= static_cast<int>(p.options.size()))
    r.violations.emplace_back("prediction_index out of range for problem " + p.problem_id);
  return r;
}

inline ValidationResult validate(const TrustLevel& t) {
  ValidationResult r;
  if (!t.in_range()) r.violations.emplace_back("trust outside 0..10");
  return r;
}

inline ValidationResult validate(const Interaction& it) {
  ValidationResult r;
  const auto& s = it.stamps;
  if (!(s.problem_shown < s.initial_submitted)) r.violations.emplace_back("initial_submitted not after problem_shown");
  if (!(s.initial_submitted <= s.advice_shown)) r.violations.emplace_back("advice_shown before initial_submitted");
  if (!(s.advice_shown < s.final_submitted)) r.violations.emplace_back("final_submitted not after advice_shown");
  if (!(s.final_submitted < s.trust_submitted)) r.violations.emplace_back("trust_submitted not after final_submitted");
  auto valid_index = [&](int i) { return i >= 0 && i < it.option_count; };
  if (it.option_count < 2) r.violations.emplace_back("fewer than 2 options");
  if (!valid_index(it.initial_decision)) r.violations.emplace_back("initial_decision out of range");
  if (!valid_index(it.final_decision)) r.violations.emplace_back("final_decision out of range");
  if (!valid_index(it.correct_index)) r.violations.emplace_back("correct_index out of range");
  if (!valid_index(it.recommendation.prediction_index))
    r.violations.emplace_back("prediction_index out of range");
  r.merge(validate(it.recommendation));
  r.merge(validate(it.trust_report));
  return r;
}

inline ValidationResult validate(const Session& s, std::size_t max_length = kDefaultSequenceLength) {
  ValidationResult r;
  if (s.interactions.size() > max_length) r.violations.emplace_back("session longer than configured N");
  for (std::size_t i = 0; i < s.interactions.size(); ++i) {
    const auto& it = s.interactions[i];
    const auto prefix = "interaction " + std::to_string(i) + ": ";
    if (it.index != static_cast<int>(i)) r.violations.push_back(prefix + "index gap or reorder");
    r.merge(validate(it), prefix);
  }
  return r;
}

inline ValidationResult validate(const ProblemSequence& seq) {
  ValidationResult r;
  if (seq.items.empty()) r.violations.emplace_back("empty sequence");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < seq.items.size(); ++i) {
    const auto prefix = "item " + std::to_string(i) + ": ";
    r.merge(validate(seq.items[i].problem), prefix);
    r.merge(validate(seq.items[i].recommendation, seq.items[i].problem), prefix);
    if (!seen.insert(seq.items[i].problem.problem_id).second) r.violations.push_back(prefix + "duplicate problem");
  }
  return r;
}

}  // namespace trustlab
