#pragma once

// JSON mapping of the domain types. This is the on-disk and on-wire format
// shared by fixtures, the event log, exports, and the HTTP API.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "trustlab/core.hpp"
#include "trustlab/error.hpp"

namespace trustlab {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

NLOHMANN_JSON_SERIALIZE_ENUM(TaskId, {{TaskId::Custom, "custom"},
                                      {TaskId::Arc, "ARC"},
                                      {TaskId::Diagnosis, "Diagnosis"}})

NLOHMANN_JSON_SERIALIZE_ENUM(Intervention, {{Intervention::None, "None"},
                                            {Intervention::ShowSupport, "ShowSupport"},
                                            {Intervention::ShowCounter, "ShowCounter"},
                                            {Intervention::AiThinking, "AiThinking"},
                                            {Intervention::ForcedPause, "ForcedPause"}})

NLOHMANN_JSON_SERIALIZE_ENUM(ExplanationKind, {{ExplanationKind::Support, "support"},
                                               {ExplanationKind::Counter, "counter"}})

namespace detail {

template <typename T>
void put_optional(Json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> get_optional(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace detail

inline void to_json(Json& j, const Problem& p) {
  j = Json{{"problem_id", p.problem_id}, {"task_id", p.task},       {"prompt", p.prompt},
           {"options", p.options},       {"correct_index", p.correct_index}};
}
inline void from_json(const Json& j, Problem& p) {
  j.at("problem_id").get_to(p.problem_id);
  j.at("task_id").get_to(p.task);
  j.at("prompt").get_to(p.prompt);
  j.at("options").get_to(p.options);
  j.at("correct_index").get_to(p.correct_index);
}

inline void to_json(Json& j, const Recommendation& r) {
  j = Json{{"prediction_index", r.prediction_index}, {"confidence", r.confidence}};
  detail::put_optional(j, "support_explanation", r.support_explanation);
  detail::put_optional(j, "counter_explanation", r.counter_explanation);
}
inline void from_json(const Json& j, Recommendation& r) {
  j.at("prediction_index").get_to(r.prediction_index);
  j.at("confidence").get_to(r.confidence);
  r.support_explanation = detail::get_optional<std::string>(j, "support_explanation");
  r.counter_explanation = detail::get_optional<std::string>(j, "counter_explanation");
}

inline void to_json(Json& j, const TrustLevel& t) { j = t.value; }
inline void from_json(const Json& j, TrustLevel& t) {
  if (!j.is_number_integer()) throw DataError("trust must be an integer");
  t.value = j.get<int>();
}

inline void to_json(Json& j, const StageTimestamps& s) {
  j = Json{{"problem_shown", s.problem_shown},     {"initial_submitted", s.initial_submitted},
           {"advice_shown", s.advice_shown},       {"final_submitted", s.final_submitted},
           {"trust_submitted", s.trust_submitted}};
}
inline void from_json(const Json& j, StageTimestamps& s) {
  j.at("problem_shown").get_to(s.problem_shown);
  j.at("initial_submitted").get_to(s.initial_submitted);
  j.at("advice_shown").get_to(s.advice_shown);
  j.at("final_submitted").get_to(s.final_submitted);
  j.at("trust_submitted").get_to(s.trust_submitted);
}

inline void to_json(Json& j, const Interaction& it) {
  j = Json{{"index", it.index},
           {"problem_id", it.problem_id},
           {"option_count", it.option_count},
           {"correct_index", it.correct_index},
           {"recommendation", it.recommendation},
           {"initial_decision", it.initial_decision},
           {"final_decision", it.final_decision},
           {"trust_report", it.trust_report},
           {"intervention", it.intervention},
           {"stage_timestamps", it.stamps}};
}
inline void from_json(const Json& j, Interaction& it) {
  j.at("index").get_to(it.index);
  j.at("problem_id").get_to(it.problem_id);
  j.at("option_count").get_to(it.option_count);
  j.at("correct_index").get_to(it.correct_index);
  j.at("recommendation").get_to(it.recommendation);
  j.at("initial_decision").get_to(it.initial_decision);
  j.at("final_decision").get_to(it.final_decision);
  j.at("trust_report").get_to(it.trust_report);
  j.at("intervention").get_to(it.intervention);
  j.at("stage_timestamps").get_to(it.stamps);
}

inline void to_json(Json& j, const Session& s) {
  j = Json{{"schema_version", kSchemaVersion},
           {"session_id", s.session_id},
           {"user_id", s.user_id},
           {"condition_id", s.condition_id},
           {"sequence_id", s.sequence_id},
           {"assistant_profile_id", s.assistant_profile_id},
           {"user_attributes", s.user_attributes},
           {"interactions", s.interactions}};
}
inline void from_json(const Json& j, Session& s) {
  if (j.value("schema_version", 0) != kSchemaVersion) throw DataError("unsupported session schema_version");
  j.at("session_id").get_to(s.session_id);
  j.at("user_id").get_to(s.user_id);
  j.at("condition_id").get_to(s.condition_id);
  j.at("sequence_id").get_to(s.sequence_id);
  j.at("assistant_profile_id").get_to(s.assistant_profile_id);
  s.user_attributes = j.value("user_attributes", std::map<std::string, std::string>{});
  j.at("interactions").get_to(s.interactions);
}

inline void to_json(Json& j, const SequenceItem& it) {
  j = Json{{"problem", it.problem}, {"recommendation", it.recommendation}};
}
inline void from_json(const Json& j, SequenceItem& it) {
  j.at("problem").get_to(it.problem);
  j.at("recommendation").get_to(it.recommendation);
}

inline void to_json(Json& j, const ProblemSequence& s) {
  j = Json{{"schema_version", kSchemaVersion}, {"sequence_id", s.sequence_id}, {"items", s.items}};
}
inline void from_json(const Json& j, ProblemSequence& s) {
  if (j.value("schema_version", 0) != kSchemaVersion) throw DataError("unsupported sequence schema_version");
  j.at("sequence_id").get_to(s.sequence_id);
  j.at("items").get_to(s.items);
}

// ---------------------------------------------------------------------------
// Line-delimited JSON helpers.

inline std::vector<Json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<Json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

template <typename T>
void write_jsonl(const std::string& path, const std::vector<T>& values) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& v : values) out << Json(v).dump() << '\n';
}

template <typename T>
std::vector<T> load_jsonl(const std::string& path) {
  std::vector<T> out;
  std::size_t row = 0;
  for (const auto& j : read_jsonl(path)) {
    ++row;
    try {
      out.push_back(j.get<T>());
    } catch (const Json::exception& e) {
      throw DataError(path + ": row " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace trustlab
