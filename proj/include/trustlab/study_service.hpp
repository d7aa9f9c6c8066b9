#pragma once

// Live-study service: condition assignment, protocol operations backed by
// the session engine, an append-only event log with replay recovery,
// settlement, and export. Transport-free; see study_http.hpp for routes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "trustlab/core.hpp"
#include "trustlab/error.hpp"
#include "trustlab/policy.hpp"
#include "trustlab/rng.hpp"
#include "trustlab/serialization.hpp"
#include "trustlab/session_engine.hpp"

namespace trustlab {

// ---------------------------------------------------------------------------
// Configuration

enum class AssistantSourceKind { Simulated, Llm };

NLOHMANN_JSON_SERIALIZE_ENUM(AssistantSourceKind, {{AssistantSourceKind::Simulated, "simulated"},
                                                   {AssistantSourceKind::Llm, "llm"}})

struct AssistantSource {
  AssistantSourceKind kind = AssistantSourceKind::Simulated;
  std::string profile_id;  // assistant profile or model name
};

struct StudyCondition {
  std::string condition_id;
  PolicyConfig policy;
  AssistantSource assistant;
};

struct PaymentConfig {
  double base = 1.0;
  double per_correct_bonus = 0.10;
};

struct StudyConfig {
  std::string study_id = "study";
  std::string task_setting = "ArcC";
  std::vector<StudyCondition> conditions;
  std::vector<std::string> sequence_files;  // JSONL of ProblemSequence, relative to the config file
  std::size_t target_per_condition = 30;
  PaymentConfig payment;
  double quality_gate = 0.35;  // minimum initial-decision accuracy kept for analysis
  EngineOptions engine;
  std::uint64_t seed = 0;

  void check() const {
    if (conditions.empty()) throw ConfigError("study config: at least one condition required");
    std::set<std::string> ids;
    for (const auto& c : conditions) {
      if (c.condition_id.empty()) throw ConfigError("study config: empty condition_id");
      if (!ids.insert(c.condition_id).second) throw ConfigError("study config: duplicate condition " + c.condition_id);
      c.policy.check();
    }
    if (payment.base < 0 || payment.per_correct_bonus < 0) throw ConfigError("study config: payments must be >= 0");
    if (!(quality_gate >= 0.0 && quality_gate <= 1.0)) throw ConfigError("study config: quality_gate must lie in [0, 1]");
  }
};

inline void to_json(Json& j, const StudyCondition& c) {
  j = Json{{"condition_id", c.condition_id},
           {"policy", c.policy},
           {"assistant", {{"kind", c.assistant.kind}, {"profile_id", c.assistant.profile_id}}}};
}

inline void from_json(const Json& j, StudyCondition& c) {
  j.at("condition_id").get_to(c.condition_id);
  j.at("policy").get_to(c.policy);
  if (j.contains("assistant")) {
    const auto& a = j.at("assistant");
    c.assistant.kind = a.value("kind", AssistantSourceKind::Simulated);
    if (a.contains("kind") && Json(c.assistant.kind) != a.at("kind"))
      throw ConfigError("unknown assistant source " + a.at("kind").dump());
    c.assistant.profile_id = a.value("profile_id", std::string());
  }
}

inline void to_json(Json& j, const StudyConfig& c) {
  j = Json{{"study_id", c.study_id},
           {"task_setting", c.task_setting},
           {"conditions", c.conditions},
           {"sequences", c.sequence_files},
           {"target_per_condition", c.target_per_condition},
           {"payment", {{"base", c.payment.base}, {"per_correct_bonus", c.payment.per_correct_bonus}}},
           {"quality_gate", c.quality_gate},
           {"engine", c.engine},
           {"seed", c.seed}};
}

inline void from_json(const Json& j, StudyConfig& c) {
  c = StudyConfig{};
  c.study_id = j.value("study_id", c.study_id);
  c.task_setting = j.value("task_setting", c.task_setting);
  j.at("conditions").get_to(c.conditions);
  c.sequence_files = j.value("sequences", std::vector<std::string>{});
  // Diagnosis settings default to the smaller cohort, $2 base, same bonus.
  const bool diagnosis = c.task_setting.rfind("Diag", 0) == 0;
  c.target_per_condition = j.value("target_per_condition", std::size_t{diagnosis ? 20u : 30u});
  if (diagnosis) c.payment.base = 2.0;
  if (j.contains("payment")) {
    c.payment.base = j.at("payment").value("base", c.payment.base);
    c.payment.per_correct_bonus = j.at("payment").value("per_correct_bonus", c.payment.per_correct_bonus);
  }
  c.quality_gate = j.value("quality_gate", c.quality_gate);
  if (j.contains("engine")) j.at("engine").get_to(c.engine);
  c.seed = j.value("seed", c.seed);
  c.check();
}

/// Reads a study config; sequence paths are resolved against its directory.
inline StudyConfig load_study_config(const std::filesystem::path& path) {
  StudyConfig c;
  try {
    c = read_json_file(path.string()).get<StudyConfig>();
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  for (auto& f : c.sequence_files)
    if (std::filesystem::path(f).is_relative()) f = (path.parent_path() / f).lexically_normal().string();
  return c;
}

inline std::vector<ProblemSequence> load_sequences(const std::vector<std::string>& files) {
  std::vector<ProblemSequence> out;
  for (const auto& f : files)
    for (auto& s : load_jsonl<ProblemSequence>(f)) out.push_back(std::move(s));
  return out;
}

// ---------------------------------------------------------------------------
// Assignment

struct Assignment {
  std::size_t condition = 0;
  std::size_t sequence = 0;
};

/// Least-filled condition (ties broken uniformly), sequence uniform.
inline Assignment assign_balanced(const std::vector<std::size_t>& condition_counts, std::size_t n_sequences,
                                  CounterRng& rng) {
  if (condition_counts.empty() || n_sequences == 0) throw ConfigError("assign: nothing to assign to");
  const auto low = *std::min_element(condition_counts.begin(), condition_counts.end());
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < condition_counts.size(); ++i)
    if (condition_counts[i] == low) tied.push_back(i);
  const auto c = tied[rng.uniform_index(tied.size())];
  return {c, rng.uniform_index(n_sequences)};
}

// ---------------------------------------------------------------------------
// Settlement

struct SettlementRecord {
  std::string session_id;
  std::string user_id;
  std::string condition_id;
  std::size_t rounds = 0;
  std::size_t correct_finals = 0;
  double initial_accuracy = 0.0;
  double base = 0.0;
  double bonus = 0.0;
  double total = 0.0;
  bool rejected_for_analysis = false;  // still paid
};

inline void to_json(Json& j, const SettlementRecord& r) {
  j = Json{{"session_id", r.session_id},
           {"user_id", r.user_id},
           {"condition_id", r.condition_id},
           {"rounds", r.rounds},
           {"correct_finals", r.correct_finals},
           {"initial_accuracy", r.initial_accuracy},
           {"base", r.base},
           {"bonus", r.bonus},
           {"total", r.total},
           {"rejected_for_analysis", r.rejected_for_analysis}};
}

inline SettlementRecord finalize_session(const Session& s, std::size_t expected_rounds, const PaymentConfig& pay,
                                         double quality_gate) {
  if (s.interactions.size() < expected_rounds || s.interactions.empty())
    throw ConflictError("session " + s.session_id + " is not finished");
  SettlementRecord r;
  r.session_id = s.session_id;
  r.user_id = s.user_id;
  r.condition_id = s.condition_id;
  r.rounds = s.interactions.size();
  std::size_t initial_correct = 0;
  for (const auto& it : s.interactions) {
    r.correct_finals += it.final_correct() ? 1 : 0;
    initial_correct += it.initial_correct() ? 1 : 0;
  }
  r.initial_accuracy = static_cast<double>(initial_correct) / static_cast<double>(r.rounds);
  r.base = pay.base;
  // whole cents, so $0.10 x 20 is exactly 2.00
  const auto cents = std::llround(pay.per_correct_bonus * 100.0) * static_cast<long long>(r.correct_finals);
  r.bonus = static_cast<double>(cents) / 100.0;
  r.total = r.base + r.bonus;
  r.rejected_for_analysis = r.initial_accuracy < quality_gate;
  return r;
}

// ---------------------------------------------------------------------------
// Event log records

inline constexpr const char* kQualityAttribute = "quality_gate";

struct LogRecord {
  std::string type;  // enroll | event | client
  Json body;
};

// ---------------------------------------------------------------------------
// Service

struct ApiResult {
  int status = 200;
  Json body = Json::object();
};

using Clock = std::function<Millis()>;

inline Millis wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

class StudyService {
public:
  /// Opens (or recovers) the study whose log lives under data_dir/study_id.
  StudyService(StudyConfig cfg, std::vector<ProblemSequence> sequences, std::filesystem::path data_dir,
               Clock clock = wall_clock_ms)
      : cfg_(std::move(cfg)), dir_(std::move(data_dir) / cfg_.study_id), clock_(std::move(clock)), root_(cfg_.seed) {
    cfg_.check();
    if (sequences.empty()) throw ConfigError("study " + cfg_.study_id + ": no sequences");
    for (auto& s : sequences) {
      if (auto v = validate(s); !v) throw DataError("sequence " + s.sequence_id + ": " + v.violations.front());
      const auto id = s.sequence_id;
      sequences_.push_back(std::make_shared<const ProblemSequence>(std::move(s)));
      seq_index_[id] = sequences_.size() - 1;
    }
    counts_.assign(cfg_.conditions.size(), 0);
    std::filesystem::create_directories(dir_);
    recover();
    log_.open(log_path(), std::ios::app);
    if (!log_) throw DataError("cannot open event log " + log_path().string());
  }

  const StudyConfig& config() const { return cfg_; }
  std::filesystem::path log_path() const { return dir_ / "events.jsonl"; }

  ApiResult create_session(const std::string& user_id, const std::map<std::string, std::string>& attributes = {}) {
    if (user_id.empty()) return error(400, "invalid_request", "user_id required");
    std::unique_lock lock(enroll_mu_);
    if (by_user_.count(user_id)) return error(409, "already_enrolled", "user " + user_id + " is already enrolled");
    auto rng = root_.split(by_user_.size());
    const auto a = assign_balanced(counts_, sequences_.size(), rng);
    const auto at = clock_();
    Json rec{{"user_id", user_id},
             {"session_id", token(rng)},
             {"condition_id", cfg_.conditions[a.condition].condition_id},
             {"sequence_id", sequences_[a.sequence]->sequence_id},
             {"attributes", attributes},
             {"at", at}};
    auto& entry = enroll(rec);
    append({"enroll", rec});
    return {201, Json{{"session_id", entry.state.session.session_id},
                      {"condition_id", entry.state.session.condition_id},
                      {"sequence_id", entry.state.session.sequence_id},
                      {"n_items", entry.state.n_items()}}};
  }

  ApiResult get_problem(const std::string& sid) {
    return with_session(sid, [&](Entry& e) -> ApiResult {
      const auto& s = e.state;
      if (s.stage == Stage::Finished) return {200, Json{{"finished", true}, {"n_items", s.n_items()}}};
      const auto& p = s.item().problem;
      Json body{{"finished", false},
                {"index", s.current_item},
                {"n_items", s.n_items()},
                {"problem_id", p.problem_id},
                {"prompt", p.prompt},
                {"options", p.options},
                {"stage", s.stage},
                {"remaining_ms", s.stage == Stage::AwaitingInitial ? remaining_gate_ms(s, clock_()) : 0}};
      if (s.last_trust) body["previous_trust"] = s.last_trust->value;
      return {200, body};
    });
  }

  ApiResult post_initial(const std::string& sid, const Json& decision) {
    if (!decision.is_number_integer()) return error(400, "invalid_decision", "decision must be an option index");
    return with_session(sid, [&](Entry& e) { return submit(e, {EventKind::Initial, decision.get<int>(), 0}); });
  }

  /// The policy-filtered advice, or a thinking placeholder while embargoed.
  ApiResult get_advice(const std::string& sid) {
    return with_session(sid, [&](Entry& e) -> ApiResult {
      auto& s = e.state;
      const auto now = clock_();
      if (s.stage == Stage::AwaitingReveal) {
        if (now < s.reveal_at) return {200, Json{{"status", "thinking"}, {"remaining_ms", s.reveal_at - now}}};
        if (auto r = submit(e, {EventKind::Reveal, 0, 0}); r.status != 200) return r;
      }
      const auto view = current_view(s);
      if (!view) return error(409, "wrong_stage", "advice is not available in this stage");
      return {200, Json{{"status", "ready"},
                        {"advice", *view},
                        {"intervention", s.decision.action},
                        {"remaining_ms", s.stage == Stage::AwaitingFinal ? remaining_gate_ms(s, clock_()) : 0}}};
    });
  }

  ApiResult post_final(const std::string& sid, const Json& decision) {
    if (!decision.is_number_integer()) return error(400, "invalid_decision", "decision must be an option index");
    return with_session(sid, [&](Entry& e) -> ApiResult {
      auto r = submit(e, {EventKind::Final, decision.get<int>(), 0});
      if (r.status != 200) return r;
      const auto fb = *round_feedback(e.state);
      r.body["feedback"] = {{"user_correct", fb.user_correct}, {"ai_correct", fb.ai_correct}, {"correct_index", fb.correct_index}};
      return r;
    });
  }

  ApiResult post_trust(const std::string& sid, const Json& trust) {
    if (!trust.is_number_integer()) return error(400, "invalid_trust", "trust must be an integer in 0..10");
    return with_session(sid, [&](Entry& e) { return submit(e, {EventKind::Trust, trust.get<int>(), 0}); });
  }

  ApiResult get_progress(const std::string& sid) {
    return with_session(sid, [&](Entry& e) -> ApiResult {
      const auto& s = e.state;
      std::size_t correct = 0;
      for (const auto& it : s.session.interactions) correct += it.final_correct() ? 1 : 0;
      return {200, Json{{"completed", s.session.interactions.size()},
                        {"n_items", s.n_items()},
                        {"stage", s.stage},
                        {"correct_finals", correct},
                        {"finished", s.stage == Stage::Finished}}};
    });
  }

  /// Client-side events (e.g. tab visibility); logged, never enforced.
  ApiResult post_client_event(const std::string& sid, const std::string& name, const Json& detail = nullptr) {
    if (name.empty()) return error(400, "invalid_request", "event name required");
    return with_session(sid, [&](Entry& e) -> ApiResult {
      Json rec{{"session_id", e.state.session.session_id}, {"name", name}, {"detail", detail}, {"at", clock_()}};
      append({"client", rec});
      ++e.client_events;
      return {204, Json::object()};
    });
  }

  ApiResult get_settlement(const std::string& sid) {
    return with_session(sid, [&](Entry& e) -> ApiResult {
      if (e.state.stage != Stage::Finished) return error(409, "unfinished", "session is not finished");
      return {200, Json(finalize_session(e.state.session, e.state.n_items(), cfg_.payment, cfg_.quality_gate))};
    });
  }

  /// Snapshot of sessions, each copied under its own lock. Unfinished
  /// sessions are dropouts and excluded unless asked for. Finished ones carry
  /// the quality-gate outcome as a user attribute.
  std::vector<Session> export_sessions(bool include_partial = false) const {
    std::shared_lock lock(map_mu_);
    std::vector<Session> out;
    for (const auto& sid : order_) {
      const auto& e = *sessions_.at(sid);
      std::lock_guard g(e.mu);
      if (e.state.stage != Stage::Finished) {
        if (include_partial) out.push_back(e.state.session);
        continue;
      }
      auto s = e.state.session;
      const auto rec = finalize_session(s, e.state.n_items(), cfg_.payment, cfg_.quality_gate);
      s.user_attributes[kQualityAttribute] = rec.rejected_for_analysis ? "rejected" : "pass";
      out.push_back(std::move(s));
    }
    return out;
  }

  std::vector<SettlementRecord> settlements() const {
    std::shared_lock lock(map_mu_);
    std::vector<SettlementRecord> out;
    for (const auto& sid : order_) {
      const auto& e = *sessions_.at(sid);
      std::lock_guard g(e.mu);
      if (e.state.stage == Stage::Finished)
        out.push_back(finalize_session(e.state.session, e.state.n_items(), cfg_.payment, cfg_.quality_gate));
    }
    return out;
  }

  std::map<std::string, std::size_t> condition_counts() const {
    std::unique_lock lock(enroll_mu_);
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < counts_.size(); ++i) out[cfg_.conditions[i].condition_id] = counts_[i];
    return out;
  }

  std::size_t client_event_count(const std::string& sid) const {
    std::shared_lock lock(map_mu_);
    const auto it = sessions_.find(sid);
    return it == sessions_.end() ? 0 : it->second->client_events;
  }

  /// Engine state for inspection (tests, recovery checks).
  std::optional<SessionState> state(const std::string& sid) const {
    std::shared_lock lock(map_mu_);
    const auto it = sessions_.find(sid);
    if (it == sessions_.end()) return std::nullopt;
    std::lock_guard g(it->second->mu);
    return it->second->state;
  }

private:
  struct Entry {
    mutable std::mutex mu;
    SessionState state;
    std::size_t client_events = 0;
  };

  static ApiResult error(int status, const std::string& reason, const std::string& message, Millis remaining = 0) {
    Json body{{"error", reason}, {"message", message}};
    if (remaining > 0) body["remaining_ms"] = remaining;
    return {status, body};
  }

  static std::string token(CounterRng& rng) {
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (int k = 0; k < 2; ++k) {
      auto v = rng();
      for (int i = 0; i < 16; ++i, v >>= 4) out += hex[v & 0xF];
    }
    return out;
  }

  template <typename F>
  ApiResult with_session(const std::string& sid, F&& f) {
    Entry* e = nullptr;
    {
      std::shared_lock lock(map_mu_);
      const auto it = sessions_.find(sid);
      if (it == sessions_.end()) return error(404, "unknown_session", "no session " + sid);
      e = it->second.get();
    }
    std::lock_guard g(e->mu);
    return f(*e);
  }

  // Caller holds the session lock. The server stamps the time; two requests
  // landing in the same millisecond are ordered one millisecond apart.
  ApiResult submit(Entry& e, SessionEvent ev) {
    ev.at = std::max(clock_(), e.state.last_event_at + 1);
    if (auto st = apply(e.state, ev); !st) {
      const auto& r = st.rejection();
      return error(r.is_data_error() ? 400 : 409, Json(r.reason).get<std::string>(), r.message, r.remaining_ms);
    }
    append({"event", Json{{"session_id", e.state.session.session_id}, {"event", ev}}});
    Json body{{"stage", e.state.stage}};
    if (e.state.stage == Stage::AwaitingReveal)
      body["remaining_ms"] = remaining_gate_ms(e.state, ev.at);
    return {200, body};
  }

  Entry& enroll(const Json& rec) {
    const auto sid = rec.at("session_id").get<std::string>();
    const auto cond_id = rec.at("condition_id").get<std::string>();
    const auto seq_id = rec.at("sequence_id").get<std::string>();
    const auto c = std::find_if(cfg_.conditions.begin(), cfg_.conditions.end(),
                                [&](const auto& x) { return x.condition_id == cond_id; });
    if (c == cfg_.conditions.end()) throw DataError("log references unknown condition " + cond_id);
    const auto sq = seq_index_.find(seq_id);
    if (sq == seq_index_.end()) throw DataError("log references unknown sequence " + seq_id);

    Session header;
    header.session_id = sid;
    header.user_id = rec.at("user_id").get<std::string>();
    header.condition_id = cond_id;
    header.assistant_profile_id = c->assistant.profile_id;
    header.user_attributes = rec.value("attributes", std::map<std::string, std::string>{});
    auto opts = cfg_.engine;
    if (c->assistant.kind == AssistantSourceKind::Llm) opts.fallback_on_missing_explanation = true;

    auto entry = std::make_unique<Entry>();
    entry->state = start_session(std::move(header), sequences_[sq->second], c->policy, opts, rec.at("at").get<Millis>());
    ++counts_[static_cast<std::size_t>(c - cfg_.conditions.begin())];
    by_user_[entry->state.session.user_id] = sid;
    std::unique_lock lock(map_mu_);
    order_.push_back(sid);
    return *(sessions_[sid] = std::move(entry));
  }

  void append(const LogRecord& r) {
    std::lock_guard g(log_mu_);
    Json line{{"schema_version", kSchemaVersion}, {"type", r.type}, {"body", r.body}};
    log_ << line.dump() << '\n';
    log_.flush();
    if (!log_) throw DataError("event log write failed");
  }

  void recover() {
    if (!std::filesystem::exists(log_path())) return;
    std::size_t n = 0;
    for (const auto& line : read_jsonl(log_path().string())) {
      ++n;
      if (line.value("schema_version", 0) != kSchemaVersion)
        throw DataError("event log line " + std::to_string(n) + ": unsupported schema_version");
      const auto type = line.at("type").get<std::string>();
      const auto& body = line.at("body");
      if (type == "enroll") {
        enroll(body);
      } else if (type == "event") {
        auto& e = *sessions_.at(body.at("session_id").get<std::string>());
        if (auto st = apply(e.state, body.at("event").get<SessionEvent>()); !st)
          throw DataError("event log line " + std::to_string(n) + " does not replay: " + st.rejection().message);
      } else if (type == "client") {
        ++sessions_.at(body.at("session_id").get<std::string>())->client_events;
      }
    }
  }

  StudyConfig cfg_;
  std::filesystem::path dir_;
  Clock clock_;
  CounterRng root_;  // enrollment n draws from stream n
  std::vector<std::shared_ptr<const ProblemSequence>> sequences_;
  std::map<std::string, std::size_t> seq_index_;

  mutable std::mutex enroll_mu_;
  std::vector<std::size_t> counts_;
  std::map<std::string, std::string> by_user_;

  mutable std::shared_mutex map_mu_;
  std::map<std::string, std::unique_ptr<Entry>> sessions_;
  std::vector<std::string> order_;

  std::mutex log_mu_;
  std::ofstream log_;
};

}  // namespace trustlab
