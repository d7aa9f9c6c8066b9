#pragma once

// Synthetic studies: synthetic users driven through the real protocol
// engine and policy, producing the same Session records a live study does.

#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "trustlab/core.hpp"
#include "trustlab/policy.hpp"
#include "trustlab/rng.hpp"
#include "trustlab/session_engine.hpp"
#include "trustlab/simuser.hpp"

namespace trustlab {

struct SimulatedCondition {
  std::string condition_id;
  PolicyConfig policy;
};

struct SimulationConfig {
  std::vector<SimulatedCondition> conditions;
  std::size_t users_per_condition = 30;
  UserModel user;
  EngineOptions engine;
  std::string assistant_profile_id;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// One synthetic user through one sequence. Response latencies are drawn
/// from the user's RNG stream, and every action waits out its gate.
inline Session simulate_session(const std::shared_ptr<const ProblemSequence>& sequence, const PolicyConfig& policy,
                                const UserModel& model, CounterRng rng, Session header,
                                const EngineOptions& engine = {}) {
  auto s = start_session(std::move(header), sequence, policy, engine, 0);
  TrustDynamics dynamics{model.initial_tau};
  auto latency = [&rng](Millis lo, Millis hi) {
    return lo + static_cast<Millis>(rng.uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
  };
  auto must = [](const Status& st) {
    if (!st) throw Error("simulation produced a rejected event: " + st.rejection().message);
  };
  while (!s.finished()) {
    const auto& problem = s.item().problem;
    const int initial = act_initial(model, problem, rng);
    must(submit_initial(s, initial, s.reading_deadline + latency(500, 8'000)));
    if (s.stage == Stage::AwaitingReveal) must(reveal(s, s.reveal_at));
    const auto view = *current_view(s);
    const int final_choice =
        act_final(model, problem, initial, view, s.decision, s.last_trust.value_or(report_from_tau(model.initial_tau)), rng);
    const Millis earliest = std::max(s.final_deadline, s.pending.stamps.advice_shown + 1);
    must(submit_final(s, final_choice, earliest + latency(300, 6'000)));
    const auto fb = *round_feedback(s);
    const auto trust = update_trust(model, dynamics, fb.ai_correct, fb.user_correct, rng);
    must(submit_trust(s, trust, s.last_event_at + latency(500, 4'000)));
  }
  return std::move(s.session);
}

/// users_per_condition synthetic users per condition, each assigned a
/// sequence uniformly at random. User u of condition c draws from stream
/// (c, u) of the seed, so output does not depend on the thread count.
inline std::vector<Session> simulate_study(const SimulationConfig& cfg,
                                          const std::vector<ProblemSequence>& sequences) {
  if (sequences.empty()) throw ConfigError("simulate_study: no sequences");
  if (cfg.conditions.empty()) throw ConfigError("simulate_study: no conditions");
  cfg.user.check();
  std::vector<std::shared_ptr<const ProblemSequence>> shared;
  for (const auto& s : sequences) shared.push_back(std::make_shared<const ProblemSequence>(s));

  const std::size_t n_users = cfg.conditions.size() * cfg.users_per_condition;
  std::vector<Session> out(n_users);
  const CounterRng root(cfg.seed);

  auto run_one = [&](std::size_t k) {
    const auto c = k / cfg.users_per_condition;
    const auto u = k % cfg.users_per_condition;
    CounterRng rng = root.split(c).split(u);
    const auto& seq = shared[rng.uniform_index(shared.size())];
    Session header;
    header.user_id = cfg.conditions[c].condition_id + "-u" + std::to_string(u);
    header.session_id = header.user_id + "-s";
    header.condition_id = cfg.conditions[c].condition_id;
    header.assistant_profile_id = cfg.assistant_profile_id;
    header.user_attributes["user_model"] = cfg.user.preset;
    out[k] = simulate_session(seq, cfg.conditions[c].policy, cfg.user, rng, std::move(header), cfg.engine);
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(n_users)));
  if (threads == 1) {
    for (std::size_t k = 0; k < n_users; ++k) run_one(k);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t k = t; k < n_users; k += threads) run_one(k);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Sessions of one condition.
inline std::vector<Session> sessions_of(const std::vector<Session>& all, const std::string& condition_id) {
  std::vector<Session> out;
  for (const auto& s : all)
    if (s.condition_id == condition_id) out.push_back(s);
  return out;
}

}  // namespace trustlab
