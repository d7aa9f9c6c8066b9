#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include "test_support.hpp"
#include "trustlab/assistant_sim.hpp"
#include "trustlab/study_http.hpp"
#include "trustlab/study_service.hpp"

using namespace trustlab;
using trustlab::testing::make_interaction;
using trustlab::testing::make_pool;

namespace {

struct ManualClock {
  std::shared_ptr<std::atomic<Millis>> now = std::make_shared<std::atomic<Millis>>(1'000'000);
  Clock fn() const {
    auto n = now;
    return [n] { return n->load(); };
  }
  void advance(Millis ms) const { *now += ms; }
};

std::filesystem::path fresh_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("trustlab_" + name);
  std::filesystem::remove_all(d);
  return d;
}

std::vector<ProblemSequence> sequences(std::size_t n = 10, std::size_t len = 30, int n_options = 2) {
  AssistantProfile prof;
  prof.profile_id = "cal";
  return generate_sequences(make_pool(60, n_options), prof, n, len, 3);
}

StudyConfig config(std::vector<PolicyKind> kinds = {PolicyKind::NoIntervention, PolicyKind::BothAdaptive,
                                                    PolicyKind::ThinkingAndPauseAdaptive}) {
  StudyConfig c;
  c.study_id = "t";
  for (auto k : kinds) {
    StudyCondition cond;
    cond.condition_id = to_string(k);
    cond.policy.kind = k;
    cond.assistant.profile_id = "cal";
    c.conditions.push_back(cond);
  }
  return c;
}

// One full round through the API, waiting out every gate on the manual clock.
Json play_round(StudyService& svc, const ManualClock& clock, const std::string& sid, int initial, int final_choice,
                int trust) {
  const auto prob = svc.get_problem(sid);
  EXPECT_EQ(prob.status, 200);
  clock.advance(prob.body.at("remaining_ms").get<Millis>());
  EXPECT_EQ(svc.post_initial(sid, initial).status, 200);
  auto adv = svc.get_advice(sid);
  if (adv.body.at("status") == "thinking") {
    clock.advance(adv.body.at("remaining_ms").get<Millis>());
    adv = svc.get_advice(sid);
  }
  EXPECT_EQ(adv.body.at("status"), "ready");
  clock.advance(adv.body.at("remaining_ms").get<Millis>());
  EXPECT_EQ(svc.post_final(sid, final_choice).status, 200);
  EXPECT_EQ(svc.post_trust(sid, trust).status, 200);
  return adv.body;
}

}  // namespace

TEST(StudyConfig, JsonDefaultsAndValidation) {
  const auto arc = Json::parse(R"({"task_setting":"ArcC","conditions":[{"condition_id":"a","policy":{"kind":"BothAdaptive"}}]})")
                       .get<StudyConfig>();
  EXPECT_EQ(arc.target_per_condition, 30u);
  EXPECT_DOUBLE_EQ(arc.payment.base, 1.0);
  EXPECT_DOUBLE_EQ(arc.payment.per_correct_bonus, 0.10);
  const auto dx = Json::parse(R"({"task_setting":"DiagC","conditions":[{"condition_id":"a","policy":{"kind":"NoIntervention"}}]})")
                      .get<StudyConfig>();
  EXPECT_EQ(dx.target_per_condition, 20u);
  EXPECT_DOUBLE_EQ(dx.payment.base, 2.0);
  EXPECT_THROW(Json::parse(R"({"conditions":[]})").get<StudyConfig>(), ConfigError);
  EXPECT_THROW(Json::parse(R"({"conditions":[{"condition_id":"a","policy":{"kind":"NoIntervention"}}],"payment":{"base":-1}})")
                   .get<StudyConfig>(),
               ConfigError);
  const auto round = Json(arc).get<StudyConfig>();
  EXPECT_EQ(Json(round), Json(arc));
}

TEST(Assigner, LeastFilledWins) {
  CounterRng rng(1);
  EXPECT_EQ(assign_balanced({10, 10, 9}, 10, rng).condition, 2u);
}

TEST(Assigner, SequencesUniform) {
  CounterRng root(2);
  std::vector<std::size_t> hits(10, 0), counts(3, 0);
  for (std::size_t i = 0; i < 1000; ++i) {
    auto rng = root.split(i);
    const auto a = assign_balanced(counts, 10, rng);
    ++counts[a.condition];
    ++hits[a.sequence];
  }
  for (auto h : hits) EXPECT_NEAR(h / 1000.0, 0.1, 0.03);
  EXPECT_LE(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()), 1u);
}

TEST(StudyService, BalancedEnrollmentAndConflict) {
  ManualClock clock;
  StudyService svc(config(), sequences(), fresh_dir("balance"), clock.fn());
  for (int u = 0; u < 100; ++u) {
    EXPECT_EQ(svc.create_session("user" + std::to_string(u)).status, 201);
    std::size_t lo = 1000, hi = 0;
    for (const auto& [_, n] : svc.condition_counts()) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    EXPECT_LE(hi - lo, 1u);
  }
  const auto again = svc.create_session("user3");
  EXPECT_EQ(again.status, 409);
  EXPECT_EQ(again.body.at("error"), "already_enrolled");
}

TEST(StudyService, GatesSurfaceRemainingTime) {
  ManualClock clock;
  StudyService svc(config({PolicyKind::SupportAlways}), sequences(), fresh_dir("gates"), clock.fn());
  const auto sid = svc.create_session("u").body.at("session_id").get<std::string>();
  EXPECT_EQ(svc.get_problem(sid).body.at("remaining_ms"), 10'000);
  clock.advance(4'000);
  auto r = svc.post_initial(sid, 0);
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(r.body.at("error"), "gate_not_elapsed");
  EXPECT_EQ(r.body.at("remaining_ms"), 6'000);
  clock.advance(6'000);
  EXPECT_EQ(svc.post_initial(sid, 0).status, 200);
  EXPECT_EQ(svc.get_advice(sid).body.at("remaining_ms"), 15'000);
  clock.advance(14'999);
  r = svc.post_final(sid, 0);
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(r.body.at("remaining_ms"), 1);
  clock.advance(1);
  r = svc.post_final(sid, 0);
  ASSERT_EQ(r.status, 200);
  EXPECT_TRUE(r.body.at("feedback").contains("ai_correct"));
  EXPECT_EQ(svc.post_initial(sid, 0).body.at("error"), "wrong_stage");
  EXPECT_EQ(svc.post_trust(sid, 11).status, 400);
  EXPECT_EQ(svc.post_trust(sid, 7.5).status, 400);
  EXPECT_EQ(svc.post_trust(sid, "7").status, 400);
  EXPECT_EQ(svc.post_trust(sid, 7).status, 200);
  const auto next = svc.get_problem(sid).body;
  EXPECT_EQ(next.at("index"), 1);
  EXPECT_EQ(next.at("previous_trust"), 7);
}

TEST(StudyService, ThinkingPlaceholderDuringEmbargo) {
  ManualClock clock;
  StudyService svc(config({PolicyKind::ThinkingAdaptive}), sequences(), fresh_dir("thinking"), clock.fn());
  const auto sid = svc.create_session("u").body.at("session_id").get<std::string>();
  play_round(svc, clock, sid, 0, 0, 2);  // low trust arms the embargo for round 2
  clock.advance(svc.get_problem(sid).body.at("remaining_ms").get<Millis>());
  ASSERT_EQ(svc.post_initial(sid, 0).status, 200);
  clock.advance(3'000);
  const auto adv = svc.get_advice(sid);
  EXPECT_EQ(adv.body.at("status"), "thinking");
  EXPECT_EQ(adv.body.at("remaining_ms"), 7'000);
  EXPECT_FALSE(adv.body.contains("advice"));
  EXPECT_EQ(svc.post_final(sid, 0).body.at("error"), "wrong_stage");
  clock.advance(7'000);
  EXPECT_EQ(svc.get_advice(sid).body.at("status"), "ready");
}

TEST(StudyService, UnknownSessionIs404) {
  ManualClock clock;
  StudyService svc(config(), sequences(), fresh_dir("404"), clock.fn());
  EXPECT_EQ(svc.get_problem("nope").status, 404);
}

TEST(StudyService, InformationHidingPerPolicyKind) {
  for (auto kind : kAllPolicyKinds) {
    ManualClock clock;
    StudyService svc(config({kind}), sequences(), fresh_dir("hide"), clock.fn());
    const auto sid = svc.create_session("u").body.at("session_id").get<std::string>();
    std::optional<TrustLevel> prior;
    CounterRng rng(static_cast<std::uint64_t>(kind));
    for (int round = 0; round < 30; ++round) {
      const auto prob = svc.get_problem(sid).body;
      for (const char* hidden : {"recommendation", "correct_index", "confidence", "support_explanation", "counter_explanation"})
        EXPECT_FALSE(prob.contains(hidden)) << hidden;
      const int trust = static_cast<int>(rng.uniform_index(11));
      const auto adv = play_round(svc, clock, sid, 0, 1, trust);
      const auto action = decide(PolicyConfig{kind}, prior).action;
      const auto& view = adv.at("advice");
      const bool shows = action == Intervention::ShowSupport || action == Intervention::ShowCounter;
      EXPECT_EQ(view.contains("explanation"), shows) << to_string(kind) << " round " << round;
      if (shows) {
        EXPECT_EQ(view.at("explanation_kind"), action == Intervention::ShowSupport ? "support" : "counter");
      }
      EXPECT_FALSE(view.contains("support_explanation"));
      EXPECT_FALSE(view.contains("counter_explanation"));
      prior = TrustLevel{trust};
    }
    EXPECT_TRUE(svc.get_progress(sid).body.at("finished"));
  }
}

TEST(Settlement, BonusArithmetic) {
  Session s;
  s.session_id = "s";
  for (int i = 0; i < 30; ++i) s.interactions.push_back(make_interaction(i, 0, 0, i < 15 ? 0 : 1, i < 20 ? 0 : 1, 5));
  const auto r = finalize_session(s, 30, PaymentConfig{}, 0.35);
  EXPECT_EQ(r.correct_finals, 20u);
  EXPECT_DOUBLE_EQ(r.bonus, 2.00);
  EXPECT_DOUBLE_EQ(r.total, 3.00);
  EXPECT_FALSE(r.rejected_for_analysis);
}

TEST(Settlement, ZeroCorrectStillPaysBase) {
  Session s;
  for (int i = 0; i < 30; ++i) s.interactions.push_back(make_interaction(i, 0, 1, 1, 1, 5));
  const auto r = finalize_session(s, 30, PaymentConfig{}, 0.35);
  EXPECT_DOUBLE_EQ(r.bonus, 0.0);
  EXPECT_DOUBLE_EQ(r.total, 1.0);
}

TEST(Settlement, ChanceLevelInitialAccuracyFlagged) {
  Session s;
  for (int i = 0; i < 20; ++i) s.interactions.push_back(make_interaction(i, 0, 0, i % 4 == 0 ? 0 : 1, 0, 5, 4));
  const auto r = finalize_session(s, 20, PaymentConfig{2.0, 0.10}, 0.35);
  EXPECT_DOUBLE_EQ(r.initial_accuracy, 0.25);
  EXPECT_TRUE(r.rejected_for_analysis);
  EXPECT_DOUBLE_EQ(r.base, 2.0);
  EXPECT_THROW(finalize_session(s, 30, PaymentConfig{}, 0.35), ConflictError);
}

TEST(StudyService, SettlementRequiresFinishedSession) {
  ManualClock clock;
  StudyService svc(config(), sequences(3, 2), fresh_dir("settle"), clock.fn());
  const auto sid = svc.create_session("u").body.at("session_id").get<std::string>();
  EXPECT_EQ(svc.get_settlement(sid).status, 409);
  play_round(svc, clock, sid, 0, 0, 5);
  play_round(svc, clock, sid, 0, 0, 5);
  const auto r = svc.get_settlement(sid);
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body.at("rounds"), 2);
}

TEST(StudyService, KillAndRestartRecoversExactState) {
  ManualClock clock;
  const auto dir = fresh_dir("recover");
  std::vector<std::string> sids;
  std::map<std::string, Json> before;
  {
    StudyService svc(config(), sequences(), dir, clock.fn());
    for (int u = 0; u < 6; ++u) sids.push_back(svc.create_session("u" + std::to_string(u)).body.at("session_id"));
    for (std::size_t k = 0; k < sids.size(); ++k)
      for (std::size_t r = 0; r < k * 3; ++r) play_round(svc, clock, sids[k], 0, static_cast<int>(r % 2), static_cast<int>(r % 11));
    // leave one session mid-round with an embargo or gate pending
    clock.advance(10'000);
    svc.post_initial(sids[5], 1);
    svc.post_client_event(sids[2], "tab_hidden", Json{{"ms", 1200}});
    for (const auto& sid : sids) {
      const auto st = *svc.state(sid);
      before[sid] = Json{{"session", st.session}, {"stage", st.stage}, {"item", st.current_item},
                         {"last", st.last_event_at}, {"pending", st.pending}, {"decision", st.decision}};
    }
  }  // service destroyed without any shutdown step
  StudyService again(config(), sequences(), dir, clock.fn());
  for (const auto& sid : sids) {
    const auto st = *again.state(sid);
    const Json after{{"session", st.session}, {"stage", st.stage}, {"item", st.current_item},
                     {"last", st.last_event_at}, {"pending", st.pending}, {"decision", st.decision}};
    EXPECT_EQ(after, before[sid]) << sid;
  }
  EXPECT_EQ(again.client_event_count(sids[2]), 1u);
  EXPECT_EQ(again.create_session("u0").status, 409);
  EXPECT_EQ(again.create_session("u6").status, 201);
  // the recovered session keeps going
  play_round(again, clock, sids[0], 0, 0, 5);
}

TEST(StudyService, ExportCountsAndRoundTrip) {
  ManualClock clock;
  StudyService svc(config(), sequences(), fresh_dir("export"), clock.fn());
  CounterRng rng(9);
  for (int u = 0; u < 90; ++u) {
    const auto sid = svc.create_session("u" + std::to_string(u)).body.at("session_id").get<std::string>();
    for (int r = 0; r < 30; ++r)
      play_round(svc, clock, sid, static_cast<int>(rng.uniform_index(2)), static_cast<int>(rng.uniform_index(2)),
                 static_cast<int>(rng.uniform_index(11)));
  }
  const auto dropout = svc.create_session("dropout").body.at("session_id").get<std::string>();
  play_round(svc, clock, dropout, 0, 0, 5);

  const auto sessions = svc.export_sessions();
  ASSERT_EQ(sessions.size(), 90u);
  std::size_t n = 0;
  for (const auto& s : sessions) {
    n += s.interactions.size();
    EXPECT_TRUE(validate(s).ok());
    EXPECT_TRUE(s.user_attributes.count(kQualityAttribute));
  }
  EXPECT_EQ(n, 2700u);
  EXPECT_EQ(svc.export_sessions(true).size(), 91u);

  const auto path = (fresh_dir("export_file").string() + ".jsonl");
  write_jsonl(path, sessions);
  EXPECT_EQ(load_jsonl<Session>(path), sessions);
}

TEST(StudyService, ConcurrentEnrollmentsAndRounds) {
  ManualClock clock;
  StudyService svc(config(), sequences(), fresh_dir("concurrent"), clock.fn());
  std::vector<std::thread> ts;
  std::atomic<int> created{0};
  for (int t = 0; t < 8; ++t)
    ts.emplace_back([&, t] {
      for (int i = 0; i < 15; ++i)
        if (svc.create_session("t" + std::to_string(t) + "-" + std::to_string(i)).status == 201) ++created;
    });
  for (auto& th : ts) th.join();
  EXPECT_EQ(created.load(), 120);
  for (const auto& [_, n] : svc.condition_counts()) EXPECT_EQ(n, 40u);
}

TEST(StudyHttp, EndToEndRound) {
  ManualClock clock;
  StudyService svc(config({PolicyKind::SupportAlways}), sequences(), fresh_dir("http"), clock.fn());
  httplib::Server srv;
  mount_study_routes(srv, svc);
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Post("/api/sessions", R"({"user_id":"p1","attributes":{"ai_usage":"weekly"}})", "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const auto sid = Json::parse(res->body).at("session_id").get<std::string>();
  EXPECT_EQ(cli.Post("/api/sessions", R"({"user_id":"p1"})", "application/json")->status, 409);
  EXPECT_EQ(cli.Post("/api/sessions", "not json", "application/json")->status, 400);

  const auto base = "/api/sessions/" + sid;
  EXPECT_EQ(cli.Get(base + "/problem")->status, 200);
  clock.advance(2'000);
  res = cli.Post(base + "/initial", R"({"decision":0})", "application/json");
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(Json::parse(res->body).at("remaining_ms"), 8'000);
  clock.advance(8'000);
  EXPECT_EQ(cli.Post(base + "/initial", R"({"decision":0})", "application/json")->status, 200);
  res = cli.Get(base + "/advice");
  EXPECT_TRUE(Json::parse(res->body).at("advice").contains("explanation"));
  clock.advance(15'000);
  EXPECT_EQ(cli.Post(base + "/final", R"({"decision":9})", "application/json")->status, 400);
  EXPECT_EQ(cli.Post(base + "/final", R"({"decision":1})", "application/json")->status, 200);
  EXPECT_EQ(cli.Post(base + "/events", R"({"name":"tab_hidden"})", "application/json")->status, 204);
  EXPECT_EQ(cli.Post(base + "/trust", R"({"trust":6})", "application/json")->status, 200);
  EXPECT_EQ(Json::parse(cli.Get(base + "/progress")->body).at("completed"), 1);
  EXPECT_EQ(cli.Get(base + "/settlement")->status, 409);
  EXPECT_EQ(cli.Get("/api/sessions/zzz/problem")->status, 404);
  srv.stop();
  th.join();
}
