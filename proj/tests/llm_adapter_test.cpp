#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "test_support.hpp"
#include "trustlab/llm_adapter.hpp"
#include "trustlab/llm_http.hpp"

using namespace trustlab;
using trustlab::testing::make_problem;

namespace {

// Sample k answers script[k] (a letter, or '?' for an unparseable reply).
StubClient scripted(const std::string& script) {
  return StubClient([script](const GenerationRequest& r) {
    const char c = script.at(static_cast<std::size_t>(r.sample_index));
    const std::string body = "Reasoning #" + std::to_string(r.sample_index) + " for the question.";
    if (c == '?') return body + " I am not sure.";
    if (c == '!') throw GenerationError("backend down");
    return body + "\nFinal answer: " + std::string(1, c);
  });
}

const std::filesystem::path kPrompts = std::filesystem::path(TRUSTLAB_FIXTURE_DIR) / "prompts";

}  // namespace

TEST(ParseFinalAnswer, Forms) {
  EXPECT_EQ(parse_final_answer("blah\nFinal answer: B", 4), 1);
  EXPECT_EQ(parse_final_answer("final answer - (c)", 4), 2);
  EXPECT_EQ(parse_final_answer("Final answer: A ... Final answer: D", 4), 3);
  EXPECT_FALSE(parse_final_answer("Final answer: E", 4));
  EXPECT_FALSE(parse_final_answer("The answer is B", 4));
}

TEST(SelfConsistency, MajorityAndShare) {
  auto client = scripted("AAABABBABA");  // 6 A, 4 B
  const auto r = self_consistency_recommend(make_problem("q", 2, 0), client);
  EXPECT_EQ(r.recommendation.prediction_index, 0);
  EXPECT_DOUBLE_EQ(r.recommendation.confidence, 0.6);
  EXPECT_EQ(r.vote_share, (Fraction{6, 10}));
  EXPECT_FALSE(r.tie);
  EXPECT_EQ(client.calls(), 10u);
}

TEST(SelfConsistency, SevenThreeSplit) {
  auto client = scripted("ABABABAAAA");
  const auto r = self_consistency_recommend(make_problem("q", 2, 0), client);
  EXPECT_EQ(r.recommendation.prediction_index, 0);
  EXPECT_DOUBLE_EQ(r.recommendation.confidence, 0.7);
  const auto counter = select_counter_rationale(r.samples, 0);
  ASSERT_TRUE(counter);
  EXPECT_NE(counter->find("Reasoning #1 "), std::string::npos);
}

TEST(SelfConsistency, UnanimousHasNoCounterRationale) {
  auto client = scripted("BBBBBBBBBB");
  const auto r = self_consistency_recommend(make_problem("q", 2, 1), client);
  EXPECT_DOUBLE_EQ(r.recommendation.confidence, 1.0);
  EXPECT_FALSE(select_counter_rationale(r.samples, 1));
  EXPECT_EQ(*select_support_rationale(r.samples, 1), r.samples.front().rationale);
  const auto rec = with_rationales(r);
  EXPECT_TRUE(rec.support_explanation);
  EXPECT_FALSE(rec.counter_explanation);
}

TEST(SelfConsistency, TieBrokenByOptionText) {
  auto p = make_problem("q", 2, 0);
  p.options = {"Zebra", "Aardvark"};
  auto client = scripted("ABABABABAB");
  const auto r = self_consistency_recommend(p, client);
  EXPECT_TRUE(r.tie);
  EXPECT_EQ(r.recommendation.prediction_index, 1);
  EXPECT_DOUBLE_EQ(r.recommendation.confidence, 0.5);
}

TEST(SelfConsistency, LowShareClampedOnFourOptions) {
  auto client = scripted("AAAABBBCCD");
  const auto r = self_consistency_recommend(make_problem("q", 4, 0), client);
  EXPECT_EQ(r.vote_share, (Fraction{4, 10}));
  EXPECT_TRUE(r.clamped);
  EXPECT_DOUBLE_EQ(r.recommendation.confidence, 0.5);
  EXPECT_TRUE(validate(r.recommendation, make_problem("q", 4, 0)).ok());
}

TEST(SelfConsistency, PartialFailures) {
  auto half = scripted("AA?A!?B?!A");  // 5 parseable of 10
  const auto r = self_consistency_recommend(make_problem("q", 2, 0), half);
  EXPECT_EQ(r.parseable, 5u);
  EXPECT_EQ(r.vote_share, (Fraction{4, 5}));
  auto few = scripted("AA?!?" "?????");
  EXPECT_THROW(self_consistency_recommend(make_problem("q", 2, 0), few), GenerationError);
  auto none = scripted("??????????");
  EXPECT_THROW(self_consistency_recommend(make_problem("q", 2, 0), none), GenerationError);
}

TEST(SelfConsistency, ReproducibleWithStub) {
  auto a = scripted("ABBABBBAAB");
  auto b = scripted("ABBABBBAAB");
  const auto p = make_problem("q", 2, 1);
  EXPECT_EQ(Json(self_consistency_recommend(p, a)).dump(), Json(self_consistency_recommend(p, b)).dump());
}

TEST(ExplanationPrompt, DiagnosisUsesTemplateVerbatim) {
  const auto t = load_prompt_templates(kPrompts);
  auto p = make_problem("d1", 4, 2, TaskId::Diagnosis);
  const auto prompt = explanation_prompt(t, p, 2, ExplanationKind::Support);
  std::string instr = t.support;
  for (std::size_t pos; (pos = instr.find("{i}")) != std::string::npos;) instr.replace(pos, 3, "3");
  EXPECT_NE(prompt.find(instr), std::string::npos);
  EXPECT_NE(prompt.find("Option 3: " + p.options[2]), std::string::npos);
  EXPECT_NE(prompt.find(p.prompt), std::string::npos);
}

TEST(ExplanationPrompt, ArcSaysAnswer) {
  const auto t = load_prompt_templates(kPrompts);
  const auto prompt = explanation_prompt(t, make_problem("a1", 2, 0, TaskId::Arc), 0, ExplanationKind::Counter);
  EXPECT_EQ(prompt.find("correct diagnosis"), std::string::npos);
  EXPECT_NE(prompt.find("correct answer"), std::string::npos);
  EXPECT_EQ(prompt.find("{i}"), std::string::npos);
}

TEST(HedgeScreen, Patterns) {
  EXPECT_TRUE(is_hedged_counter("While I think anemia is the correct diagnosis, the fatigue could ..."));
  EXPECT_TRUE(is_hedged_counter("Although I believe the answer is right, ..."));
  EXPECT_FALSE(is_hedged_counter("Anemia is wrong because the labs are normal."));
}

TEST(ExplanationCache, HitSkipsClientAndFlagsPlainRefutation) {
  const auto t = load_prompt_templates(kPrompts);
  StubClient client([](const GenerationRequest&) { return "  This option is wrong because of the fever.\n"; });
  ExplanationCache cache;
  const auto p = make_problem("d1", 4, 0, TaskId::Diagnosis);
  const auto first = generate_explanation_offline(p, 1, ExplanationKind::Counter, client, cache, t);
  EXPECT_EQ(first.text, "This option is wrong because of the fever.");
  EXPECT_TRUE(first.needs_review);
  const auto again = generate_explanation_offline(p, 1, ExplanationKind::Counter, client, cache, t);
  EXPECT_EQ(again.text, first.text);
  EXPECT_EQ(client.calls(), 1u);
  generate_explanation_offline(p, 1, ExplanationKind::Support, client, cache, t);
  EXPECT_EQ(client.calls(), 2u);
}

TEST(ExplanationCache, EmptyGenerationIsError) {
  const auto t = load_prompt_templates(kPrompts);
  StubClient client([](const GenerationRequest&) { return std::string(" \n "); });
  ExplanationCache cache;
  EXPECT_THROW(generate_explanation_offline(make_problem("x"), 0, ExplanationKind::Support, client, cache, t),
               GenerationError);
  EXPECT_EQ(cache.size(), 0u);
}

TEST(ExplanationCache, PersistsAcrossReloadAndFeedsSequences) {
  const auto file = std::filesystem::temp_directory_path() / "trustlab_cache_test.jsonl";
  std::filesystem::remove(file);
  {
    ExplanationCache cache(file);
    cache.insert({"p0", 0, ExplanationKind::Support, "because", false});
    cache.insert({"p0", 0, ExplanationKind::Support, "ignored duplicate", false});
  }
  ExplanationCache reloaded(file);
  EXPECT_EQ(reloaded.size(), 1u);
  const auto src = reloaded.source();
  EXPECT_EQ(*src(make_problem("p0"), 0, ExplanationKind::Support), "because");
  EXPECT_FALSE(src(make_problem("p0"), 0, ExplanationKind::Counter));
  std::filesystem::remove(file);
}

TEST(ExplanationCache, ConcurrentInsertsKeepOneEntryPerKey) {
  ExplanationCache cache;
  std::vector<std::thread> ts;
  for (int t = 0; t < 8; ++t)
    ts.emplace_back([&cache, t] {
      for (int i = 0; i < 50; ++i) cache.insert({"p" + std::to_string(i), 0, ExplanationKind::Support, std::to_string(t), false});
    });
  for (auto& th : ts) th.join();
  EXPECT_EQ(cache.size(), 50u);
}

TEST(HttpChatClient, RetriesOnceThenSucceeds) {
  httplib::Server srv;
  std::atomic<int> hits{0};
  srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 503;
      return;
    }
    const auto body = Json::parse(req.body);
    const auto prompt = body.at("messages").at(0).at("content").get<std::string>();
    res.set_content(Json{{"choices", {{{"message", {{"content", "echo:" + prompt}}}}}}}.dump(), "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  GenerationConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.timeout_ms = 2000;
  HttpChatClient client(cfg);
  EXPECT_EQ(client.generate({"hi", 0.7, 0}), "echo:hi");
  EXPECT_EQ(hits.load(), 2);

  cfg.retries = 0;
  hits = 0;
  HttpChatClient strict(cfg);
  EXPECT_THROW(strict.generate({"hi", 0.7, 0}), GenerationError);
  srv.stop();
  th.join();
}

TEST(GenerationConfig, Validation) {
  GenerationConfig cfg;
  cfg.timeout_ms = 0;
  EXPECT_THROW(cfg.check(), ConfigError);
  EXPECT_THROW(Json::parse(R"({"timeout_ms": -5})").get<GenerationConfig>(), ConfigError);
}
