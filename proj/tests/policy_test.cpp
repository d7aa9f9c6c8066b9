#include <gtest/gtest.h>

#include <map>

#include "trustlab/policy.hpp"

using namespace trustlab;

namespace {

// Expected action per trust level 0..10.
// N none, S support, C counter, T "AI is thinking", P forced pause.
const std::map<PolicyKind, std::string> kTruthTable = {
    {PolicyKind::NoIntervention, "NNNNNNNNNNN"},  {PolicyKind::SupportAlways, "SSSSSSSSSSS"},
    {PolicyKind::CounterAlways, "CCCCCCCCCCC"},   {PolicyKind::SupportAdaptive, "SSSSSNNNNNN"},
    {PolicyKind::CounterAdaptive, "NNNNNNNNNCC"}, {PolicyKind::BothAdaptive, "SSSSSNNNNCC"},
    {PolicyKind::ThinkingAdaptive, "TTTTTNNNNNN"}, {PolicyKind::PauseAdaptive, "NNNNNNNNNPP"},
    {PolicyKind::ThinkingAndPauseAdaptive, "TTTTTNNNNPP"},
};

char code(Intervention i) {
  switch (i) {
    case Intervention::None: return 'N';
    case Intervention::ShowSupport: return 'S';
    case Intervention::ShowCounter: return 'C';
    case Intervention::AiThinking: return 'T';
    case Intervention::ForcedPause: return 'P';
  }
  return '?';
}

PolicyConfig config(PolicyKind k) {
  PolicyConfig c;
  c.kind = k;
  return c;
}

}  // namespace

TEST(Decide, TruthTableAllKindsAllTrustLevels) {
  for (auto kind : kAllPolicyKinds) {
    const auto& row = kTruthTable.at(kind);
    for (int t = 0; t <= 10; ++t)
      EXPECT_EQ(code(decide(config(kind), TrustLevel{t}).action), row[static_cast<std::size_t>(t)])
          << to_string(kind) << " trust " << t;
  }
}

TEST(Decide, DurationsFollowAction) {
  for (auto kind : kAllPolicyKinds)
    for (int t = 0; t <= 10; ++t) {
      const auto d = decide(config(kind), TrustLevel{t});
      switch (d.action) {
        case Intervention::None:
          EXPECT_EQ(d.pre_reveal_delay_ms, 0);
          EXPECT_EQ(d.post_reveal_gate_ms, 0);
          break;
        case Intervention::AiThinking: EXPECT_EQ(d.pre_reveal_delay_ms, 10'000); break;
        case Intervention::ForcedPause: EXPECT_EQ(d.post_reveal_gate_ms, 10'000); break;
        default: EXPECT_EQ(d.post_reveal_gate_ms, 15'000);
      }
    }
}

TEST(Decide, SupportAdaptiveAtFour) {
  const auto d = decide(config(PolicyKind::SupportAdaptive), TrustLevel{4});
  EXPECT_EQ(d, (InterventionDecision{Intervention::ShowSupport, 0, 15'000}));
}

TEST(Decide, ThinkingAndPauseAtTwo) {
  const auto d = decide(config(PolicyKind::ThinkingAndPauseAdaptive), TrustLevel{2});
  EXPECT_EQ(d, (InterventionDecision{Intervention::AiThinking, 10'000, 0}));
}

TEST(Decide, FirstRoundHasNoAdaptiveIntervention) {
  for (auto kind : kAllPolicyKinds) {
    const auto d = decide(config(kind), std::nullopt);
    const bool always = kind == PolicyKind::SupportAlways || kind == PolicyKind::CounterAlways;
    EXPECT_EQ(d.action != Intervention::None, always) << to_string(kind);
  }
}

TEST(Decide, BothAdaptiveSidesAreDisjoint) {
  std::set<int> support, counter, neither;
  for (int t = 0; t <= 10; ++t) {
    const auto a = decide(config(PolicyKind::BothAdaptive), TrustLevel{t}).action;
    (a == Intervention::ShowSupport ? support : a == Intervention::ShowCounter ? counter : neither).insert(t);
  }
  EXPECT_EQ(support, (std::set<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(counter, (std::set<int>{9, 10}));
  EXPECT_EQ(neither, (std::set<int>{5, 6, 7, 8}));
}

TEST(Decide, CustomThresholds) {
  PolicyConfig c = config(PolicyKind::BothAdaptive);
  c.low_threshold = 3;
  c.high_threshold = 6;
  EXPECT_EQ(decide(c, TrustLevel{2}).action, Intervention::ShowSupport);
  EXPECT_EQ(decide(c, TrustLevel{3}).action, Intervention::None);
  EXPECT_EQ(decide(c, TrustLevel{7}).action, Intervention::ShowCounter);
}

TEST(PolicyConfig, RejectsBadThresholds) {
  PolicyConfig c;
  c.low_threshold = 9;
  c.high_threshold = 8;
  EXPECT_THROW(c.check(), ConfigError);
  Json j = {{"kind", "BothAdaptive"}, {"pause_delay_ms", -1}};
  EXPECT_THROW(j.get<PolicyConfig>(), ConfigError);
}

TEST(Attach, NoneSuppressesExplanations) {
  Recommendation rec{1, 0.8, "support", "counter"};
  const auto v = attach({}, rec);
  EXPECT_FALSE(v.explanation);
  EXPECT_EQ(v.prediction_index, 1);
  EXPECT_FALSE(Json(v).contains("explanation"));
}

TEST(Attach, ShowSupportExposesSupportOnly) {
  Recommendation rec{1, 0.8, "support text", "counter text"};
  const auto v = attach({Intervention::ShowSupport, 0, 15'000}, rec);
  EXPECT_EQ(v.explanation, "support text");
  EXPECT_EQ(v.explanation_kind, ExplanationKind::Support);
  EXPECT_EQ(Json(v).dump().find("counter text"), std::string::npos);
}

TEST(Attach, MissingCounterNamesProblem) {
  Recommendation rec{1, 0.8, "support", std::nullopt};
  try {
    attach({Intervention::ShowCounter, 0, 15'000}, rec, "arc-17");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("arc-17"), std::string::npos);
  }
}
