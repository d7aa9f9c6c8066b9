#pragma once

// Recommendations from a text-generation backend by self-consistency voting,
// plus offline generation and caching of support/counter explanations.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "trustlab/assistant_sim.hpp"
#include "trustlab/core.hpp"
#include "trustlab/error.hpp"
#include "trustlab/serialization.hpp"

namespace trustlab {

struct GenerationRequest {
  std::string prompt;
  double temperature = 0.7;
  int sample_index = 0;  // lets deterministic backends vary per sample
};

/// Prompt in, text out. Implementations must be safe to call concurrently.
class GenerationClient {
public:
  virtual ~GenerationClient() = default;
  virtual std::string generate(const GenerationRequest& req) = 0;
};

/// Deterministic in-process client for tests and offline runs.
class StubClient : public GenerationClient {
public:
  using Fn = std::function<std::string(const GenerationRequest&)>;
  explicit StubClient(Fn fn) : fn_(std::move(fn)) {}
  std::string generate(const GenerationRequest& req) override {
    ++calls_;
    return fn_(req);
  }
  std::size_t calls() const noexcept { return calls_.load(); }

private:
  Fn fn_;
  std::atomic<std::size_t> calls_{0};
};

struct GenerationConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/chat/completions";
  std::string model;
  double temperature = 0.7;
  int timeout_ms = 30'000;
  int retries = 1;

  void check() const {
    if (timeout_ms <= 0) throw ConfigError("generation timeout must be positive");
    if (retries < 0) throw ConfigError("generation retries must be non-negative");
    if (temperature < 0.0) throw ConfigError("temperature must be non-negative");
  }
};

inline void to_json(Json& j, const GenerationConfig& c) {
  j = Json{{"base_url", c.base_url}, {"path", c.path},         {"model", c.model},
           {"temperature", c.temperature}, {"timeout_ms", c.timeout_ms}, {"retries", c.retries}};
}

inline void from_json(const Json& j, GenerationConfig& c) {
  c = GenerationConfig{};
  c.base_url = j.value("base_url", c.base_url);
  c.path = j.value("path", c.path);
  c.model = j.value("model", c.model);
  c.temperature = j.value("temperature", c.temperature);
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.retries = j.value("retries", c.retries);
  c.check();
}

// ---------------------------------------------------------------------------
// Self-consistency

struct RationaleSample {
  std::string rationale;
  std::optional<int> predicted_index;  // nullopt: unparseable or failed
};

/// Exact vote share; confidence is rendered from it in a single division.
struct Fraction {
  std::size_t num = 0;
  std::size_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Fraction&) const = default;
};

struct SelfConsistencyResult {
  Recommendation recommendation;
  std::vector<RationaleSample> samples;
  Fraction vote_share;
  std::size_t parseable = 0;
  bool tie = false;
  bool clamped = false;  // vote share below 0.5 raised to 0.5
};

inline char option_letter(int index) { return static_cast<char>('A' + index); }

/// Option index from the last "Final answer: X" line; nullopt if absent or out of range.
inline std::optional<int> parse_final_answer(const std::string& text, std::size_t n_options) {
  static const std::regex re(R"(final answer\s*[:\-]\s*\(?([A-Za-z])\)?)", std::regex::icase);
  std::optional<int> found;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>((*it)[1].str()[0])));
    found = c - 'A';
  }
  if (!found || *found < 0 || static_cast<std::size_t>(*found) >= n_options) return std::nullopt;
  return found;
}

inline std::string lettered_options(const Problem& p) {
  std::string out;
  for (std::size_t i = 0; i < p.options.size(); ++i)
    out += std::string(1, option_letter(static_cast<int>(i))) + ") " + p.options[i] + "\n";
  return out;
}

inline std::string self_consistency_prompt(const Problem& p, const std::string& instruction) {
  return instruction + "\n\n" + p.prompt + "\n\nOptions:\n" + lettered_options(p);
}

inline SelfConsistencyResult tally_votes(const Problem& p, std::vector<RationaleSample> samples) {
  const auto n = samples.size();
  std::vector<std::size_t> votes(p.options.size(), 0);
  std::size_t parseable = 0;
  for (const auto& s : samples)
    if (s.predicted_index) {
      ++votes[static_cast<std::size_t>(*s.predicted_index)];
      ++parseable;
    }
  if (parseable == 0) throw GenerationError("self-consistency: no parseable samples for " + p.problem_id);
  if (2 * parseable < n)
    throw GenerationError("self-consistency: only " + std::to_string(parseable) + " of " + std::to_string(n) +
                          " samples parseable for " + p.problem_id);

  const auto top = *std::max_element(votes.begin(), votes.end());
  std::optional<int> pick;
  std::size_t n_top = 0;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    if (votes[i] != top) continue;
    ++n_top;
    if (!pick || p.options[i] < p.options[static_cast<std::size_t>(*pick)]) pick = static_cast<int>(i);
  }

  SelfConsistencyResult r;
  r.vote_share = {top, parseable};
  r.parseable = parseable;
  r.tie = n_top > 1;
  r.recommendation.prediction_index = *pick;
  r.recommendation.confidence = r.vote_share.value();
  if (2 * top < parseable) {
    r.recommendation.confidence = 0.5;
    r.clamped = true;
  }
  r.samples = std::move(samples);
  return r;
}

/// Draws n_samples chains of thought concurrently and votes. A sample whose
/// request throws counts as unparseable.
inline SelfConsistencyResult self_consistency_recommend(const Problem& p, GenerationClient& client,
                                                        std::size_t n_samples = 10, double temperature = 0.7,
                                                        const std::string& instruction =
                                                            "Think step by step, then end your response with a "
                                                            "single line of the form \"Final answer: <option letter>\".") {
  if (n_samples == 0) throw ConfigError("self-consistency needs at least one sample");
  const auto prompt = self_consistency_prompt(p, instruction);
  std::vector<std::future<std::string>> pending;
  for (std::size_t k = 0; k < n_samples; ++k)
    pending.push_back(std::async(std::launch::async, [&client, &prompt, temperature, k] {
      return client.generate({prompt, temperature, static_cast<int>(k)});
    }));
  std::vector<RationaleSample> samples;
  for (auto& f : pending) {
    try {
      auto text = f.get();
      auto idx = parse_final_answer(text, p.options.size());
      samples.push_back({std::move(text), idx});
    } catch (const std::exception& e) {
      samples.push_back({std::string("[generation failed: ") + e.what() + "]", std::nullopt});
    }
  }
  return tally_votes(p, std::move(samples));
}

inline std::optional<std::string> select_support_rationale(const std::vector<RationaleSample>& samples,
                                                           int prediction_index) {
  for (const auto& s : samples)
    if (s.predicted_index == prediction_index) return s.rationale;
  return std::nullopt;
}

inline std::optional<std::string> select_counter_rationale(const std::vector<RationaleSample>& samples,
                                                           int prediction_index) {
  for (const auto& s : samples)
    if (s.predicted_index && *s.predicted_index != prediction_index) return s.rationale;
  return std::nullopt;
}

/// Recommendation with rationales from the same samples attached as explanations.
inline Recommendation with_rationales(const SelfConsistencyResult& r) {
  Recommendation rec = r.recommendation;
  rec.support_explanation = select_support_rationale(r.samples, rec.prediction_index);
  rec.counter_explanation = select_counter_rationale(r.samples, rec.prediction_index);
  return rec;
}

inline void to_json(Json& j, const RationaleSample& s) {
  j = Json{{"rationale", s.rationale}};
  detail::put_optional(j, "predicted_index", s.predicted_index);
}

inline void to_json(Json& j, const SelfConsistencyResult& r) {
  j = Json{{"recommendation", r.recommendation},
           {"samples", r.samples},
           {"votes", r.vote_share.num},
           {"parseable", r.parseable},
           {"tie", r.tie},
           {"clamped", r.clamped}};
}

// ---------------------------------------------------------------------------
// Explanation prompts and cache

struct PromptTemplates {
  std::string support;
  std::string counter;
};

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline PromptTemplates load_prompt_templates(const std::filesystem::path& dir) {
  return {read_text_file(dir / "support.txt"), read_text_file(dir / "counter.txt")};
}

namespace detail {

inline void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) s.replace(pos, from.size(), to);
}

}  // namespace detail

/// Instantiates an explanation template for one option (1-based in the text,
/// matching the numbered option list). ARC swaps "correct diagnosis" for "correct answer".
inline std::string explanation_prompt(const PromptTemplates& t, const Problem& p, int option, ExplanationKind kind) {
  if (option < 0 || static_cast<std::size_t>(option) >= p.options.size())
    throw DataError("explanation_prompt: option out of range for " + p.problem_id);
  std::string instr = kind == ExplanationKind::Support ? t.support : t.counter;
  detail::replace_all(instr, "{i}", std::to_string(option + 1));
  if (p.task != TaskId::Diagnosis) detail::replace_all(instr, "correct diagnosis", "correct answer");
  std::string opts;
  for (std::size_t i = 0; i < p.options.size(); ++i) opts += "Option " + std::to_string(i + 1) + ": " + p.options[i] + "\n";
  return p.prompt + "\n\n" + opts + "\n" + instr;
}

/// Counter-explanations must open with a hedged endorsement; anything else is
/// kept but flagged for manual review.
inline bool is_hedged_counter(const std::string& text) {
  static const std::regex re(R"(\b(while|although|though|even though)\s+i\s+(think|believe)\b)", std::regex::icase);
  return std::regex_search(text, re);
}

struct CachedExplanation {
  std::string problem_id;
  int option = 0;
  ExplanationKind kind = ExplanationKind::Support;
  std::string text;
  bool needs_review = false;
};

inline void to_json(Json& j, const CachedExplanation& e) {
  j = Json{{"problem_id", e.problem_id}, {"option", e.option}, {"kind", e.kind}, {"text", e.text},
           {"needs_review", e.needs_review}};
}

inline void from_json(const Json& j, CachedExplanation& e) {
  j.at("problem_id").get_to(e.problem_id);
  j.at("option").get_to(e.option);
  j.at("kind").get_to(e.kind);
  j.at("text").get_to(e.text);
  e.needs_review = j.value("needs_review", false);
}

/// Flat JSONL store keyed by (problem_id, option, kind). Reads are shared;
/// inserts append one line under an exclusive lock.
class ExplanationCache {
public:
  ExplanationCache() = default;
  explicit ExplanationCache(std::filesystem::path file) : file_(std::move(file)) {
    if (std::filesystem::exists(*file_))
      for (auto& e : load_jsonl<CachedExplanation>(*file_)) entries_[key(e.problem_id, e.option, e.kind)] = std::move(e);
  }

  std::optional<CachedExplanation> find(const std::string& problem_id, int option, ExplanationKind kind) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(key(problem_id, option, kind));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  /// First insert wins; returns the stored entry.
  CachedExplanation insert(CachedExplanation e) {
    std::unique_lock lock(mu_);
    auto [it, fresh] = entries_.emplace(key(e.problem_id, e.option, e.kind), std::move(e));
    if (fresh && file_) {
      std::ofstream out(*file_, std::ios::app);
      out << Json(it->second).dump() << '\n';
      out.flush();
      if (!out) throw DataError("cannot append to " + file_->string());
    }
    return it->second;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
  }

  /// Explanation source for sequence generation; missing entries stay missing.
  ExplanationSource source() const {
    return [this](const Problem& p, int option, ExplanationKind kind) -> std::optional<std::string> {
      if (auto e = find(p.problem_id, option, kind)) return e->text;
      return std::nullopt;
    };
  }

private:
  using Key = std::tuple<std::string, int, ExplanationKind>;
  static Key key(const std::string& id, int option, ExplanationKind kind) { return {id, option, kind}; }

  std::optional<std::filesystem::path> file_;
  mutable std::shared_mutex mu_;
  std::map<Key, CachedExplanation> entries_;
};

/// One explanation per (problem, option, kind); served from the cache when present.
inline CachedExplanation generate_explanation_offline(const Problem& p, int option, ExplanationKind kind,
                                                      GenerationClient& client, ExplanationCache& cache,
                                                      const PromptTemplates& templates, double temperature = 0.7) {
  if (auto hit = cache.find(p.problem_id, option, kind)) return *hit;
  auto text = client.generate({explanation_prompt(templates, p, option, kind), temperature, 0});
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos)
    throw GenerationError("empty explanation for " + p.problem_id + " option " + std::to_string(option));
  text = text.substr(first, text.find_last_not_of(" \t\r\n") - first + 1);
  CachedExplanation e{p.problem_id, option, kind, text, kind == ExplanationKind::Counter && !is_hedged_counter(text)};
  return cache.insert(std::move(e));
}

}  // namespace trustlab
