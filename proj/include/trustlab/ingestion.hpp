#pragma once

// Dataset loaders producing Problem fixtures: two-option ARC reductions from
// a curated selection, and four-option diagnosis cases from raw intake data.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "trustlab/core.hpp"
#include "trustlab/error.hpp"
#include "trustlab/rng.hpp"
#include "trustlab/serialization.hpp"

namespace trustlab {

struct ArcSelection {
  std::string id;
  std::string distractor;  // choice label kept alongside the answer key
};

inline std::vector<ArcSelection> load_arc_selection(const std::string& path) {
  const auto j = read_json_file(path);
  std::vector<ArcSelection> out;
  try {
    for (const auto& item : j.at("items")) out.push_back({item.at("id").get<std::string>(), item.at("distractor").get<std::string>()});
  } catch (const Json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return out;
}

/// Two-option problems (answer plus the selected distractor, in source
/// label order) in selection order.
inline std::vector<Problem> load_arc(const std::string& source, const std::vector<ArcSelection>& selection) {
  std::map<std::string, Json> rows;
  std::size_t lineno = 0;
  for (auto& j : read_jsonl(source)) {
    ++lineno;
    if (!j.contains("id") || !j.contains("question") || !j.contains("choices") || !j.contains("answerKey"))
      throw DataError(source + ": row " + std::to_string(lineno) + " is missing required fields");
    rows.emplace(j.at("id").get<std::string>(), std::move(j));
  }
  std::set<std::string> seen;
  std::vector<Problem> out;
  for (const auto& sel : selection) {
    if (!seen.insert(sel.id).second) throw DataError("duplicate ARC id in selection: " + sel.id);
    const auto it = rows.find(sel.id);
    if (it == rows.end()) throw DataError("ARC id not found in source: " + sel.id);
    const auto& row = it->second;
    const auto key = row.at("answerKey").get<std::string>();
    if (key == sel.distractor) throw DataError("ARC " + sel.id + ": distractor equals the answer key");
    Problem p;
    p.problem_id = sel.id;
    p.task = TaskId::Arc;
    p.prompt = row.at("question").get<std::string>();
    bool have_key = false, have_distractor = false;
    for (const auto& c : row.at("choices")) {
      const auto label = c.at("label").get<std::string>();
      if (label != key && label != sel.distractor) continue;
      if (label == key) {
        p.correct_index = static_cast<int>(p.options.size());
        have_key = true;
      } else {
        have_distractor = true;
      }
      p.options.push_back(c.at("text").get<std::string>());
    }
    if (!have_key || !have_distractor) throw DataError("ARC " + sel.id + ": answer key or distractor label missing");
    if (auto v = validate(p); !v) throw DataError("ARC " + sel.id + ": " + v.violations.front());
    out.push_back(std::move(p));
  }
  return out;
}

struct DifferentialEntry {
  std::string condition;
  int rank = 0;
  bool is_true = false;
};

struct RawDiagnosisCase {
  std::string case_id;
  int age = 0;
  std::string sex;
  std::vector<std::string> statements;
  std::vector<DifferentialEntry> differential;
};

inline void from_json(const Json& j, DifferentialEntry& d) {
  j.at("condition").get_to(d.condition);
  j.at("rank").get_to(d.rank);
  j.at("true").get_to(d.is_true);
}

inline void from_json(const Json& j, RawDiagnosisCase& c) {
  j.at("case_id").get_to(c.case_id);
  j.at("age").get_to(c.age);
  j.at("sex").get_to(c.sex);
  j.at("statements").get_to(c.statements);
  j.at("differential").get_to(c.differential);
  if (c.differential.empty()) throw DataError("case " + c.case_id + ": empty differential");
  if (std::none_of(c.differential.begin(), c.differential.end(), [](const auto& d) { return d.is_true; }))
    throw DataError("case " + c.case_id + ": true condition absent from differential");
}

struct DiagnosisFilter {
  std::size_t min_statements = 10;
  std::size_t max_statements = 15;
  std::size_t negatives = 3;
  std::uint64_t position_seed = 0;
};

struct DiagnosisLoad {
  std::vector<Problem> problems;
  std::vector<std::string> warnings;
  std::size_t filtered_out = 0;  // outside the statement-count window
};

inline std::string diagnosis_prompt(const RawDiagnosisCase& c) {
  std::string out = "Patient is a " + std::to_string(c.age) + " year old " + c.sex + ".";
  for (const auto& s : c.statements) out += "\n- " + s;
  return out;
}

/// Slot of the correct option: a seeded hash of the case id.
inline int correct_slot(const std::string& case_id, std::size_t n_options, std::uint64_t seed) {
  return static_cast<int>(mix64(fnv1a64(case_id) ^ mix64(seed)) % n_options);
}

inline Problem diagnosis_problem(const RawDiagnosisCase& c, const DiagnosisFilter& f) {
  auto ranked = c.differential;
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
  std::string truth;
  std::vector<std::string> negatives;
  for (const auto& d : ranked) {
    if (d.is_true) truth = d.condition;
    else if (negatives.size() < f.negatives) negatives.push_back(d.condition);
  }
  if (negatives.size() < f.negatives)
    throw DataError("case " + c.case_id + " has only " + std::to_string(negatives.size()) + " negative conditions");
  Problem p;
  p.problem_id = c.case_id;
  p.task = TaskId::Diagnosis;
  p.prompt = diagnosis_prompt(c);
  p.correct_index = correct_slot(c.case_id, negatives.size() + 1, f.position_seed);
  p.options = negatives;
  p.options.insert(p.options.begin() + p.correct_index, truth);
  return p;
}

inline DiagnosisLoad load_diagnosis(const std::string& source, const DiagnosisFilter& f = {}) {
  DiagnosisLoad out;
  for (const auto& c : load_jsonl<RawDiagnosisCase>(source)) {
    if (c.statements.size() < f.min_statements || c.statements.size() > f.max_statements) {
      ++out.filtered_out;
      continue;
    }
    try {
      auto p = diagnosis_problem(c, f);
      if (auto v = validate(p); !v) throw DataError("case " + c.case_id + ": " + v.violations.front());
      out.problems.push_back(std::move(p));
    } catch (const DataError& e) {
      out.warnings.push_back(std::string("skipped: ") + e.what());
    }
  }
  return out;
}

inline void write_problems(const std::string& path, const std::vector<Problem>& problems) { write_jsonl(path, problems); }
inline std::vector<Problem> load_problems(const std::string& path) { return load_jsonl<Problem>(path); }

}  // namespace trustlab
