#pragma once

// Named task settings: which problem pool, which assistant, and the default
// synthetic user and cohort size for each.

#include <filesystem>
#include <string>
#include <vector>

#include "trustlab/assistant_sim.hpp"
#include "trustlab/error.hpp"
#include "trustlab/ingestion.hpp"
#include "trustlab/simuser.hpp"

namespace trustlab {

struct TaskSetting {
  std::string id;
  TaskId task = TaskId::Arc;
  AssistantProfile assistant;
  std::size_t users_per_condition = 30;
  double payment_base = 1.0;
  UserModel user;
};

inline TaskSetting task_setting(const std::string& id) {
  TaskSetting s;
  s.id = id;
  const bool arc = id == "ArcC" || id == "ArcO";
  const bool dx = id == "DiagC" || id == "DiagO";
  if (!arc && !dx) throw ConfigError("unknown task setting '" + id + "' (expected ArcC, ArcO, DiagC or DiagO)");
  s.task = arc ? TaskId::Arc : TaskId::Diagnosis;
  const bool calibrated = id.back() == 'C';
  s.assistant.kind = calibrated ? AssistantKind::Calibrated : AssistantKind::Overconfident;
  s.assistant.profile_id = calibrated ? "calibrated" : "overconfident";
  s.users_per_condition = arc ? 30 : 20;
  s.payment_base = arc ? 1.0 : 2.0;
  s.user = arc ? arc_default_user() : diagnosis_default_user();
  return s;
}

/// Problem pool for a setting from the fixture directory.
inline std::vector<Problem> load_pool(const TaskSetting& s, const std::filesystem::path& fixtures) {
  if (s.task == TaskId::Arc)
    return load_arc((fixtures / "arc" / "source.jsonl").string(),
                    load_arc_selection((fixtures / "arc" / "selection.json").string()));
  return load_diagnosis((fixtures / "diagnosis" / "cases.jsonl").string()).problems;
}

}  // namespace trustlab
