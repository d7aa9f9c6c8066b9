// trustlab: operator entry point.
//   gen-sequences  problem sequences for a task setting
//   simulate       synthetic study through engine + policy + simulated users
//   analyze        reliance / trust-binned / bootstrap tables and plot data
//   fit-trust      fit the trust regression model
//   eval-trust     train/test table for the trust estimators
//   serve          live study service over HTTP
//   export         sessions and settlements from a study's event log
//
// Exit codes: 0 ok, 1 data error, 2 usage error.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

// Eigen before httplib: <resolv.h> defines a _res macro that breaks Eigen.
#include "trustlab/trust_estimators.hpp"

#include "CLI11.hpp"
#include "trustlab/analysis.hpp"
#include "trustlab/assistant_sim.hpp"
#include "trustlab/presets.hpp"
#include "trustlab/simulation.hpp"
#include "trustlab/study_http.hpp"
#include "trustlab/study_service.hpp"

namespace fs = std::filesystem;
using namespace trustlab;

namespace {

constexpr int kOk = 0;
constexpr int kDataError = 1;
constexpr int kUsageError = 2;

#ifndef TRUSTLAB_DEFAULT_FIXTURES
#define TRUSTLAB_DEFAULT_FIXTURES "data"
#endif

fs::path fixtures_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TRUSTLAB_FIXTURES")) return env;
  return TRUSTLAB_DEFAULT_FIXTURES;
}

// Config files: syntax errors report line and column; a missing or mistyped
// field reports the offending key.
Json read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

template <typename T>
T config_field(const Json& j, const char* key, const fs::path& path) {
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": field '" + key + "': " + e.what());
  }
}

StudyConfig study_config(const fs::path& path) {
  const auto j = read_config(path);
  try {
    (void)j.get<StudyConfig>();
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return load_study_config(path);
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create " + p.string() + ": " + ec.message());
}

std::vector<ProblemSequence> preset_sequences(const TaskSetting& setting, const fs::path& fixtures, std::size_t count,
                                              std::size_t length, std::uint64_t seed) {
  auto profile = setting.assistant;
  profile.seed = seed;
  return generate_sequences(load_pool(setting, fixtures), profile, count, length, seed);
}

void write_sequence_summary(const fs::path& path, const std::vector<ProblemSequence>& seqs) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << "sequence_id,n_items,realized_accuracy,mean_confidence\n";
  for (const auto& s : seqs) {
    double conf = 0;
    for (const auto& it : s.items) conf += it.recommendation.confidence;
    f << s.sequence_id << "," << s.items.size() << "," << std::setprecision(6) << realized_accuracy(s) << ","
      << conf / static_cast<double>(std::max<std::size_t>(1, s.items.size())) << "\n";
  }
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string preset;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string fixtures;
  std::size_t count = 10;
  std::size_t length = kDefaultSequenceLength;
};

int cmd_gen_sequences(const GenArgs& a) {
  if (!a.seed) throw ConfigError("gen-sequences: --seed is required");
  std::string setting_id = a.preset;
  if (!a.config.empty()) setting_id = config_field<std::string>(read_config(a.config), "task_setting", a.config);
  if (setting_id.empty()) throw ConfigError("gen-sequences: give --preset or --config");
  const auto setting = task_setting(setting_id);
  const auto fx = fixtures_dir(a.fixtures);
  const auto pool = load_pool(setting, fx);
  const auto seqs = preset_sequences(setting, fx, a.count, a.length, *a.seed);
  ensure_dir(a.out_dir);
  write_jsonl((fs::path(a.out_dir) / "sequences.jsonl").string(), seqs);
  write_problems((fs::path(a.out_dir) / "problems.jsonl").string(), pool);
  write_sequence_summary(fs::path(a.out_dir) / "sequences_summary.csv", seqs);
  std::cout << "wrote " << seqs.size() << " sequences of " << a.length << " (" << setting.id << ", pool "
            << pool.size() << ") to " << a.out_dir << "\n";
  return kOk;
}

struct SimArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string fixtures;
  std::optional<unsigned> threads;
};

int cmd_simulate(const SimArgs& a) {
  if (!a.seed) throw ConfigError("simulate: refusing to run without --seed");
  const auto cfg = study_config(a.config);
  const auto raw = read_config(a.config);
  const auto setting = task_setting(cfg.task_setting);

  SimulationConfig sim;
  sim.users_per_condition = setting.users_per_condition;
  sim.user = setting.user;
  sim.engine = cfg.engine;
  sim.assistant_profile_id = setting.assistant.profile_id;
  sim.seed = *a.seed;
  if (raw.contains("simulation")) {
    const auto& s = raw.at("simulation");
    try {
      sim.users_per_condition = s.value("users_per_condition", sim.users_per_condition);
      if (s.contains("user")) s.at("user").get_to(sim.user);
      sim.threads = s.value("threads", sim.threads);
    } catch (const Json::exception& e) {
      throw ConfigError(a.config + ": simulation: " + e.what());
    }
  }
  if (a.threads) sim.threads = *a.threads;
  for (const auto& c : cfg.conditions) {
    if (c.assistant.kind == AssistantSourceKind::Llm) sim.engine.fallback_on_missing_explanation = true;
    sim.conditions.push_back({c.condition_id, c.policy});
  }

  ensure_dir(a.out_dir);
  std::vector<ProblemSequence> seqs;
  if (cfg.sequence_files.empty()) {
    // derived stream so sequences and users never share draws
    seqs = preset_sequences(setting, fixtures_dir(a.fixtures), 10, cfg.engine.n_items, mix64(*a.seed ^ 0x5e9ULL));
    write_jsonl((fs::path(a.out_dir) / "sequences.jsonl").string(), seqs);
  } else {
    seqs = load_sequences(cfg.sequence_files);
  }

  auto sessions = simulate_study(sim, seqs);
  std::size_t rejected = 0, interactions = 0;
  for (auto& s : sessions) {
    const auto rec = finalize_session(s, s.interactions.size(), cfg.payment, cfg.quality_gate);
    s.user_attributes[kQualityAttribute] = rec.rejected_for_analysis ? "rejected" : "pass";
    rejected += rec.rejected_for_analysis ? 1 : 0;
    interactions += s.interactions.size();
  }
  write_jsonl((fs::path(a.out_dir) / "sessions.jsonl").string(), sessions);
  std::cout << "simulated " << sessions.size() << " users, " << interactions << " interactions ("
            << rejected << " below the quality gate) -> " << (fs::path(a.out_dir) / "sessions.jsonl").string() << "\n";
  return kOk;
}

struct AnalyzeArgs {
  std::string input;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::string baseline;
  std::size_t resamples = 10'000;
  std::string group_by;
  bool include_rejected = false;
  unsigned threads = 1;
};

int cmd_analyze(const AnalyzeArgs& a) {
  if (!a.seed) throw ConfigError("analyze: --seed is required for the bootstrap");
  AnalysisOptions opt;
  opt.seed = *a.seed;
  opt.n_resamples = a.resamples;
  opt.include_rejected = a.include_rejected;
  opt.threads = a.threads;
  if (!a.baseline.empty()) opt.baseline = a.baseline;
  if (!a.group_by.empty()) opt.group_by = a.group_by;
  const auto sessions = load_jsonl<Session>(a.input);
  const auto result = analyze_sessions(sessions, opt);
  write_analysis(result, a.out_dir);
  std::cout << "analyzed " << sessions.size() - result.excluded_sessions << " sessions in " << result.conditions.size()
            << " conditions (baseline " << result.baseline << ") -> " << a.out_dir << "\n";
  for (const auto& row : result.reliance)
    if (row.window == "all")
      std::cout << "  " << std::left << std::setw(28) << row.condition << " TIR "
                << detail::num(row.report.total_inappropriate) << "  switch " << detail::num(row.report.switch_rate)
                << "\n";
  return kOk;
}

struct TrustArgs {
  std::string input;
  std::string out;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::size_t train_users = 45;
};

int cmd_fit_trust(const TrustArgs& a) {
  const auto sessions = load_jsonl<Session>(a.input);
  std::string warning;
  const auto coefs = fit_trust_model(sessions, &warning);
  if (!warning.empty()) std::cerr << "warning: " << warning << "\n";
  const Json j = coefs;
  if (a.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream f(a.out, std::ios::trunc);
    if (!f) throw DataError("cannot write " + a.out);
    f << j.dump(2) << "\n";
    std::cout << "fitted on " << sessions.size() << " sessions -> " << a.out << "\n";
  }
  return kOk;
}

int cmd_eval_trust(const TrustArgs& a) {
  if (!a.seed) throw ConfigError("eval-trust: --seed is required for the train/test split");
  const auto sessions = load_jsonl<Session>(a.input);
  const auto [train, test] = split_sessions(sessions, a.train_users, *a.seed);
  const auto rows = trust_estimator_table(train, test);
  ensure_dir(a.out_dir);
  std::ofstream f(fs::path(a.out_dir) / "trust_eval.csv", std::ios::trunc);
  if (!f) throw DataError("cannot write trust_eval.csv");
  f << "method,parameter,split,pearson_r,low_trust_f1,high_trust_f1,n_interactions\n";
  Json j = Json::array();
  for (const auto& r : rows)
    for (const auto& [split, ev] : {std::pair{"train", r.train}, std::pair{"test", r.test}}) {
      f << to_string(r.method) << "," << detail::num(r.parameter) << "," << split << "," << detail::num(ev.pearson_r)
        << "," << detail::num(ev.low_trust_f1) << "," << detail::num(ev.high_trust_f1) << "," << ev.n_interactions
        << "\n";
      j.push_back({{"method", r.method},
                   {"parameter", r.parameter},
                   {"split", split},
                   {"pearson_r", ev.pearson_r ? Json(*ev.pearson_r) : Json(nullptr)},
                   {"low_trust_f1", ev.low_trust_f1 ? Json(*ev.low_trust_f1) : Json(nullptr)},
                   {"high_trust_f1", ev.high_trust_f1 ? Json(*ev.high_trust_f1) : Json(nullptr)},
                   {"n_interactions", ev.n_interactions}});
    }
  std::ofstream(fs::path(a.out_dir) / "trust_eval.json", std::ios::trunc) << j.dump(2) << "\n";
  std::cout << "trained on " << train.size() << " users, tested on " << test.size() << "\n";
  for (const auto& r : rows)
    std::cout << "  " << std::left << std::setw(16) << to_string(r.method) << " test r "
              << detail::num(r.test.pearson_r) << "  F1 low " << detail::num(r.test.low_trust_f1) << "  F1 high "
              << detail::num(r.test.high_trust_f1) << "\n";
  return kOk;
}

fs::path data_dir() {
  const char* env = std::getenv("TRUSTLAB_DATA_DIR");
  return env && *env ? fs::path(env) : fs::path("study-data");
}

struct ServeArgs {
  std::string config;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string out_dir = ".";
  bool include_partial = false;
};

httplib::Server* g_server = nullptr;

int cmd_serve(const ServeArgs& a) {
  const auto cfg = study_config(a.config);
  StudyService service(cfg, load_sequences(cfg.sequence_files), data_dir());
  httplib::Server server;
  mount_study_routes(server, service);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cout << "study " << cfg.study_id << " listening on " << a.host << ":" << a.port << " (log "
            << service.log_path().string() << ")" << std::endl;
  if (!server.listen(a.host, a.port)) throw DataError("cannot listen on " + a.host + ":" + std::to_string(a.port));
  return kOk;
}

int cmd_export(const ServeArgs& a) {
  const auto cfg = study_config(a.config);
  StudyService service(cfg, load_sequences(cfg.sequence_files), data_dir());
  const auto sessions = service.export_sessions(a.include_partial);
  ensure_dir(a.out_dir);
  write_jsonl((fs::path(a.out_dir) / "sessions.jsonl").string(), sessions);
  std::ofstream f(fs::path(a.out_dir) / "settlements.csv", std::ios::trunc);
  if (!f) throw DataError("cannot write settlements.csv");
  f << "session_id,user_id,condition_id,rounds,correct_finals,initial_accuracy,base,bonus,total,rejected_for_analysis\n";
  for (const auto& r : service.settlements())
    f << r.session_id << "," << r.user_id << "," << r.condition_id << "," << r.rounds << "," << r.correct_finals << ","
      << std::setprecision(6) << r.initial_accuracy << "," << std::fixed << std::setprecision(2) << r.base << ","
      << r.bonus << "," << r.total << std::defaultfloat << "," << (r.rejected_for_analysis ? "true" : "false") << "\n";
  std::cout << "exported " << sessions.size() << " sessions -> " << a.out_dir << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trustlab: trust-adaptive AI assistance studies"};
  app.require_subcommand(1);
  int rc = kOk;

  GenArgs gen;
  auto* g = app.add_subcommand("gen-sequences", "Generate problem sequences for a task setting");
  g->add_option("--preset", gen.preset, "Task setting: ArcC, ArcO, DiagC, DiagO");
  g->add_option("--config", gen.config, "Study config (uses its task_setting)")->check(CLI::ExistingFile);
  g->add_option("--seed", gen.seed, "RNG seed");
  g->add_option("--out-dir", gen.out_dir);
  g->add_option("--fixtures", gen.fixtures, "Fixture directory (default $TRUSTLAB_FIXTURES or built-in)");
  g->add_option("--count", gen.count, "Number of sequences")->check(CLI::PositiveNumber);
  g->add_option("--length", gen.length, "Problems per sequence")->check(CLI::PositiveNumber);
  g->callback([&] { rc = cmd_gen_sequences(gen); });

  SimArgs sim;
  auto* s = app.add_subcommand("simulate", "Run synthetic users through a study config");
  s->add_option("--config", sim.config)->required()->check(CLI::ExistingFile);
  s->add_option("--seed", sim.seed, "RNG seed (required)");
  s->add_option("--out-dir", sim.out_dir);
  s->add_option("--fixtures", sim.fixtures);
  s->add_option("--threads", sim.threads);
  s->callback([&] { rc = cmd_simulate(sim); });

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Reliance, trust-binned and bootstrap tables from a session log");
  a->add_option("--input", an.input, "sessions.jsonl")->required()->check(CLI::ExistingFile);
  a->add_option("--out-dir", an.out_dir);
  a->add_option("--seed", an.seed, "Bootstrap seed (required)");
  a->add_option("--baseline", an.baseline, "Baseline condition for comparisons");
  a->add_option("--resamples", an.resamples)->check(CLI::PositiveNumber);
  a->add_option("--group-by", an.group_by, "User attribute for group comparison");
  a->add_flag("--include-rejected", an.include_rejected, "Keep sessions that failed the quality gate");
  a->add_option("--threads", an.threads);
  a->callback([&] { rc = cmd_analyze(an); });

  TrustArgs fit;
  auto* f = app.add_subcommand("fit-trust", "Fit the trust regression model");
  f->add_option("--input", fit.input)->required()->check(CLI::ExistingFile);
  f->add_option("--out", fit.out, "Model JSON (default stdout)");
  f->callback([&] { rc = cmd_fit_trust(fit); });

  TrustArgs ev;
  auto* e = app.add_subcommand("eval-trust", "Train/test table for all trust estimators");
  e->add_option("--input", ev.input)->required()->check(CLI::ExistingFile);
  e->add_option("--out-dir", ev.out_dir);
  e->add_option("--seed", ev.seed, "Split seed (required)");
  e->add_option("--train-users", ev.train_users)->check(CLI::PositiveNumber);
  e->callback([&] { rc = cmd_eval_trust(ev); });

  ServeArgs srv;
  auto* sv = app.add_subcommand("serve", "Serve a live study (data dir: $TRUSTLAB_DATA_DIR, default ./study-data)");
  sv->add_option("--config", srv.config)->required()->check(CLI::ExistingFile);
  sv->add_option("--port", srv.port)->check(CLI::Range(1, 65535));
  sv->add_option("--host", srv.host);
  sv->callback([&] { rc = cmd_serve(srv); });

  ServeArgs ex;
  auto* x = app.add_subcommand("export", "Export sessions and settlements from a study's event log");
  x->add_option("--config", ex.config)->required()->check(CLI::ExistingFile);
  x->add_option("--out-dir", ex.out_dir);
  x->add_flag("--include-partial", ex.include_partial, "Include unfinished sessions");
  x->callback([&] { rc = cmd_export(ex); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? kOk : kUsageError;
  } catch (const ConfigError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return kUsageError;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kDataError;
  } catch (const Json::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kDataError;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kDataError;
  }
  return rc;
}
