// constraint-forge: builds curriculum preference datasets stage by stage.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cforge/cforge.h"

namespace {

struct Options {
  std::string config;
  std::optional<std::string> output_dir;
  std::optional<std::string> seeds;
  std::optional<int> n_constraints;
  std::optional<std::uint64_t> rng_seed;
  std::optional<std::string> judger_mode;
  std::optional<std::string> mock_script;
  std::optional<std::string> provider;
  std::optional<std::size_t> top_n;
  std::optional<std::string> replay;
  std::optional<std::uint64_t> replay_budget;
  std::optional<std::string> merge_plan;
  std::optional<int> workers;
  std::optional<std::size_t> seed_count;
  std::string input;
  std::vector<std::string> paths;
  bool json = false;
  int verbosity = 0;
  bool quiet = false;
};

void AddOverrides(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config, "Pipeline config (JSON)");
  cmd->add_option("-o,--output-dir", o.output_dir, "Artifact root");
  cmd->add_option("--seeds", o.seeds, "Seed records (JSONL)");
  cmd->add_option("-n,--n-constraints", o.n_constraints, "Constraints added per chain");
  cmd->add_option("--rng-seed", o.rng_seed, "Base RNG seed");
  cmd->add_option("--judger-mode", o.judger_mode, "single or both_orders")
      ->check(CLI::IsMember({"single", "both_orders"}));
  cmd->add_option("--provider", o.provider, "mock or http")->check(CLI::IsMember({"mock", "http"}));
  cmd->add_option("--mock-script", o.mock_script, "Scripted responses for the mock provider");
  cmd->add_option("--top-n", o.top_n, "Verb histogram length");
  cmd->add_option("--replay", o.replay, "Replay conversations (JSONL)");
  cmd->add_option("--replay-budget", o.replay_budget, "Total replay examples");
  cmd->add_option("--merge-plan", o.merge_plan, "Stage plan as JSON, e.g. [[1,2,3],[4,5]]");
  cmd->add_option("--workers", o.workers, "Parallel chains");
  cmd->add_option("--seed-count", o.seed_count, "Seeds kept after dedupe");
}

nlohmann::ordered_json Overrides(const Options& o) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (o.output_dir) j["output_dir"] = *o.output_dir;
  if (o.seeds) j["seeds_path"] = *o.seeds;
  if (o.n_constraints) j["n_constraints"] = *o.n_constraints;
  if (o.rng_seed) j["rng_seed"] = *o.rng_seed;
  if (o.judger_mode) j["judger_mode"] = *o.judger_mode;
  if (o.top_n) j["top_n"] = *o.top_n;
  if (o.replay) j["replay_path"] = *o.replay;
  if (o.replay_budget) j["replay_budget"] = *o.replay_budget;
  if (o.workers) j["workers"] = *o.workers;
  if (o.seed_count) j["seed_count"] = *o.seed_count;
  if (o.merge_plan) {
    auto plan = nlohmann::ordered_json::parse(*o.merge_plan, nullptr, false);
    if (plan.is_discarded()) throw CLI::ValidationError("--merge-plan", "not valid JSON");
    j["merge_plan"] = plan;
  }
  if (o.provider) j["provider"]["kind"] = *o.provider;
  if (o.mock_script) j["provider"]["mock_script"] = *o.mock_script;
  return j;
}

int ReportFailure(cf_status status, const std::string& stage) {
  const nlohmann::ordered_json err = {{"status", "error"},
                                      {"stage", stage},
                                      {"code", cf_status_string(status)},
                                      {"message", cf_last_error()}};
  std::cerr << err.dump() << "\n";
  return status == CF_CONFIG ? 2 : 1;
}

cf_pipeline* Open(const Options& o, int& exit_code) {
  const std::string overrides = Overrides(o).dump();
  cf_pipeline* p = nullptr;
  const cf_status st = o.config.empty()
                           ? cf_pipeline_create_from_json("{}", ".", overrides.c_str(), &p)
                           : cf_pipeline_create_from_file(o.config.c_str(), overrides.c_str(), &p);
  if (st != CF_OK) {
    exit_code = ReportFailure(st, "config");
    return nullptr;
  }
  return p;
}

int RunStage(const Options& o, const std::string& stage) {
  int code = 0;
  cf_pipeline* p = Open(o, code);
  if (p == nullptr) return code;
  cf_status st;
  if ((stage == "stats" || stage == "verbs") && !o.input.empty()) {
    st = cf_pipeline_report(p, stage.c_str(), o.input.c_str());
  } else {
    st = cf_pipeline_run_stage(p, stage.c_str());
  }
  if (st != CF_OK) {
    code = ReportFailure(st, stage);
  } else if (!o.quiet) {
    std::fprintf(stderr, "%s: ok (%s)\n", stage.c_str(), cf_pipeline_output_dir(p));
  }
  cf_pipeline_destroy(p);
  return code;
}

int Validate(const Options& o) {
  std::vector<std::string> paths = o.paths;
  if (paths.empty()) {
    int code = 0;
    cf_pipeline* p = Open(o, code);
    if (p == nullptr) return code;
    paths.emplace_back(cf_pipeline_output_dir(p));
    cf_pipeline_destroy(p);
  }
  std::vector<const char*> raw;
  for (const auto& s : paths) raw.push_back(s.c_str());
  int ok = 0;
  char* report = nullptr;
  const cf_status st = cf_validate_paths(raw.data(), raw.size(), o.json ? 1 : 0, &ok, &report);
  if (st != CF_OK) return ReportFailure(st, "validate");
  std::cout << report << (o.json ? "\n" : "");
  cf_string_free(report);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build curriculum preference datasets from seed instructions"};
  app.set_version_flag("--version", std::string(cf_version()));
  app.require_subcommand(1);

  Options o;
  app.add_flag("-v,--verbose", o.verbosity, "More logging (repeatable)");
  app.add_flag("-q,--quiet", o.quiet, "Errors only");

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"seeds", "Load, filter and dedupe seed instructions"},
      {"build", "Grow constraint chains from the seeds"},
      {"judge", "Run incumbent/challenger tournaments over the chains"},
      {"assemble", "Bin pairs into curriculum stages and write the manifest"},
      {"stats", "Per-stage dataset statistics"},
      {"verbs", "Leading-verb histogram of stage instructions"},
      {"run", "Every stage end to end"},
  };
  std::string chosen;
  for (const auto& [name, help] : stages) {
    auto* cmd = app.add_subcommand(name, help);
    AddOverrides(cmd, o);
    if (name == "stats" || name == "verbs") {
      cmd->add_option("-i,--input", o.input, "Artifact root to analyse (defaults to output dir)");
    }
    cmd->callback([&chosen, n = name] { chosen = n; });
  }
  auto* validate = app.add_subcommand("validate", "Check artifact files and trees");
  AddOverrides(validate, o);
  validate->add_option("paths", o.paths, "Artifact directories or files (defaults to output dir)");
  validate->add_flag("--json", o.json, "Machine-readable report");
  validate->callback([&chosen] { chosen = "validate"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  cf_set_log_level(o.quiet ? 3 : (o.verbosity > 0 ? 0 : 1));
  try {
    if (chosen == "validate") return Validate(o);
    return RunStage(o, chosen);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}
