#include "cforge/cforge.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cforge/analytics.hpp"
#include "cforge/curriculum.hpp"
#include "cforge/error.hpp"
#include "cforge/pipeline.hpp"
#include "cforge/validate.hpp"

struct cf_pipeline {
  std::unique_ptr<cforge::Pipeline> impl;
  std::string output_dir;
};

namespace {

thread_local std::string g_last_error;

cf_status ToStatus(cforge::ErrorCode code) {
  using cforge::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return CF_INVALID_ARGUMENT;
    case ErrorCode::kConfig: return CF_CONFIG;
    case ErrorCode::kIo: return CF_IO;
    case ErrorCode::kParse: return CF_PARSE;
    case ErrorCode::kTransport: return CF_TRANSPORT;
    case ErrorCode::kAuthentication: return CF_AUTHENTICATION;
    case ErrorCode::kRateLimited: return CF_RATE_LIMITED;
    case ErrorCode::kEmptyCompletion: return CF_EMPTY_COMPLETION;
    case ErrorCode::kUnscripted: return CF_UNSCRIPTED;
    case ErrorCode::kExhausted: return CF_EXHAUSTED;
    case ErrorCode::kValidation: return CF_VALIDATION;
    case ErrorCode::kStage: return CF_STAGE;
  }
  return CF_INTERNAL;
}

cf_status Fail(cf_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename Fn>
cf_status Guard(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const cforge::Error& e) {
    return Fail(ToStatus(e.code()), e.what());
  } catch (const std::exception& e) {
    return Fail(CF_INTERNAL, e.what());
  } catch (...) {
    return Fail(CF_INTERNAL, "unknown error");
  }
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

cforge::Json ParseOverrides(const char* overrides_json) {
  if (overrides_json == nullptr || *overrides_json == '\0') return cforge::Json::object();
  cforge::Json j = cforge::Json::parse(overrides_json, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw cforge::Error(cforge::ErrorCode::kConfig, "overrides must be a JSON object");
  }
  return j;
}

cf_status Create(cforge::PipelineConfig config, const char* overrides_json, cf_pipeline** out) {
  config.Merge(ParseOverrides(overrides_json));
  auto handle = std::make_unique<cf_pipeline>();
  handle->output_dir = config.output_dir.string();
  handle->impl = std::make_unique<cforge::Pipeline>(std::move(config));
  *out = handle.release();
  return CF_OK;
}

std::vector<std::string> Items(const char* const* items, std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (items[i] == nullptr) throw cforge::Error(cforge::ErrorCode::kInvalidArgument, "null ranking item");
    out.emplace_back(items[i]);
  }
  return out;
}

}  // namespace

extern "C" {

const char* cf_version(void) { return "0.1.0"; }

const char* cf_status_string(cf_status status) {
  switch (status) {
    case CF_OK: return "ok";
    case CF_INVALID_ARGUMENT: return "invalid_argument";
    case CF_CONFIG: return "config";
    case CF_IO: return "io";
    case CF_PARSE: return "parse";
    case CF_TRANSPORT: return "transport";
    case CF_AUTHENTICATION: return "authentication";
    case CF_RATE_LIMITED: return "rate_limited";
    case CF_EMPTY_COMPLETION: return "empty_completion";
    case CF_UNSCRIPTED: return "unscripted";
    case CF_EXHAUSTED: return "exhausted";
    case CF_VALIDATION: return "validation";
    case CF_STAGE: return "stage";
    case CF_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* cf_last_error(void) { return g_last_error.c_str(); }

void cf_string_free(char* s) { std::free(s); }

void cf_set_log_level(int level) {
  static const auto logger = [] {
    auto l = spdlog::stderr_color_mt("cforge");
    spdlog::set_default_logger(l);
    return l;
  }();
  static constexpr spdlog::level::level_enum kLevels[] = {
      spdlog::level::debug, spdlog::level::info, spdlog::level::warn, spdlog::level::err,
      spdlog::level::off};
  logger->set_level(kLevels[level < 0 ? 0 : (level > 4 ? 4 : level)]);
}

cf_status cf_pipeline_create_from_file(const char* config_path, const char* overrides_json,
                                       cf_pipeline** out) {
  if (config_path == nullptr || out == nullptr) return Fail(CF_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return Guard([&] {
    return Create(cforge::PipelineConfig::FromFile(config_path), overrides_json, out);
  });
}

cf_status cf_pipeline_create_from_json(const char* config_json, const char* base_dir,
                                       const char* overrides_json, cf_pipeline** out) {
  if (config_json == nullptr || out == nullptr) return Fail(CF_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return Guard([&] {
    cforge::Json j = cforge::Json::parse(config_json, nullptr, false);
    if (j.is_discarded()) throw cforge::Error(cforge::ErrorCode::kConfig, "config is not valid JSON");
    return Create(cforge::PipelineConfig::FromJson(j, base_dir ? base_dir : ""), overrides_json, out);
  });
}

void cf_pipeline_destroy(cf_pipeline* pipeline) { delete pipeline; }

cf_status cf_pipeline_run_stage(cf_pipeline* pipeline, const char* stage) {
  if (pipeline == nullptr || stage == nullptr) return Fail(CF_INVALID_ARGUMENT, "null argument");
  return Guard([&] {
    pipeline->impl->RunStage(stage);
    return CF_OK;
  });
}

cf_status cf_pipeline_report(cf_pipeline* pipeline, const char* which, const char* input_root) {
  if (pipeline == nullptr || which == nullptr) return Fail(CF_INVALID_ARGUMENT, "null argument");
  return Guard([&] {
    std::optional<std::filesystem::path> root;
    if (input_root != nullptr && *input_root != '\0') root = input_root;
    const std::string w = which;
    if (w == "stats") {
      pipeline->impl->Stats(root);
    } else if (w == "verbs") {
      pipeline->impl->Verbs(root);
    } else {
      throw cforge::Error(cforge::ErrorCode::kInvalidArgument, "report must be stats or verbs");
    }
    return CF_OK;
  });
}

cf_status cf_pipeline_summary_json(const cf_pipeline* pipeline, char** out_json) {
  if (pipeline == nullptr || out_json == nullptr) return Fail(CF_INVALID_ARGUMENT, "null argument");
  return Guard([&] {
    const auto& s = pipeline->impl->summary();
    cforge::Json j = s.data;
    j["warnings"] = s.warnings;
    *out_json = Dup(j.dump(2));
    return CF_OK;
  });
}

cf_status cf_pipeline_config_json(const cf_pipeline* pipeline, char** out_json) {
  if (pipeline == nullptr || out_json == nullptr) return Fail(CF_INVALID_ARGUMENT, "null argument");
  return Guard([&] {
    *out_json = Dup(pipeline->impl->config().ToJson().dump(2));
    return CF_OK;
  });
}

const char* cf_pipeline_output_dir(const cf_pipeline* pipeline) {
  return pipeline == nullptr ? "" : pipeline->output_dir.c_str();
}

uint64_t cf_pipeline_upstream_calls(const cf_pipeline* pipeline) {
  return pipeline == nullptr ? 0 : pipeline->impl->upstream_calls();
}

cf_status cf_validate_paths(const char* const* paths, size_t count, int as_json, int* out_ok,
                            char** out_report) {
  if ((paths == nullptr && count > 0) || out_ok == nullptr) {
    return Fail(CF_INVALID_ARGUMENT, "null argument");
  }
  return Guard([&] {
    std::vector<std::filesystem::path> ps;
    for (size_t i = 0; i < count; ++i) {
      if (paths[i] == nullptr) throw cforge::Error(cforge::ErrorCode::kInvalidArgument, "null path");
      ps.emplace_back(paths[i]);
    }
    const auto report = cforge::ValidatePaths(ps);
    *out_ok = report.ok() ? 1 : 0;
    if (out_report != nullptr) *out_report = Dup(as_json ? report.ToJson().dump(2) : report.ToText());
    return CF_OK;
  });
}

cf_status cf_kendall_tau(const char* const* r1, const char* const* r2, size_t n, double* out) {
  if (r1 == nullptr || r2 == nullptr || out == nullptr) return Fail(CF_INVALID_ARGUMENT, "null argument");
  return Guard([&] {
    *out = cforge::KendallTau(cforge::Ranking(Items(r1, n)), cforge::Ranking(Items(r2, n)));
    return CF_OK;
  });
}

cf_status cf_position_consistency(const char* const* r1, const char* const* r2, size_t n,
                                  double* out) {
  if (r1 == nullptr || r2 == nullptr || out == nullptr) return Fail(CF_INVALID_ARGUMENT, "null argument");
  return Guard([&] {
    *out = cforge::PositionConsistency(cforge::Ranking(Items(r1, n)), cforge::Ranking(Items(r2, n)));
    return CF_OK;
  });
}

cf_status cf_dpo_sft_loss(const cf_loss_sample* batch, size_t n, double beta, cf_loss* out) {
  if ((batch == nullptr && n > 0) || out == nullptr) return Fail(CF_INVALID_ARGUMENT, "null argument");
  return Guard([&] {
    std::vector<cforge::LossSample> samples(n);
    for (size_t i = 0; i < n; ++i) {
      samples[i] = {batch[i].logp_policy_chosen, batch[i].logp_ref_chosen,
                    batch[i].logp_policy_rejected, batch[i].logp_ref_rejected};
    }
    const auto loss = cforge::DpoSftLoss(samples, beta);
    *out = {loss.dpo, loss.sft, loss.total};
    return CF_OK;
  });
}

cf_status cf_allocate_replay(const uint64_t* stage_sizes, size_t n, uint64_t budget, uint64_t* out) {
  if ((stage_sizes == nullptr || out == nullptr) && n > 0) return Fail(CF_INVALID_ARGUMENT, "null argument");
  return Guard([&] {
    const auto shares = cforge::AllocateReplay(std::span<const uint64_t>(stage_sizes, n), budget);
    for (size_t i = 0; i < n; ++i) out[i] = shares[i];
    return CF_OK;
  });
}

}  // extern "C"
