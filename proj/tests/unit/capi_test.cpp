#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <string>

#include "cforge/cforge.h"
#include "test_util.hpp"

namespace {

using cforge::testing::FixtureDir;
using cforge::testing::TempDir;

std::string Take(char* s) {
  std::string out = s ? s : "";
  cf_string_free(s);
  return out;
}

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STREQ(cf_version(), "0.1.0");
  EXPECT_STREQ(cf_status_string(CF_OK), "ok");
  EXPECT_STREQ(cf_status_string(CF_CONFIG), "config");
  EXPECT_STREQ(cf_status_string(CF_RATE_LIMITED), "rate_limited");
}

TEST(CApi, NullArgumentsAreRejected) {
  EXPECT_EQ(cf_pipeline_create_from_file(nullptr, nullptr, nullptr), CF_INVALID_ARGUMENT);
  EXPECT_STRNE(cf_last_error(), "");
  double tau = 0;
  EXPECT_EQ(cf_kendall_tau(nullptr, nullptr, 2, &tau), CF_INVALID_ARGUMENT);
  cf_pipeline_destroy(nullptr);
}

TEST(CApi, GoldenRunThroughHandle) {
  TempDir dir;
  const std::string overrides = R"({"output_dir":")" + (dir / "out").string() + R"("})";
  cf_pipeline* p = nullptr;
  ASSERT_EQ(cf_pipeline_create_from_file((FixtureDir() / "golden/config.json").c_str(), overrides.c_str(), &p),
            CF_OK)
      << cf_last_error();
  EXPECT_EQ(std::string(cf_pipeline_output_dir(p)), (dir / "out").string());
  ASSERT_EQ(cf_pipeline_run_stage(p, "run"), CF_OK) << cf_last_error();
  EXPECT_STREQ(cf_last_error(), "");
  EXPECT_EQ(cf_pipeline_upstream_calls(p), 63u);

  char* summary = nullptr;
  ASSERT_EQ(cf_pipeline_summary_json(p, &summary), CF_OK);
  const auto j = cforge::Json::parse(Take(summary));
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["judge"]["pairs"], 7);

  char* config = nullptr;
  ASSERT_EQ(cf_pipeline_config_json(p, &config), CF_OK);
  EXPECT_EQ(cforge::Json::parse(Take(config))["n_constraints"], 5);

  EXPECT_EQ(cf_pipeline_run_stage(p, "bogus"), CF_INVALID_ARGUMENT);
  EXPECT_EQ(cf_pipeline_report(p, "stats", (dir / "none").c_str()), CF_IO);
  EXPECT_EQ(cf_pipeline_report(p, "verbs", nullptr), CF_OK) << cf_last_error();

  const std::string root = (dir / "out").string();
  const char* paths[] = {root.c_str()};
  int ok = 0;
  char* report = nullptr;
  ASSERT_EQ(cf_validate_paths(paths, 1, 1, &ok, &report), CF_OK);
  EXPECT_EQ(ok, 1);
  EXPECT_EQ(cforge::Json::parse(Take(report))["violations"].size(), 0u);
  cf_pipeline_destroy(p);
}

TEST(CApi, ConfigErrorsMapToStatus) {
  cf_pipeline* p = nullptr;
  EXPECT_EQ(cf_pipeline_create_from_json(R"({"n_constraints":5,"merge_plan":[[1,2,3],[4]]})", ".", nullptr, &p),
            CF_CONFIG);
  EXPECT_EQ(p, nullptr);
  EXPECT_NE(std::string(cf_last_error()).find("merge_plan"), std::string::npos);
  EXPECT_EQ(cf_pipeline_create_from_json("{not json", ".", nullptr, &p), CF_CONFIG);
  EXPECT_EQ(cf_pipeline_create_from_json("{}", ".", R"({"typo":1})", &p), CF_CONFIG);
}

TEST(CApi, NumericHelpers) {
  const char* a[] = {"x", "y", "z"};
  const char* b[] = {"y", "x", "z"};
  double v = 0;
  ASSERT_EQ(cf_kendall_tau(a, b, 3, &v), CF_OK);
  EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  ASSERT_EQ(cf_position_consistency(a, b, 3, &v), CF_OK);
  EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const char* dup[] = {"x", "x", "z"};
  EXPECT_EQ(cf_kendall_tau(a, dup, 3, &v), CF_INVALID_ARGUMENT);

  const cf_loss_sample s{-1.0, -1.0, -2.0, -2.0};
  cf_loss loss{};
  ASSERT_EQ(cf_dpo_sft_loss(&s, 1, 0.1, &loss), CF_OK);
  EXPECT_NEAR(loss.dpo, std::log(2.0), 1e-12);
  EXPECT_EQ(cf_dpo_sft_loss(&s, 1, -1.0, &loss), CF_INVALID_ARGUMENT);

  const uint64_t sizes[] = {10595, 6448};
  uint64_t out[2] = {};
  ASSERT_EQ(cf_allocate_replay(sizes, 2, 10000, out), CF_OK);
  EXPECT_EQ(out[0], 6217u);
  EXPECT_EQ(out[1], 3783u);
}

}  // namespace
