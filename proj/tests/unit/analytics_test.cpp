#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cforge/analytics.hpp"
#include "cforge/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace cforge {
namespace {

using testing::Spit;
using testing::TempDir;

constexpr double kSoftplusMinus2 = 0.1269280110429724964437268063583044314343;
constexpr double kLn2 = 0.6931471805599453094172321214581765680755;

double Between(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.UniformReal(); }

std::vector<std::string> Items(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back(std::string(1, static_cast<char>('a' + i)));
  return v;
}

TEST(KendallTau, Examples) {
  const Ranking r({"x", "y", "z"});
  EXPECT_DOUBLE_EQ(KendallTau(r, r), 1.0);
  EXPECT_DOUBLE_EQ(KendallTau(r, Ranking({"z", "y", "x"})), -1.0);
  EXPECT_NEAR(KendallTau(r, Ranking({"y", "x", "z"})), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(KendallTau(Ranking({"a", "b", "c", "d"}), Ranking({"b", "a", "c", "d"})), 2.0 / 3.0,
              1e-15);
}

TEST(KendallTau, RejectsMismatchedOrDegenerateRankings) {
  EXPECT_THROW(Ranking({}), Error);
  EXPECT_THROW(Ranking({"a", "a"}), Error);
  EXPECT_THROW(KendallTau(Ranking({"a", "b"}), Ranking({"a", "c"})), Error);
  EXPECT_THROW(KendallTau(Ranking({"a"}), Ranking({"a"})), Error);
  EXPECT_THROW(PositionConsistency(Ranking({"a", "b"}), Ranking({"a", "b", "c"})), Error);
}

TEST(PositionConsistency, Examples) {
  const Ranking r({"a", "b", "c", "d"});
  EXPECT_DOUBLE_EQ(PositionConsistency(r, r), 1.0);
  EXPECT_DOUBLE_EQ(PositionConsistency(r, Ranking({"b", "c", "d", "a"})), 0.0);
  EXPECT_DOUBLE_EQ(PositionConsistency(r, Ranking({"a", "b", "d", "c"})), 0.5);
}

TEST(RankMetrics, AllPermutationPairsUpToFive) {
  for (int n = 2; n <= 5; ++n) {
    std::vector<std::vector<std::string>> perms;
    auto items = Items(n);
    do perms.push_back(items);
    while (std::next_permutation(items.begin(), items.end()));
    for (const auto& a : perms) {
      for (const auto& b : perms) {
        const double tau = KendallTau(Ranking(a), Ranking(b));
        EXPECT_NEAR(tau, testing::KendallByInversions(a, b), 1e-12);
        EXPECT_EQ(tau, KendallTau(Ranking(b), Ranking(a)));
        EXPECT_NEAR(PositionConsistency(Ranking(a), Ranking(b)),
                    testing::ConsistencyByFixedPoints(a, b), 1e-12);
      }
    }
  }
}

TEST(RankMetrics, AllPermutationsAgainstIdentityUpToEight) {
  for (int n = 2; n <= 8; ++n) {
    const auto base = Items(n);
    auto items = base;
    do {
      ASSERT_NEAR(KendallTau(Ranking(base), Ranking(items)), testing::KendallByInversions(base, items),
                  1e-12);
      ASSERT_NEAR(PositionConsistency(Ranking(base), Ranking(items)),
                  testing::ConsistencyByFixedPoints(base, items), 1e-12);
    } while (std::next_permutation(items.begin(), items.end()));
  }
}

TEST(Loss, ZeroMarginIsLn2) {
  const LossSample s{-1.0, -1.0, -2.0, -2.0};
  const auto l = SampleLoss(s, 0.1);
  EXPECT_NEAR(l.dpo, kLn2, 1e-12);
  EXPECT_NEAR(l.sft, 1.0, 1e-15);
  EXPECT_NEAR(l.total, kLn2 + 1.0, 1e-12);
}

TEST(Loss, FrozenSoftplusValue) {
  EXPECT_NEAR(Softplus(-2.0), kSoftplusMinus2, 1e-15);
  // margin = 1 * ((0 - -1) - (-1 - 0)) = 2 -> -log sigmoid(2) = softplus(-2)
  const LossSample s{0.0, -1.0, -1.0, 0.0};
  EXPECT_DOUBLE_EQ(PreferenceMargin(s, 1.0), 2.0);
  EXPECT_NEAR(SampleLoss(s, 1.0).dpo, kSoftplusMinus2, 1e-15);
  EXPECT_NEAR(Softplus(800.0), 800.0, 1e-9);
  EXPECT_NEAR(Softplus(-800.0), 0.0, 1e-300);
}

TEST(Loss, MeanReduction) {
  const std::vector<LossSample> batch = {{-1.0, -1.0, -1.0, -1.0}, {-2.0, -2.0, -2.0, -2.0}};
  const auto l = DpoSftLoss(batch, 0.1);
  EXPECT_NEAR(l.sft, 1.5, 1e-15);
  EXPECT_NEAR(l.dpo, kLn2, 1e-12);
  EXPECT_NEAR(l.total, l.dpo + l.sft, 1e-15);
}

TEST(Loss, DecreasesAsMarginGrows) {
  double previous = std::numeric_limits<double>::infinity();
  for (double m = -20.0; m <= 20.0; m += 0.5) {
    const double loss = SampleLoss({m, 0.0, 0.0, 0.0}, 0.5).dpo;
    EXPECT_LT(loss, previous);
    previous = loss;
  }
}

TEST(Loss, MatchesHighPrecisionReference) {
  Rng rng(17);
  std::vector<LossSample> batch;
  for (int i = 0; i < 300; ++i) {
    LossSample s{-Between(rng, 0, 60), -Between(rng, 0, 60), -Between(rng, 0, 60),
                 -Between(rng, 0, 60)};
    const double beta = Between(rng, 0.01, 1.0);
    const auto want = static_cast<double>(testing::HighPrecisionSampleLoss(s, beta));
    EXPECT_NEAR(SampleLoss(s, beta).total, want, 1e-10 * std::max(1.0, std::abs(want)));
    batch.push_back(s);
  }
  EXPECT_NEAR(DpoSftLoss(batch, 0.1).total,
              static_cast<double>(testing::HighPrecisionMeanLoss(batch, 0.1)), 1e-10);
}

TEST(Loss, RejectsBadInputs) {
  const std::vector<LossSample> one = {{-1, -1, -1, -1}};
  EXPECT_THROW(DpoSftLoss({}, 0.1), Error);
  EXPECT_THROW(DpoSftLoss(one, 0.0), Error);
  const std::vector<LossSample> nan = {{std::nan(""), -1, -1, -1}};
  EXPECT_THROW(DpoSftLoss(nan, 0.1), Error);
}

TEST(DatasetStats, AveragesAndEmptyStages) {
  TempDir dir;
  Spit(dir / "s1.jsonl",
       "{\"instruction\":\"one two three\",\"chosen\":\"x\",\"rejected\":\"y\"}\n"
       "{\"instruction\":\"one  two three four\\tfive\",\"chosen\":\"x\",\"rejected\":\"y\"}\n");
  Spit(dir / "s2.jsonl", "");
  Spit(dir / "s3.jsonl", "{\"instruction\":\"a b\"}\nnot json\n{\"chosen\":\"x\"}\n");
  const auto report = DatasetStats({{"Curri.1", 1, 3, dir / "s1.jsonl"},
                                    {"Curri.2", 4, 4, dir / "s2.jsonl"},
                                    {"Curri.3", 5, 5, dir / "s3.jsonl"}});
  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[0].constraints, "1-3");
  EXPECT_EQ(report.rows[0].preference_pairs, 2u);
  EXPECT_DOUBLE_EQ(report.rows[0].avg_instruction_length, 4.0);
  EXPECT_EQ(report.rows[1].constraints, "4");
  EXPECT_TRUE(report.rows[1].empty);
  EXPECT_EQ(report.rows[1].avg_instruction_length, 0.0);
  EXPECT_EQ(report.rows[2].preference_pairs, 1u);
  EXPECT_EQ(report.rows[2].malformed.size(), 2u);
  EXPECT_NE(report.ToText().find("Curri.1"), std::string::npos);
  EXPECT_NE(report.ToText().find("(empty)"), std::string::npos);
  EXPECT_EQ(report.ToJson()["rows"].size(), 3u);
  EXPECT_THROW(DatasetStats({{"x", 1, 1, dir / "missing.jsonl"}}), Error);
}

TEST(VerbFrequency, TopNWithLexicon) {
  const std::vector<std::string> texts = {"Write a poem", "write code", "Explain X", "Xylophones rock"};
  const auto hist = VerbFrequency(texts, 2);
  EXPECT_EQ(hist, (VerbHistogram{{"write", 2}, {"explain", 1}}));
  EXPECT_EQ(VerbFrequency(texts, 5, {"xylophones"}), (VerbHistogram{{"xylophones", 1}}));
  EXPECT_THROW(VerbFrequency(texts, 0), Error);
  EXPECT_EQ(VerbHistogramJson(hist)[0]["verb"], "write");
  EXPECT_NE(VerbHistogramText(hist).find("explain"), std::string::npos);
}

TEST(VerbFrequency, TiesAreAlphabetical) {
  const auto hist = VerbFrequency({"list things", "describe it", "create one"}, 3);
  EXPECT_EQ(hist, (VerbHistogram{{"create", 1}, {"describe", 1}, {"list", 1}}));
}

TEST(VerbLexicon, ShippedFileMatchesDefault) {
  EXPECT_EQ(LoadVerbLexicon(std::filesystem::path(CFORGE_DATA_DIR) / "verbs.txt"), DefaultVerbLexicon());
}

}  // namespace
}  // namespace cforge
