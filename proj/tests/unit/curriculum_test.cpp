#include <gtest/gtest.h>

#include <map>

#include "cforge/curriculum.hpp"
#include "cforge/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace cforge {
namespace {

using testing::TempDir;

PreferencePair Pair(const std::string& seed, int k) {
  return {seed, k, seed + " instruction " + std::to_string(k), seed + " chosen " + std::to_string(k),
          seed + " rejected " + std::to_string(k), seed + ":k" + std::to_string(k)};
}

std::vector<PreferencePair> Spread() {
  std::vector<PreferencePair> pairs;
  for (const std::string seed : {"a", "b", "c"}) {
    for (int k = 1; k <= 5; ++k) {
      if ((seed == "b" && k == 2) || (seed == "c" && k == 5)) continue;
      pairs.push_back(Pair(seed, k));
    }
  }
  return pairs;
}

ReplayPool Pool(std::size_t n) {
  ReplayPool pool;
  for (std::size_t i = 0; i < n; ++i) {
    pool.examples.push_back({"replay q" + std::to_string(i), "replay a" + std::to_string(i)});
  }
  return pool;
}

TEST(MergePlan, ValidationAndCoverage) {
  EXPECT_NO_THROW(MergePlan::Default().Validate());
  EXPECT_TRUE(MergePlan::Default().Covers(5));
  EXPECT_FALSE(MergePlan::Default().Covers(6));
  EXPECT_FALSE(MergePlan({{{1, 2}, {4}}}).Covers(4));
  EXPECT_THROW(MergePlan({{{1, 2}, {2, 3}}}).Validate(), Error);
  EXPECT_THROW(MergePlan({{{1}, {}}}).Validate(), Error);
  EXPECT_THROW(MergePlan({{{0, 1}}}).Validate(), Error);
  EXPECT_EQ(MergePlan::Singletons(3).sets, (std::vector<std::vector<int>>{{1}, {2}, {3}}));
  EXPECT_EQ(MergePlan::FromJson(MergePlan::Default().ToJson()).sets, MergePlan::Default().sets);
}

TEST(Binning, DefaultPlanGivesTwoStages) {
  const auto pairs = Spread();
  const auto bins = BinByConstraintCount(pairs, MergePlan::Default());
  ASSERT_EQ(bins.stages.size(), 2u);
  EXPECT_EQ(bins.stages[0].k_min, 1);
  EXPECT_EQ(bins.stages[0].k_max, 3);
  EXPECT_EQ(bins.stages[1].k_min, 4);
  EXPECT_EQ(bins.stages[1].k_max, 5);
  EXPECT_EQ(bins.stages[0].dpo_triplets.size(), 8u);
  EXPECT_EQ(bins.stages[1].dpo_triplets.size(), 5u);
  for (const auto& stage : bins.stages) {
    ASSERT_EQ(stage.sft_pairs.size(), stage.dpo_triplets.size());
    for (std::size_t i = 0; i < stage.sft_pairs.size(); ++i) {
      EXPECT_EQ(stage.sft_pairs[i].instruction, stage.dpo_triplets[i].instruction);
      EXPECT_EQ(stage.sft_pairs[i].response, stage.dpo_triplets[i].chosen);
      EXPECT_FALSE(stage.sft_pairs[i].is_replay);
    }
  }
  EXPECT_TRUE(bins.warnings.empty());
}

TEST(Binning, SingletonsAndUnorderedPlan) {
  const auto bins = BinByConstraintCount(Spread(), MergePlan::Singletons(5));
  ASSERT_EQ(bins.stages.size(), 5u);
  const std::vector<std::size_t> sizes = {3, 2, 3, 3, 2};
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(bins.stages[i].k_min, i + 1);
    EXPECT_EQ(bins.stages[i].dpo_triplets.size(), sizes[i]);
  }
  const auto reordered = BinByConstraintCount(Spread(), MergePlan({{{5, 4}, {3, 1, 2}}}));
  EXPECT_EQ(reordered.stages[0].k_max, 3);
  EXPECT_EQ(reordered.stages[1].k_max, 5);
}

TEST(Binning, EmptyInputWarnsAndKeepsStages) {
  const auto bins = BinByConstraintCount({}, MergePlan::Default());
  EXPECT_EQ(bins.stages.size(), 2u);
  EXPECT_FALSE(bins.warnings.empty());
  for (const auto& s : bins.stages) EXPECT_TRUE(s.dpo_triplets.empty());
}

TEST(Binning, PairOutsidePlanIsRejected) {
  EXPECT_THROW(BinByConstraintCount({Pair("a", 7)}, MergePlan::Default()), Error);
}

TEST(Binning, PartitionProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PreferencePair> pairs;
    const auto count = rng.UniformIndex(40);
    for (std::uint64_t i = 0; i < count; ++i) {
      pairs.push_back(Pair("s" + std::to_string(i), static_cast<int>(rng.UniformIndex(5)) + 1));
    }
    const auto bins = BinByConstraintCount(pairs, MergePlan::Default());
    std::multiset<std::pair<std::string, int>> in, out;
    for (const auto& p : pairs) in.insert({p.seed_id, p.k});
    for (const auto& s : bins.stages) {
      for (const auto& p : s.dpo_triplets) {
        EXPECT_GE(p.k, s.k_min);
        EXPECT_LE(p.k, s.k_max);
        out.insert({p.seed_id, p.k});
      }
    }
    EXPECT_EQ(in, out);
  }
}

TEST(AllocateReplay, FrozenExample) {
  const std::vector<std::uint64_t> sizes = {10595, 6448};
  EXPECT_EQ(AllocateReplay(sizes, 10000), (std::vector<std::uint64_t>{6217, 3783}));
}

TEST(AllocateReplay, TiesGoToLowerIndex) {
  const std::vector<std::uint64_t> sizes = {1, 1};
  EXPECT_EQ(AllocateReplay(sizes, 3), (std::vector<std::uint64_t>{2, 1}));
}

TEST(AllocateReplay, ZeroBudgetAndBadInputs) {
  const std::vector<std::uint64_t> sizes = {4, 9};
  EXPECT_EQ(AllocateReplay(sizes, 0), (std::vector<std::uint64_t>{0, 0}));
  const std::vector<std::uint64_t> zeros = {0, 0};
  EXPECT_THROW(AllocateReplay(zeros, 5), Error);
  EXPECT_THROW(AllocateReplay({}, 5), Error);
}

TEST(AllocateReplay, MatchesRationalOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::uint64_t> sizes(rng.UniformIndex(6) + 1);
    for (auto& s : sizes) s = rng.UniformIndex(20000);
    if (std::all_of(sizes.begin(), sizes.end(), [](auto s) { return s == 0; })) sizes[0] = 1;
    const auto budget = rng.UniformIndex(30000);
    const auto got = AllocateReplay(sizes, budget);
    const auto oracle = testing::AllocateByRationals(sizes, budget);
    EXPECT_EQ(got, oracle.rounded);
    EXPECT_EQ(std::accumulate(got.begin(), got.end(), std::uint64_t{0}), budget);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      EXPECT_LT(boost::multiprecision::abs(testing::Rational(got[i]) - oracle.exact[i]), 1);
    }
  }
}

TEST(MixReplay, CountsAndDeterminism) {
  const auto stage = BinByConstraintCount(Spread(), MergePlan::Default()).stages[0];
  const auto pool = Pool(10);
  Rng r0(4);
  const auto none = MixReplay(stage, pool, 0, r0);
  EXPECT_EQ(none.sft_pairs.size(), stage.sft_pairs.size());
  EXPECT_EQ(none.replay_count, 0u);

  Rng r1(4);
  const auto full = MixReplay(stage, pool, 10, r1);
  EXPECT_EQ(full.replay_count, 10u);
  std::set<std::string> drawn;
  for (std::size_t i = 0; i < full.sft_pairs.size(); ++i) {
    const bool tail = i >= stage.sft_pairs.size();
    EXPECT_EQ(full.sft_pairs[i].is_replay, tail);
    if (tail) drawn.insert(full.sft_pairs[i].instruction);
  }
  EXPECT_EQ(drawn.size(), 10u);

  Rng a(9), b(9);
  const auto x = MixReplay(stage, pool, 4, a);
  const auto y = MixReplay(stage, pool, 4, b);
  for (std::size_t i = 0; i < x.sft_pairs.size(); ++i) {
    EXPECT_EQ(x.sft_pairs[i].instruction, y.sft_pairs[i].instruction);
  }
  Rng c(9);
  EXPECT_THROW(MixReplay(stage, pool, 11, c), Error);
}

TEST(ReplayPool, LoadsBothRowShapes) {
  TempDir dir;
  testing::Spit(dir / "r.jsonl",
                "{\"instruction\":\"q1\",\"response\":\"a1\"}\n"
                "{\"conversations\":[{\"from\":\"human\",\"value\":\"q2\"},{\"from\":\"gpt\",\"value\":\"a2\"},"
                "{\"from\":\"human\",\"value\":\"q3\"}]}\n");
  const auto pool = ReplayPool::Load(dir / "r.jsonl", 7);
  ASSERT_EQ(pool.examples.size(), 2u);
  EXPECT_EQ(pool.examples[1].instruction, "q2");
  EXPECT_EQ(pool.examples[1].response, "a2");
  EXPECT_EQ(pool.total_budget, 7u);
  testing::Spit(dir / "bad.jsonl", "{\"x\":1}\n");
  EXPECT_THROW(ReplayPool::Load(dir / "bad.jsonl", 1), Error);
}

TEST(StageFiles, EmitLoadRoundTrip) {
  TempDir dir;
  Rng rng(2);
  const auto stage =
      MixReplay(BinByConstraintCount(Spread(), MergePlan::Default()).stages[1], Pool(3), 2, rng);
  const auto d = EmitStageFiles(stage, dir.path());
  EXPECT_EQ(d.dir, "stage_2");
  EXPECT_EQ(d.dpo_count, 5u);
  EXPECT_EQ(d.sft_count, 7u);
  EXPECT_EQ(d.replay_count, 2u);
  const auto back = LoadStage(StageDescriptor::FromJson(d.ToJson()), dir.path());
  ASSERT_EQ(back.dpo_triplets.size(), stage.dpo_triplets.size());
  for (std::size_t i = 0; i < back.dpo_triplets.size(); ++i) {
    EXPECT_EQ(DumpLine(back.dpo_triplets[i].ToJson()), DumpLine(stage.dpo_triplets[i].ToJson()));
  }
  ASSERT_EQ(back.sft_pairs.size(), stage.sft_pairs.size());
  for (std::size_t i = 0; i < back.sft_pairs.size(); ++i) {
    EXPECT_EQ(back.sft_pairs[i].response, stage.sft_pairs[i].response);
    EXPECT_EQ(back.sft_pairs[i].is_replay, stage.sft_pairs[i].is_replay);
  }
  EXPECT_EQ(back.replay_count, 2u);
}

TEST(StageFiles, UnwritableRootFails) {
  TempDir dir;
  testing::Spit(dir / "blocker", "x");
  const auto stage = BinByConstraintCount(Spread(), MergePlan::Default()).stages[0];
  try {
    EmitStageFiles(stage, dir / "blocker");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(Manifest, DefaultsAndOrdering) {
  TempDir dir;
  const auto bins = BinByConstraintCount(Spread(), MergePlan::Default());
  std::vector<StageDescriptor> ds;
  for (const auto& s : bins.stages) ds.push_back(EmitStageFiles(s, dir.path()));
  EmitTrainingManifest(ds, Hyperparams{}, ReplaySettings{0, false, 0}, dir / "training_manifest.json");
  const Json m = Json::parse(testing::Slurp(dir / "training_manifest.json"));
  EXPECT_EQ(m["hyperparams"]["beta"], 0.1);
  EXPECT_EQ(m["hyperparams"]["warmup_ratio"], 0.1);
  EXPECT_EQ(m["hyperparams"]["grad_accum"], 8);
  EXPECT_EQ(m["hyperparams"]["epochs"], 3);
  EXPECT_EQ(m["hyperparams"]["scheduler"], "cosine");
  ASSERT_EQ(m["stages"].size(), 2u);
  EXPECT_EQ(m["stages"][0]["stage_id"], "1");

  std::reverse(ds.begin(), ds.end());
  EXPECT_THROW(EmitTrainingManifest(ds, Hyperparams{}, {}, dir / "m2.json"), Error);

  const auto hp = Hyperparams::FromJson({{"beta", 0.25}});
  EXPECT_EQ(hp.beta, 0.25);
  EXPECT_EQ(hp.grad_accum, 8);
}

}  // namespace
}  // namespace cforge
