#include <gtest/gtest.h>

#include "cforge/error.hpp"
#include "cforge/seeds.hpp"
#include "test_util.hpp"

namespace cforge {
namespace {

using testing::Spit;
using testing::TempDir;

std::vector<std::string> Ids(const std::vector<SeedInstruction>& seeds) {
  std::vector<std::string> out;
  for (const auto& s : seeds) out.push_back(s.id);
  return out;
}

SeedInstruction Seed(std::string id, std::string text) {
  SeedInstruction s;
  s.id = std::move(id);
  s.text = std::move(text);
  return s;
}

TEST(SeedFilter, OasstKeepsOnlyRankZeroFirstTurn) {
  SeedFilter f;
  SeedInstruction s = Seed("a", "Explain tides.");
  s.source = SeedSource::kOasst;
  s.meta = {{"rank", 0}, {"turn", 0}};
  EXPECT_TRUE(f.Accepts(s));
  s.meta = {{"rank", 1}, {"turn", 0}};
  EXPECT_FALSE(f.Accepts(s));
  s.meta = {{"rank", 0}, {"turn", 2}};
  EXPECT_FALSE(f.Accepts(s));
  s.meta = Json::object();
  EXPECT_FALSE(f.Accepts(s));
}

TEST(SeedFilter, SuperNaturalDropsShortReferenceOutputs) {
  SeedFilter f;
  SeedInstruction s = Seed("sn", "Classify the sentiment.");
  s.source = SeedSource::kSuperNatural;
  s.meta = {{"ref_output_len", 3}};
  EXPECT_FALSE(f.Accepts(s));
  s.meta = {{"ref_output_len", 10}};
  EXPECT_TRUE(f.Accepts(s));
  s.meta = Json::object();
  EXPECT_TRUE(f.Accepts(s));
}

TEST(SeedFilter, SourceAllowList) {
  SeedFilter f;
  f.sources = {SeedSource::kSelfInstruct};
  SeedInstruction s = Seed("x", "Write a haiku.");
  s.source = SeedSource::kSelfInstruct;
  EXPECT_TRUE(f.Accepts(s));
  s.source = SeedSource::kOther;
  EXPECT_FALSE(f.Accepts(s));
}

TEST(LoadSeeds, EmptyFileGivesEmptyList) {
  TempDir dir;
  Spit(dir / "seeds.jsonl", "");
  EXPECT_TRUE(LoadSeeds(dir / "seeds.jsonl", {}).empty());
}

TEST(LoadSeeds, FixtureFilteringMatchesSelectionRules) {
  const auto seeds = LoadSeeds(testing::FixtureDir() / "golden/seeds.jsonl", {});
  EXPECT_EQ(Ids(seeds), (std::vector<std::string>{"oa-001", "si-001", "si-002", "sn-001"}));
  EXPECT_EQ(seeds[0].source, SeedSource::kOasst);
  EXPECT_EQ(seeds[0].meta["rank"], 0);
}

TEST(LoadSeeds, ErrorsCarryLineNumbers) {
  TempDir dir;
  Spit(dir / "a.jsonl", "{\"id\":\"1\",\"text\":\"x\"}\n{\"id\":\"2\"}\n");
  try {
    LoadSeeds(dir / "a.jsonl", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  Spit(dir / "b.jsonl", "{\"id\":\"1\",\"text\":\"x\"}\n{\"id\":\"1\",\"text\":\"y\"}\n");
  EXPECT_THROW(LoadSeeds(dir / "b.jsonl", {}), Error);
  Spit(dir / "c.jsonl", "{\"id\":\"1\",\"text\":\"x\"\n");
  EXPECT_THROW(LoadSeeds(dir / "c.jsonl", {}), Error);
  EXPECT_THROW(LoadSeeds(dir / "missing.jsonl", {}), Error);
}

TEST(Dedupe, NormalizedTextFirstKept) {
  const auto out = Dedupe({Seed("1", "Write a poem"), Seed("2", "write a  poem")});
  EXPECT_EQ(Ids(out), (std::vector<std::string>{"1"}));
}

TEST(Dedupe, DistinctListUnchanged) {
  const std::vector<SeedInstruction> in = {Seed("1", "a"), Seed("2", "b"), Seed("3", "c")};
  EXPECT_EQ(Ids(Dedupe(in)), Ids(in));
}

TEST(Dedupe, RepeatDropped) {
  const auto out = Dedupe({Seed("1", "a"), Seed("2", "b"), Seed("3", "a")});
  EXPECT_EQ(Ids(out), (std::vector<std::string>{"1", "2"}));
}

TEST(Dedupe, IdempotentOnRandomLists) {
  Rng rng(5);
  const std::vector<std::string> vocab = {"a", "A", "a ", " b", "b", "c  d", "c d", "e"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SeedInstruction> in;
    const auto len = rng.UniformIndex(12);
    for (std::uint64_t i = 0; i < len; ++i) {
      in.push_back(Seed(std::to_string(i), vocab[rng.UniformIndex(vocab.size())]));
    }
    const auto once = Dedupe(in);
    EXPECT_EQ(Ids(Dedupe(once)), Ids(once));
  }
}

TEST(Normalize, LowercasesAndCollapsesWhitespace) {
  EXPECT_EQ(NormalizeForDedupe("  Hello\t\tWORLD \n"), "hello world");
}

TEST(WriteSeeds, RoundTrip) {
  TempDir dir;
  SeedInstruction s = Seed("x1", "Plan a picnic.");
  s.source = SeedSource::kSelfInstruct;
  WriteSeeds(dir / "seeds.jsonl", {s});
  const auto back = LoadSeeds(dir / "seeds.jsonl", {});
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].id, "x1");
  EXPECT_EQ(back[0].text, "Plan a picnic.");
  EXPECT_EQ(back[0].source, SeedSource::kSelfInstruct);
}

}  // namespace
}  // namespace cforge
