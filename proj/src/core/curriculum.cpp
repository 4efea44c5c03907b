#include "cforge/curriculum.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "cforge/error.hpp"

namespace cforge {

MergePlan MergePlan::Singletons(int n) {
  MergePlan plan;
  for (int k = 1; k <= n; ++k) plan.sets.push_back({k});
  return plan;
}

MergePlan MergePlan::FromJson(const Json& json) {
  if (!json.is_array() || json.empty()) {
    throw Error(ErrorCode::kConfig, "merge_plan must be a non-empty array of k arrays");
  }
  MergePlan plan;
  for (const auto& set : json) {
    if (!set.is_array()) throw Error(ErrorCode::kConfig, "merge_plan entries must be arrays");
    std::vector<int> ks;
    for (const auto& k : set) {
      if (!k.is_number_integer()) throw Error(ErrorCode::kConfig, "merge_plan k must be integers");
      ks.push_back(k.get<int>());
    }
    plan.sets.push_back(std::move(ks));
  }
  plan.Validate();
  return plan;
}

Json MergePlan::ToJson() const {
  Json out = Json::array();
  for (const auto& set : sets) out.push_back(set);
  return out;
}

void MergePlan::Validate() const {
  if (sets.empty()) throw Error(ErrorCode::kConfig, "merge plan is empty");
  std::set<int> seen;
  for (const auto& set : sets) {
    if (set.empty()) throw Error(ErrorCode::kConfig, "merge plan contains an empty k-set");
    for (int k : set) {
      if (k < 1) throw Error(ErrorCode::kConfig, "merge plan k must be >= 1");
      if (!seen.insert(k).second) {
        throw Error(ErrorCode::kConfig, "merge plan sets overlap at k=" + std::to_string(k));
      }
    }
  }
}

bool MergePlan::Covers(int n) const {
  std::set<int> seen;
  for (const auto& set : sets) seen.insert(set.begin(), set.end());
  if (static_cast<int>(seen.size()) != n) return false;
  for (int k = 1; k <= n; ++k) {
    if (!seen.contains(k)) return false;
  }
  return true;
}

BinResult BinByConstraintCount(const std::vector<PreferencePair>& pairs, const MergePlan& plan) {
  plan.Validate();
  BinResult result;

  std::vector<std::vector<int>> sets = plan.sets;
  for (auto& s : sets) std::sort(s.begin(), s.end());
  std::stable_sort(sets.begin(), sets.end(),
                   [](const auto& a, const auto& b) { return a.back() < b.back(); });

  std::map<int, std::size_t> stage_of_k;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    CurriculumStage stage;
    stage.stage_id = std::to_string(i + 1);
    stage.ks = sets[i];
    stage.k_min = sets[i].front();
    stage.k_max = sets[i].back();
    for (int k : sets[i]) stage_of_k[k] = i;
    result.stages.push_back(std::move(stage));
  }

  for (const auto& pair : pairs) {
    auto it = stage_of_k.find(pair.k);
    if (it == stage_of_k.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "pair " + pair.record_ref + " has k=" + std::to_string(pair.k) +
                      " outside every merge-plan set");
    }
    auto& stage = result.stages[it->second];
    stage.dpo_triplets.push_back(pair);
    stage.sft_pairs.push_back({pair.instruction, pair.chosen, false});
  }

  if (pairs.empty()) result.warnings.emplace_back("no preference pairs; every stage is empty");
  for (const auto& stage : result.stages) {
    if (stage.dpo_triplets.empty() && !pairs.empty()) {
      result.warnings.push_back("stage " + stage.stage_id + " has zero triplets");
    }
  }
  return result;
}

std::vector<std::uint64_t> AllocateReplay(std::span<const std::uint64_t> stage_sizes,
                                          std::uint64_t budget) {
  if (stage_sizes.empty()) throw Error(ErrorCode::kInvalidArgument, "no stage sizes given");
  std::vector<std::uint64_t> out(stage_sizes.size(), 0);
  if (budget == 0) return out;

  unsigned __int128 total = 0;
  for (auto s : stage_sizes) total += s;
  if (total == 0) {
    throw Error(ErrorCode::kInvalidArgument, "all stage sizes are zero with a positive budget");
  }

  std::vector<unsigned __int128> remainders(stage_sizes.size());
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < stage_sizes.size(); ++i) {
    const unsigned __int128 scaled = static_cast<unsigned __int128>(budget) * stage_sizes[i];
    out[i] = static_cast<std::uint64_t>(scaled / total);
    remainders[i] = scaled % total;
    assigned += out[i];
  }

  std::vector<std::size_t> order(stage_sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  // Fewer than stage_sizes.size() residual units remain after flooring.
  for (std::uint64_t r = 0; r < budget - assigned; ++r) ++out[order[r]];
  return out;
}

ReplayPool ReplayPool::Load(const std::filesystem::path& path, std::uint64_t budget) {
  ReplayPool pool;
  pool.total_budget = budget;
  for (const auto& line : ReadLines(path)) {
    const std::string where = path.string() + ":" + std::to_string(line.line_number);
    Json row = Json::parse(line.text, nullptr, false);
    if (row.is_discarded() || !row.is_object()) {
      throw Error(ErrorCode::kParse, where + ": malformed JSON line");
    }
    ReplayExample ex;
    if (row.contains("instruction") && row.contains("response")) {
      ex.instruction = row["instruction"].get<std::string>();
      ex.response = row["response"].get<std::string>();
    } else if (row.contains("conversations") && row["conversations"].is_array()) {
      const auto& turns = row["conversations"];
      for (std::size_t i = 0; i + 1 < turns.size(); ++i) {
        const auto from = turns[i].value("from", std::string());
        if (from == "human" || from == "user") {
          ex.instruction = turns[i].value("value", std::string());
          ex.response = turns[i + 1].value("value", std::string());
          break;
        }
      }
    } else {
      throw Error(ErrorCode::kParse, where + ": expected instruction/response or conversations");
    }
    if (Trim(ex.instruction).empty() || Trim(ex.response).empty()) continue;
    pool.examples.push_back(std::move(ex));
  }
  return pool;
}

CurriculumStage MixReplay(CurriculumStage stage, const ReplayPool& pool, std::size_t count,
                          Rng& rng) {
  if (count > pool.examples.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "replay count " + std::to_string(count) + " exceeds pool size " +
                    std::to_string(pool.examples.size()));
  }
  std::vector<std::size_t> index(pool.examples.size());
  std::iota(index.begin(), index.end(), 0);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.UniformIndex(index.size() - i);
    std::swap(index[i], index[j]);
    const auto& ex = pool.examples[index[i]];
    stage.sft_pairs.push_back({ex.instruction, ex.response, true});
  }
  stage.replay_count += count;
  return stage;
}

Json StageDescriptor::ToJson() const {
  return Json{{"stage_id", stage_id},   {"k_min", k_min},         {"k_max", k_max},
              {"ks", ks},               {"dir", dir},             {"dpo_path", dpo_path},
              {"sft_path", sft_path},   {"dpo_count", dpo_count}, {"sft_count", sft_count},
              {"replay_count", replay_count}};
}

StageDescriptor StageDescriptor::FromJson(const Json& json) {
  try {
    StageDescriptor d;
    d.stage_id = json.at("stage_id").get<std::string>();
    d.k_min = json.at("k_min").get<int>();
    d.k_max = json.at("k_max").get<int>();
    d.ks = json.at("ks").get<std::vector<int>>();
    d.dir = json.at("dir").get<std::string>();
    d.dpo_path = json.at("dpo_path").get<std::string>();
    d.sft_path = json.at("sft_path").get<std::string>();
    d.dpo_count = json.at("dpo_count").get<std::size_t>();
    d.sft_count = json.at("sft_count").get<std::size_t>();
    d.replay_count = json.at("replay_count").get<std::size_t>();
    return d;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed stage descriptor: ") + e.what());
  }
}

StageDescriptor EmitStageFiles(const CurriculumStage& stage, const std::filesystem::path& root) {
  StageDescriptor d;
  d.stage_id = stage.stage_id;
  d.k_min = stage.k_min;
  d.k_max = stage.k_max;
  d.ks = stage.ks;
  d.dir = "stage_" + stage.stage_id;
  d.dpo_path = d.dir + "/dpo.jsonl";
  d.sft_path = d.dir + "/sft.jsonl";

  std::vector<Json> dpo;
  dpo.reserve(stage.dpo_triplets.size());
  for (const auto& t : stage.dpo_triplets) {
    dpo.push_back({{"instruction", t.instruction},
                   {"chosen", t.chosen},
                   {"rejected", t.rejected},
                   {"k", t.k},
                   {"seed_id", t.seed_id},
                   {"record_ref", t.record_ref}});
  }
  std::vector<Json> sft;
  sft.reserve(stage.sft_pairs.size());
  for (const auto& s : stage.sft_pairs) {
    sft.push_back({{"instruction", s.instruction}, {"response", s.response}, {"is_replay", s.is_replay}});
  }
  const auto dir = root / d.dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create stage directory " + dir.string());
  WriteJsonl(root / d.dpo_path, dpo);
  WriteJsonl(root / d.sft_path, sft);
  d.dpo_count = dpo.size();
  d.sft_count = sft.size();
  d.replay_count = stage.replay_count;
  return d;
}

CurriculumStage LoadStage(const StageDescriptor& descriptor, const std::filesystem::path& root) {
  CurriculumStage stage;
  stage.stage_id = descriptor.stage_id;
  stage.k_min = descriptor.k_min;
  stage.k_max = descriptor.k_max;
  stage.ks = descriptor.ks;
  try {
    for (const auto& row : ReadJsonl(root / descriptor.dpo_path)) {
      PreferencePair p;
      p.instruction = row.at("instruction").get<std::string>();
      p.chosen = row.at("chosen").get<std::string>();
      p.rejected = row.at("rejected").get<std::string>();
      p.k = row.at("k").get<int>();
      p.seed_id = row.at("seed_id").get<std::string>();
      p.record_ref = row.value("record_ref", std::string());
      stage.dpo_triplets.push_back(std::move(p));
    }
    for (const auto& row : ReadJsonl(root / descriptor.sft_path)) {
      SftExample s{row.at("instruction").get<std::string>(), row.at("response").get<std::string>(),
                   row.at("is_replay").get<bool>()};
      if (s.is_replay) ++stage.replay_count;
      stage.sft_pairs.push_back(std::move(s));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, "stage " + descriptor.stage_id + ": " + e.what());
  }
  return stage;
}

Hyperparams Hyperparams::FromJson(const Json& json) {
  Hyperparams h;
  if (json.is_null()) return h;
  if (!json.is_object()) throw Error(ErrorCode::kConfig, "hyperparams must be an object");
  try {
    h.beta = json.value("beta", h.beta);
    h.learning_rate = json.value("learning_rate", h.learning_rate);
    h.epochs = json.value("epochs", h.epochs);
    h.scheduler = json.value("scheduler", h.scheduler);
    h.warmup_ratio = json.value("warmup_ratio", h.warmup_ratio);
    h.grad_accum = json.value("grad_accum", h.grad_accum);
    h.adapter = json.value("adapter", h.adapter);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("hyperparams: ") + e.what());
  }
  if (!(h.beta > 0.0)) throw Error(ErrorCode::kConfig, "hyperparams.beta must be > 0");
  return h;
}

Json Hyperparams::ToJson() const {
  return Json{{"beta", beta},
              {"learning_rate", learning_rate},
              {"epochs", epochs},
              {"scheduler", scheduler},
              {"warmup_ratio", warmup_ratio},
              {"grad_accum", grad_accum},
              {"adapter", adapter}};
}

void EmitTrainingManifest(const std::vector<StageDescriptor>& stages, const Hyperparams& hyperparams,
                          const ReplaySettings& replay, const std::filesystem::path& path) {
  for (std::size_t i = 1; i < stages.size(); ++i) {
    if (stages[i].k_max < stages[i - 1].k_max) {
      throw Error(ErrorCode::kInvalidArgument, "manifest stages must ascend by k_max");
    }
  }
  Json stage_rows = Json::array();
  for (const auto& s : stages) stage_rows.push_back(s.ToJson());
  Json manifest = {{"stages", std::move(stage_rows)},
                   {"hyperparams", hyperparams.ToJson()},
                   {"replay",
                    {{"budget", replay.budget},
                     {"per_stage", replay.per_stage},
                     {"pool_size", replay.pool_size}}}};
  WriteText(path, manifest.dump(2) + "\n");
}

}  // namespace cforge
