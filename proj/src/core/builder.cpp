#include "cforge/builder.hpp"

namespace cforge {

Json InstructionChain::ToJson() const {
  Json steps_json = Json::array();
  for (const auto& step : steps) {
    Json row = {{"k", step.k},
                {"category", KindName(step.category.kind)},
                {"subtype", SubtypeName(step.category.subtype)}};
    if (!step.category.IsSoft()) row["hard_index"] = step.category.hard_index;
    row["constraint"] = step.constraint_text;
    row["instruction"] = step.instruction;
    row["output"] = step.output;
    row["warnings"] = step.warnings;
    steps_json.push_back(std::move(row));
  }
  return Json{{"seed_id", seed.id},
              {"seed_source", SeedSourceName(seed.source)},
              {"seed_text", seed.text},
              {"seed_output", seed_output},
              {"n", n},
              {"steps", std::move(steps_json)}};
}

InstructionChain InstructionChain::FromJson(const Json& row) {
  try {
    InstructionChain chain;
    chain.seed.id = row.at("seed_id").get<std::string>();
    chain.seed.text = row.at("seed_text").get<std::string>();
    if (row.contains("seed_source")) {
      chain.seed.source =
          ParseSeedSource(row["seed_source"].get<std::string>()).value_or(SeedSource::kOther);
    }
    chain.seed_output = row.at("seed_output").get<std::string>();
    chain.n = row.at("n").get<int>();
    for (const auto& s : row.at("steps")) {
      ChainStep step;
      step.k = s.at("k").get<int>();
      auto kind = ParseKind(s.at("category").get<std::string>());
      auto subtype = ParseSubtype(s.at("subtype").get<std::string>());
      if (!kind || !subtype) throw Error(ErrorCode::kParse, "unknown constraint category");
      step.category.kind = *kind;
      step.category.subtype = *subtype;
      if (s.contains("hard_index")) step.category.hard_index = s["hard_index"].get<std::size_t>();
      step.constraint_text = s.at("constraint").get<std::string>();
      step.instruction = s.at("instruction").get<std::string>();
      step.output = s.at("output").get<std::string>();
      if (s.contains("warnings")) step.warnings = s["warnings"].get<std::vector<std::string>>();
      chain.steps.push_back(std::move(step));
    }
    return chain;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed chain record: ") + e.what());
  }
}

std::string GenerateOutput(const std::string& instruction, Provider& provider,
                           const GenerationParams& params) {
  if (Trim(instruction).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot generate an output for an empty instruction");
  }
  return provider.Complete(params.Request("", instruction)).text;
}

InstructionChain BuildChain(const SeedInstruction& seed, int n,
                            const ConstraintSynthesizer& synthesizer, Provider& provider,
                            Rng& rng, const GenerationParams& params) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "chain length n must be >= 1");

  InstructionChain chain;
  chain.seed = seed;
  chain.n = n;
  std::set<std::size_t> used_hard;

  int k = 0;
  try {
    chain.seed_output = GenerateOutput(seed.text, provider, params);
    for (k = 1; k <= n; ++k) {
      const std::string& previous = chain.InstructionAt(k - 1);
      auto next = synthesizer.Next(previous, rng, used_hard);
      ChainStep step;
      step.k = k;
      step.category = next.category;
      step.constraint_text = std::move(next.constraint_text);
      step.instruction = std::move(next.instruction);
      step.warnings = std::move(next.warnings);
      step.output = GenerateOutput(step.instruction, provider, params);
      chain.steps.push_back(std::move(step));
    }
  } catch (const ChainError&) {
    throw;
  } catch (const Error& e) {
    throw ChainError(e.code(),
                     "seed " + seed.id + " step " + std::to_string(k) + ": " + e.what(), k,
                     chain);
  }
  return chain;
}

}  // namespace cforge
