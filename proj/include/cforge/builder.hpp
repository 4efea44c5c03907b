#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cforge/constraints.hpp"
#include "cforge/error.hpp"
#include "cforge/provider.hpp"
#include "cforge/seeds.hpp"

namespace cforge {

struct ChainStep {
  int k = 0;
  ConstraintCategory category;
  std::string constraint_text;
  std::string instruction;
  std::string output;
  std::vector<std::string> warnings;
};

struct InstructionChain {
  SeedInstruction seed;
  std::string seed_output;  // O_0, the tournament's first incumbent
  std::vector<ChainStep> steps;
  int n = 0;

  // I_k; k = 0 is the seed.
  const std::string& InstructionAt(int k) const {
    return k == 0 ? seed.text : steps.at(static_cast<std::size_t>(k - 1)).instruction;
  }
  // O_k; k = 0 is the seed output.
  const std::string& OutputAt(int k) const {
    return k == 0 ? seed_output : steps.at(static_cast<std::size_t>(k - 1)).output;
  }
  // Constraint texts accumulated up to step k.
  std::vector<std::string> ConstraintsAt(int k) const {
    std::vector<std::string> out;
    for (int i = 0; i < k; ++i) out.push_back(steps.at(static_cast<std::size_t>(i)).constraint_text);
    return out;
  }
  bool Complete() const { return n >= 1 && steps.size() == static_cast<std::size_t>(n); }

  // chains.jsonl row.
  Json ToJson() const;
  static InstructionChain FromJson(const Json& row);
};

// Failure while building; carries the steps completed before `failed_k`.
class ChainError : public Error {
 public:
  ChainError(ErrorCode code, const std::string& message, int failed_k, InstructionChain partial)
      : Error(code, message), failed_k_(failed_k), partial_(std::move(partial)) {}

  int failed_k() const { return failed_k_; }
  const InstructionChain& partial() const { return partial_; }

 private:
  int failed_k_;
  InstructionChain partial_;
};

// O_k = LLM(I_k): the bare instruction as the user message, no system prompt.
std::string GenerateOutput(const std::string& instruction, Provider& provider,
                           const GenerationParams& params = {});

// Builds I_1..I_n, each from its predecessor plus exactly one constraint, and
// the outputs O_0..O_n.
InstructionChain BuildChain(const SeedInstruction& seed, int n,
                            const ConstraintSynthesizer& synthesizer, Provider& provider,
                            Rng& rng, const GenerationParams& params = {});

}  // namespace cforge
