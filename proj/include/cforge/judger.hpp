#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cforge/builder.hpp"
#include "cforge/error.hpp"
#include "cforge/provider.hpp"
#include "cforge/rng.hpp"

namespace cforge {

enum class Verdict { kLeft, kRight, kTie };  // [[A]], [[B]], [[C]]
enum class PresentedOrder { kIncumbentFirst, kChallengerFirst };
enum class Outcome { kIncumbentWins, kChallengerWins, kTie };
enum class JudgeMode { kSingle, kBothOrders };

const char* VerdictName(Verdict v);
const char* OrderName(PresentedOrder o);
const char* OutcomeName(Outcome o);
const char* JudgeModeName(JudgeMode m);
std::optional<Verdict> ParseVerdictName(std::string_view name);
std::optional<PresentedOrder> ParseOrderName(std::string_view name);
std::optional<Outcome> ParseOutcomeName(std::string_view name);
std::optional<JudgeMode> ParseJudgeMode(std::string_view name);

struct JudgeQuery {
  PresentedOrder presented_order = PresentedOrder::kIncumbentFirst;
  std::string raw_text;
  Verdict verdict = Verdict::kTie;
  bool reprompted = false;
  bool unparseable = false;  // counted as a tie
};

// Outcome a verdict implies for the underlying outputs given the slot order.
Outcome OutcomeOf(Verdict verdict, PresentedOrder order);

// Debias rule: a single query decides alone; several queries yield a winner
// only when all of them name the same underlying output, otherwise a tie.
Outcome CombineQueries(const std::vector<JudgeQuery>& queries);

struct ComparisonRecord {
  std::string id;
  std::string seed_id;
  int k = 0;
  std::string instruction;
  int incumbent_k = 0;  // which O_j held the incumbent slot
  std::string incumbent;
  std::string challenger;
  std::vector<JudgeQuery> queries;
  Outcome final = Outcome::kTie;
  std::vector<std::string> warnings;

  Json ToJson() const;
  static ComparisonRecord FromJson(const Json& row);
};

struct PreferencePair {
  std::string seed_id;
  int k = 0;
  std::string instruction;  // I_k
  std::string chosen;       // O_{w_k}
  std::string rejected;     // O_{l_k}
  std::string record_ref;

  Json ToJson() const;
  static PreferencePair FromJson(const Json& row);
};

// Judge prompt with the instruction and both outputs substituted verbatim
// (out_a in the (a) slot). Throws Error(kInvalidArgument) on empty input.
ChatRequest BuildJudgerPrompt(std::string_view instruction, std::string_view out_a,
                              std::string_view out_b, const GenerationParams& params = {});

// Last [[A]]/[[B]]/[[C]] marker wins. Throws Error(kParse) when none is present.
Verdict ParseVerdict(std::string_view raw);

struct JudgeResult {
  Outcome final = Outcome::kTie;
  ComparisonRecord record;
};

// Single mode asks once with a seeded coin-flip slot order; both-orders asks
// incumbent-first then challenger-first. An unparseable verdict is reprompted
// once, then counted as a tie with a warning.
JudgeResult JudgePair(std::string_view instruction, std::string_view incumbent,
                      std::string_view challenger, JudgeMode mode, Provider& provider, Rng& rng,
                      const GenerationParams& params = {});

struct TournamentResult {
  std::vector<PreferencePair> pairs;
  std::string final_winner;
  int final_winner_k = 0;
  std::vector<ComparisonRecord> records;
};

class TournamentError : public Error {
 public:
  TournamentError(ErrorCode code, const std::string& message, int failed_k,
                  TournamentResult partial)
      : Error(code, message), failed_k_(failed_k), partial_(std::move(partial)) {}

  int failed_k() const { return failed_k_; }
  const TournamentResult& partial() const { return partial_; }

 private:
  int failed_k_;
  TournamentResult partial_;
};

// Incumbent-vs-challenger tournament. The incumbent starts as O_0; at step k
// the challenger is O_k. A decisive verdict emits (I_k, winner, loser) and the
// winner stays incumbent; a tie emits nothing and O_k becomes incumbent.
TournamentResult ReorderChain(const InstructionChain& chain, JudgeMode mode, Provider& provider,
                              Rng& rng, const GenerationParams& params = {});

}  // namespace cforge
