#include "cforge/judger.hpp"

#include <array>

namespace cforge {

namespace {

constexpr std::string_view kJudgerHead =
    "You are a helpful assistant who reviews a debate between two other assistants in "
    "evaluating the quality of the outputs for a given instruction.The two assistants, "
    "Assistant (a) and Assistant (b), are given an instruction. Output (a) and Output (b) are "
    "generated by two different AI chatbots respectively. Assistant (a) and Assistant (b) have "
    "conflicting evaluations. Your goal is to review their evaluations and give your final "
    "decision on which output is better. Here are some rules of the evaluation:\n"
    "(1) You should prioritize evaluating whether the output honestly/precisely/closely "
    "executes the instruction, then consider its helpfulness, accuracy, level of detail, "
    "harmlessness, etc.\n"
    "(2) Outputs should NOT contain more/less than what the instruction asks for, as such "
    "outputs do NOT precisely execute the instruction.\n"
    "(3) You should avoid any potential bias and your judgment should be as objective as "
    "possible. For example, the order in which the outputs were presented should NOT affect "
    "your judgment, as Output (a) and Output (b) are **equally likely** to be the better.\n"
    "Output your final verdict by strictly following this format: \"[[A]]\" if Output (a) is "
    "better, \"[[B]]\" if Output (b) is better, and \"[[C]]\" for a tie.\n"
    "/* Given instruction */\n";

JudgeQuery Ask(std::string_view instruction, std::string_view incumbent,
               std::string_view challenger, PresentedOrder order, Provider& provider,
               const GenerationParams& params, std::vector<std::string>& warnings) {
  const bool incumbent_first = order == PresentedOrder::kIncumbentFirst;
  const ChatRequest request =
      BuildJudgerPrompt(instruction, incumbent_first ? incumbent : challenger,
                        incumbent_first ? challenger : incumbent, params);
  JudgeQuery query;
  query.presented_order = order;
  for (int attempt = 0; attempt < 2; ++attempt) {
    query.reprompted = attempt > 0;
    query.raw_text =
        provider.Complete(request, attempt == 0 ? CacheMode::kUse : CacheMode::kRefresh).text;
    try {
      query.verdict = ParseVerdict(query.raw_text);
      return query;
    } catch (const Error&) {
    }
  }
  query.verdict = Verdict::kTie;
  query.unparseable = true;
  warnings.push_back(std::string("unparseable verdict (") + OrderName(order) +
                     ") after reprompt; counted as tie");
  return query;
}

}  // namespace

const char* VerdictName(Verdict v) {
  switch (v) {
    case Verdict::kLeft: return "left";
    case Verdict::kRight: return "right";
    case Verdict::kTie: return "tie";
  }
  return "tie";
}

const char* OrderName(PresentedOrder o) {
  return o == PresentedOrder::kIncumbentFirst ? "incumbent_first" : "challenger_first";
}

const char* OutcomeName(Outcome o) {
  switch (o) {
    case Outcome::kIncumbentWins: return "incumbent_wins";
    case Outcome::kChallengerWins: return "challenger_wins";
    case Outcome::kTie: return "tie";
  }
  return "tie";
}

const char* JudgeModeName(JudgeMode m) {
  return m == JudgeMode::kSingle ? "single" : "both_orders";
}

std::optional<Verdict> ParseVerdictName(std::string_view name) {
  for (auto v : {Verdict::kLeft, Verdict::kRight, Verdict::kTie}) {
    if (name == VerdictName(v)) return v;
  }
  return std::nullopt;
}

std::optional<PresentedOrder> ParseOrderName(std::string_view name) {
  for (auto o : {PresentedOrder::kIncumbentFirst, PresentedOrder::kChallengerFirst}) {
    if (name == OrderName(o)) return o;
  }
  return std::nullopt;
}

std::optional<Outcome> ParseOutcomeName(std::string_view name) {
  for (auto o : {Outcome::kIncumbentWins, Outcome::kChallengerWins, Outcome::kTie}) {
    if (name == OutcomeName(o)) return o;
  }
  return std::nullopt;
}

std::optional<JudgeMode> ParseJudgeMode(std::string_view name) {
  for (auto m : {JudgeMode::kSingle, JudgeMode::kBothOrders}) {
    if (name == JudgeModeName(m)) return m;
  }
  return std::nullopt;
}

Outcome OutcomeOf(Verdict verdict, PresentedOrder order) {
  if (verdict == Verdict::kTie) return Outcome::kTie;
  const bool left_is_incumbent = order == PresentedOrder::kIncumbentFirst;
  const bool incumbent_won = (verdict == Verdict::kLeft) == left_is_incumbent;
  return incumbent_won ? Outcome::kIncumbentWins : Outcome::kChallengerWins;
}

Outcome CombineQueries(const std::vector<JudgeQuery>& queries) {
  if (queries.empty()) return Outcome::kTie;
  const Outcome first = OutcomeOf(queries.front().verdict, queries.front().presented_order);
  for (const auto& q : queries) {
    if (OutcomeOf(q.verdict, q.presented_order) != first) return Outcome::kTie;
  }
  return first;
}

Json ComparisonRecord::ToJson() const {
  Json qs = Json::array();
  for (const auto& q : queries) {
    qs.push_back({{"presented_order", OrderName(q.presented_order)},
                  {"raw_text", q.raw_text},
                  {"verdict", VerdictName(q.verdict)},
                  {"reprompted", q.reprompted},
                  {"unparseable", q.unparseable}});
  }
  return Json{{"id", id},
              {"seed_id", seed_id},
              {"k", k},
              {"instruction", instruction},
              {"incumbent_k", incumbent_k},
              {"incumbent", incumbent},
              {"challenger", challenger},
              {"queries", std::move(qs)},
              {"final", OutcomeName(final)},
              {"warnings", warnings}};
}

ComparisonRecord ComparisonRecord::FromJson(const Json& row) {
  try {
    ComparisonRecord r;
    r.id = row.at("id").get<std::string>();
    r.seed_id = row.at("seed_id").get<std::string>();
    r.k = row.at("k").get<int>();
    r.instruction = row.at("instruction").get<std::string>();
    r.incumbent_k = row.at("incumbent_k").get<int>();
    r.incumbent = row.at("incumbent").get<std::string>();
    r.challenger = row.at("challenger").get<std::string>();
    for (const auto& q : row.at("queries")) {
      JudgeQuery query;
      auto order = ParseOrderName(q.at("presented_order").get<std::string>());
      auto verdict = ParseVerdictName(q.at("verdict").get<std::string>());
      if (!order || !verdict) throw Error(ErrorCode::kParse, "bad query enum in record " + r.id);
      query.presented_order = *order;
      query.verdict = *verdict;
      query.raw_text = q.at("raw_text").get<std::string>();
      query.reprompted = q.value("reprompted", false);
      query.unparseable = q.value("unparseable", false);
      r.queries.push_back(std::move(query));
    }
    auto final = ParseOutcomeName(row.at("final").get<std::string>());
    if (!final) throw Error(ErrorCode::kParse, "bad final outcome in record " + r.id);
    r.final = *final;
    if (row.contains("warnings")) r.warnings = row["warnings"].get<std::vector<std::string>>();
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed comparison record: ") + e.what());
  }
}

Json PreferencePair::ToJson() const {
  return Json{{"seed_id", seed_id}, {"k", k},           {"instruction", instruction},
              {"chosen", chosen},   {"rejected", rejected}, {"record_ref", record_ref}};
}

PreferencePair PreferencePair::FromJson(const Json& row) {
  try {
    PreferencePair p;
    p.seed_id = row.at("seed_id").get<std::string>();
    p.k = row.at("k").get<int>();
    p.instruction = row.at("instruction").get<std::string>();
    p.chosen = row.at("chosen").get<std::string>();
    p.rejected = row.at("rejected").get<std::string>();
    p.record_ref = row.at("record_ref").get<std::string>();
    return p;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed preference pair: ") + e.what());
  }
}

ChatRequest BuildJudgerPrompt(std::string_view instruction, std::string_view out_a,
                              std::string_view out_b, const GenerationParams& params) {
  if (instruction.empty() || out_a.empty() || out_b.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "judger prompt needs instruction and both outputs");
  }
  std::string prompt;
  prompt.reserve(kJudgerHead.size() + instruction.size() + out_a.size() + out_b.size() + 160);
  prompt += kJudgerHead;
  prompt += instruction;
  prompt += "\n/* The Start of Output (a) */\n";
  prompt += out_a;
  prompt += "\n/* The End of Output (a) */\n/* The Start of Output (b) */\n";
  prompt += out_b;
  prompt += "\n/* The End of Output (b) */\n";
  return params.Request("", std::move(prompt));
}

Verdict ParseVerdict(std::string_view raw) {
  constexpr std::array<std::pair<std::string_view, Verdict>, 3> kMarkers = {{
      {"[[A]]", Verdict::kLeft},
      {"[[B]]", Verdict::kRight},
      {"[[C]]", Verdict::kTie},
  }};
  std::optional<Verdict> found;
  std::size_t best = 0;
  for (const auto& [marker, verdict] : kMarkers) {
    const auto pos = raw.rfind(marker);
    if (pos != std::string_view::npos && (!found || pos > best)) {
      best = pos;
      found = verdict;
    }
  }
  if (!found) throw Error(ErrorCode::kParse, "unparseable verdict: no [[A]]/[[B]]/[[C]] marker");
  return *found;
}

JudgeResult JudgePair(std::string_view instruction, std::string_view incumbent,
                      std::string_view challenger, JudgeMode mode, Provider& provider, Rng& rng,
                      const GenerationParams& params) {
  if (instruction.empty() || incumbent.empty() || challenger.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "judge_pair needs non-empty texts");
  }
  JudgeResult result;
  auto& record = result.record;
  record.instruction = instruction;
  record.incumbent = incumbent;
  record.challenger = challenger;
  if (mode == JudgeMode::kSingle) {
    const auto order =
        rng.CoinFlip() ? PresentedOrder::kChallengerFirst : PresentedOrder::kIncumbentFirst;
    record.queries.push_back(
        Ask(instruction, incumbent, challenger, order, provider, params, record.warnings));
  } else {
    for (auto order : {PresentedOrder::kIncumbentFirst, PresentedOrder::kChallengerFirst}) {
      record.queries.push_back(
          Ask(instruction, incumbent, challenger, order, provider, params, record.warnings));
    }
  }
  record.final = CombineQueries(record.queries);
  result.final = record.final;
  return result;
}

TournamentResult ReorderChain(const InstructionChain& chain, JudgeMode mode, Provider& provider,
                              Rng& rng, const GenerationParams& params) {
  if (!chain.Complete()) {
    throw Error(ErrorCode::kInvalidArgument, "chain " + chain.seed.id + " is incomplete");
  }
  TournamentResult out;
  out.final_winner = chain.seed_output;
  out.final_winner_k = 0;
  for (int k = 1; k <= chain.n; ++k) {
    const std::string& instruction = chain.InstructionAt(k);
    const std::string& challenger = chain.OutputAt(k);
    JudgeResult judged;
    try {
      judged = JudgePair(instruction, out.final_winner, challenger, mode, provider, rng, params);
    } catch (const Error& e) {
      throw TournamentError(e.code(),
                            "seed " + chain.seed.id + " comparison k=" + std::to_string(k) + ": " +
                                e.what(),
                            k, out);
    }
    auto& record = judged.record;
    record.id = chain.seed.id + ":k" + std::to_string(k);
    record.seed_id = chain.seed.id;
    record.k = k;
    record.incumbent_k = out.final_winner_k;

    const bool decisive = judged.final != Outcome::kTie;
    if (decisive && out.final_winner == challenger) {
      record.warnings.emplace_back("incumbent and challenger texts are identical; no pair emitted");
    } else if (decisive) {
      const bool challenger_won = judged.final == Outcome::kChallengerWins;
      PreferencePair pair;
      pair.seed_id = chain.seed.id;
      pair.k = k;
      pair.instruction = instruction;
      pair.chosen = challenger_won ? challenger : out.final_winner;
      pair.rejected = challenger_won ? out.final_winner : challenger;
      pair.record_ref = record.id;
      out.pairs.push_back(std::move(pair));
    }
    if (judged.final != Outcome::kIncumbentWins) {
      out.final_winner = challenger;
      out.final_winner_k = k;
    }
    out.records.push_back(std::move(record));
  }
  return out;
}

}  // namespace cforge
