// Independent reference implementations used to check the library.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "cforge/analytics.hpp"
#include "cforge/judger.hpp"

namespace cforge::testing {

using HighFloat = boost::multiprecision::cpp_bin_float_50;
using Rational = boost::multiprecision::cpp_rational;

// tau = 1 - 4 * inversions / (n (n - 1)), inversions counted on the
// permutation that maps r1 positions to r2 positions.
inline double KendallByInversions(const std::vector<std::string>& r1,
                                  const std::vector<std::string>& r2) {
  std::map<std::string, long long> pos2;
  for (std::size_t i = 0; i < r2.size(); ++i) pos2[r2[i]] = static_cast<long long>(i);
  std::vector<long long> perm;
  for (const auto& item : r1) perm.push_back(pos2.at(item));
  long long inversions = 0;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t j = i + 1; j < perm.size(); ++j) inversions += perm[i] > perm[j] ? 1 : 0;
  }
  const auto n = static_cast<long long>(perm.size());
  const Rational tau = Rational(1) - Rational(4 * inversions, n * (n - 1));
  return static_cast<double>(tau);
}

// Fixed points of the composed permutation, divided by n.
inline double ConsistencyByFixedPoints(const std::vector<std::string>& r1,
                                       const std::vector<std::string>& r2) {
  std::size_t fixed = 0;
  for (std::size_t i = 0; i < r1.size(); ++i) {
    const auto at = std::find(r2.begin(), r2.end(), r1[i]) - r2.begin();
    if (static_cast<std::size_t>(at) == i) ++fixed;
  }
  return static_cast<double>(Rational(static_cast<long long>(fixed), static_cast<long long>(r1.size())));
}

// -log sigmoid(delta) - logp_chosen evaluated with 50 significant digits.
inline HighFloat HighPrecisionSampleLoss(const LossSample& s, double beta) {
  const HighFloat b(beta);
  const HighFloat delta = b * ((HighFloat(s.logp_policy_chosen) - HighFloat(s.logp_ref_chosen)) -
                               (HighFloat(s.logp_policy_rejected) - HighFloat(s.logp_ref_rejected)));
  const HighFloat dpo = boost::multiprecision::log1p(boost::multiprecision::exp(-delta));
  return dpo - HighFloat(s.logp_policy_chosen);
}

inline HighFloat HighPrecisionMeanLoss(const std::vector<LossSample>& batch, double beta) {
  HighFloat total = 0;
  for (const auto& s : batch) total += HighPrecisionSampleLoss(s, beta);
  return total / HighFloat(batch.size());
}

// Exact proportional shares with largest-remainder rounding, in rationals.
struct RationalAllocation {
  std::vector<Rational> exact;
  std::vector<std::uint64_t> rounded;
};

inline RationalAllocation AllocateByRationals(const std::vector<std::uint64_t>& sizes,
                                              std::uint64_t budget) {
  RationalAllocation out;
  boost::multiprecision::cpp_int total = 0;
  for (auto s : sizes) total += s;
  std::vector<std::pair<Rational, std::size_t>> remainders;
  boost::multiprecision::cpp_int assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const Rational share =
        total == 0 ? Rational(0) : Rational(boost::multiprecision::cpp_int(sizes[i]) * budget, total);
    out.exact.push_back(share);
    const boost::multiprecision::cpp_int floor_value =
        boost::multiprecision::numerator(share) / boost::multiprecision::denominator(share);
    out.rounded.push_back(static_cast<std::uint64_t>(floor_value));
    assigned += floor_value;
    remainders.emplace_back(share - Rational(floor_value), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  boost::multiprecision::cpp_int left = total == 0 ? 0 : boost::multiprecision::cpp_int(budget) - assigned;
  for (std::size_t j = 0; left > 0; ++j, --left) ++out.rounded[remainders[j].second];
  return out;
}

struct TracedPair {
  int k = 0;
  std::string chosen;
  std::string rejected;
  bool operator==(const TracedPair&) const = default;
};

// The incumbent recurrence for a five-step chain, written out step by step.
inline std::vector<TracedPair> HandTraceFiveSteps(const std::vector<std::string>& outputs,
                                                  const std::vector<Outcome>& outcome_at) {
  std::vector<TracedPair> pairs;
  std::string incumbent = outputs[0];

  // k = 1
  if (outcome_at[1] == Outcome::kIncumbentWins) {
    pairs.push_back({1, incumbent, outputs[1]});
  } else if (outcome_at[1] == Outcome::kChallengerWins) {
    pairs.push_back({1, outputs[1], incumbent});
    incumbent = outputs[1];
  } else {
    incumbent = outputs[1];
  }
  // k = 2
  if (outcome_at[2] == Outcome::kIncumbentWins) {
    pairs.push_back({2, incumbent, outputs[2]});
  } else if (outcome_at[2] == Outcome::kChallengerWins) {
    pairs.push_back({2, outputs[2], incumbent});
    incumbent = outputs[2];
  } else {
    incumbent = outputs[2];
  }
  // k = 3
  if (outcome_at[3] == Outcome::kIncumbentWins) {
    pairs.push_back({3, incumbent, outputs[3]});
  } else if (outcome_at[3] == Outcome::kChallengerWins) {
    pairs.push_back({3, outputs[3], incumbent});
    incumbent = outputs[3];
  } else {
    incumbent = outputs[3];
  }
  // k = 4
  if (outcome_at[4] == Outcome::kIncumbentWins) {
    pairs.push_back({4, incumbent, outputs[4]});
  } else if (outcome_at[4] == Outcome::kChallengerWins) {
    pairs.push_back({4, outputs[4], incumbent});
    incumbent = outputs[4];
  } else {
    incumbent = outputs[4];
  }
  // k = 5
  if (outcome_at[5] == Outcome::kIncumbentWins) {
    pairs.push_back({5, incumbent, outputs[5]});
  } else if (outcome_at[5] == Outcome::kChallengerWins) {
    pairs.push_back({5, outputs[5], incumbent});
  }
  return pairs;
}

struct JudgeSlots {
  std::string instruction;
  std::string a;
  std::string b;
};

// Splits a judge prompt back into the instruction and the two slot texts.
inline JudgeSlots SplitJudgePrompt(std::string_view prompt) {
  constexpr std::string_view kStartA = "\n/* The Start of Output (a) */\n";
  constexpr std::string_view kEndA = "\n/* The End of Output (a) */\n/* The Start of Output (b) */\n";
  constexpr std::string_view kEndB = "\n/* The End of Output (b) */\n";
  constexpr std::string_view kHeadEnd = "/* Given instruction */\n";
  JudgeSlots s;
  const auto head = prompt.find(kHeadEnd);
  const auto a0 = prompt.find(kStartA);
  const auto a1 = prompt.find(kEndA, a0);
  const auto b1 = prompt.rfind(kEndB);
  if (head == std::string_view::npos || a0 == std::string_view::npos ||
      a1 == std::string_view::npos || b1 == std::string_view::npos) {
    return s;
  }
  s.instruction = std::string(prompt.substr(head + kHeadEnd.size(), a0 - head - kHeadEnd.size()));
  s.a = std::string(prompt.substr(a0 + kStartA.size(), a1 - a0 - kStartA.size()));
  s.b = std::string(prompt.substr(a1 + kEndA.size(), b1 - a1 - kEndA.size()));
  return s;
}

}  // namespace cforge::testing
