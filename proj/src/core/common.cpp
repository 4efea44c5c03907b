#include <limits>

#include "cforge/error.hpp"
#include "cforge/rng.hpp"

namespace cforge {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kAuthentication: return "authentication";
    case ErrorCode::kRateLimited: return "rate_limited";
    case ErrorCode::kEmptyCompletion: return "empty_completion";
    case ErrorCode::kUnscripted: return "unscripted";
    case ErrorCode::kExhausted: return "exhausted";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kStage: return "stage";
  }
  return "unknown";
}

std::uint64_t Fnv1a64(std::string_view data, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng Rng::Derive(std::uint64_t base_seed, std::string_view label) {
  // splitmix64 finalizer over (seed, label hash)
  std::uint64_t z = base_seed ^ Fnv1a64(label);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return Rng(z ^ (z >> 31));
}

std::uint64_t Rng::UniformIndex(std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "UniformIndex needs n >= 1");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = Next();
  } while (x >= limit);
  return x % n;
}

double Rng::UniformReal() {
  return static_cast<double>(Next() >> 11) * 0x1.0p-53;
}

}  // namespace cforge
