#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "choreeq/instance.hpp"

namespace choreeq {

enum class GenKind { kLinear, kCes, kMixed };

struct GenOptions {
  int n = 2;
  int m = 2;
  GenKind kind = GenKind::kLinear;
  double coeff_lo = 1.0;
  double coeff_hi = 10.0;
  std::uint64_t seed = 0;
  // CES exponent; drawn from {1.5, 2, 3} when unset.
  std::optional<double> rho;
};

GenKind parse_gen_kind(const std::string& s);

// Deterministic seeded instance generator shared by the CLI and the test
// batches: the same options always produce the same instance.
Instance generate_instance(const GenOptions& opts);

}  // namespace choreeq
