#include "choreeq/generate.hpp"

#include <cmath>
#include <random>

#include "choreeq/errors.hpp"

namespace choreeq {

namespace {

// Uniform double in [0, 1) from the top 53 bits; identical across platforms
// for a given seed, unlike std::uniform_real_distribution.
double next_unit(std::mt19937_64& rng) { return std::ldexp(double(rng() >> 11), -53); }

double next_in(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * next_unit(rng);
}

}  // namespace

GenKind parse_gen_kind(const std::string& s) {
  if (s == "linear") return GenKind::kLinear;
  if (s == "ces") return GenKind::kCes;
  if (s == "mixed") return GenKind::kMixed;
  throw InvalidRange("unknown instance kind: " + s);
}

Instance generate_instance(const GenOptions& opts) {
  if (opts.n < 1 || opts.m < 1) throw InvalidRange("need at least one agent and one chore");
  if (!(opts.coeff_lo < opts.coeff_hi)) throw InvalidRange("coefficient range is empty");
  if (opts.kind != GenKind::kMixed && !(opts.coeff_lo > 0.0)) {
    throw InvalidRange("coefficient range must be positive for chores instances");
  }

  std::mt19937_64 rng(opts.seed);
  Instance inst;
  inst.n = opts.n;
  inst.m = opts.m;
  inst.mode = opts.kind == GenKind::kMixed ? Mode::kMixedManna : Mode::kChoresOnly;
  inst.disutilities.reserve(opts.n);

  switch (opts.kind) {
    case GenKind::kLinear: {
      for (int i = 0; i < opts.n; ++i) {
        Vec c(opts.m);
        for (int j = 0; j < opts.m; ++j) c[j] = next_in(rng, opts.coeff_lo, opts.coeff_hi);
        inst.disutilities.push_back(DisutilitySpec::linear(std::move(c)));
      }
      break;
    }
    case GenKind::kCes: {
      static const double rho_choices[] = {1.5, 2.0, 3.0};
      for (int i = 0; i < opts.n; ++i) {
        Vec c(opts.m);
        for (int j = 0; j < opts.m; ++j) c[j] = next_in(rng, opts.coeff_lo, opts.coeff_hi);
        double rho = opts.rho ? *opts.rho : rho_choices[rng() % 3];
        inst.disutilities.push_back(DisutilitySpec::ces(std::move(c), rho));
      }
      break;
    }
    case GenKind::kMixed: {
      const double lo = std::min(std::abs(opts.coeff_lo), std::abs(opts.coeff_hi));
      const double hi = std::max(std::abs(opts.coeff_lo), std::abs(opts.coeff_hi));
      if (!(lo < hi) || !(lo >= 0.0)) throw InvalidRange("mixed magnitudes need 0 <= lo < hi");
      bool any_chore = false;
      for (int i = 0; i < opts.n; ++i) {
        Vec c(opts.m);
        for (int j = 0; j < opts.m; ++j) {
          double mag = next_in(rng, lo, hi);
          bool chore = next_unit(rng) < 0.5;  // disutility sign: + chore, - good
          c[j] = chore ? mag : -mag;
          any_chore = any_chore || chore;
        }
        inst.disutilities.push_back(DisutilitySpec::linear(std::move(c)));
      }
      // Every mixed instance carries at least one genuine chore entry.
      if (!any_chore) {
        inst.disutilities[0].coeffs[0] = std::abs(inst.disutilities[0].coeffs[0]);
      }
      break;
    }
  }
  return validate_and_preprocess(std::move(inst));
}

}  // namespace choreeq
