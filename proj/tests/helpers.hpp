#pragma once

#include <initializer_list>
#include <random>
#include <vector>

#include "choreeq/instance.hpp"

namespace choreeq::testing {

inline Mat mat2(std::initializer_list<std::initializer_list<double>> rows) {
  const int n = static_cast<int>(rows.size());
  const int m = static_cast<int>(rows.begin()->size());
  Mat out(n, m);
  int i = 0;
  for (const auto& r : rows) {
    int j = 0;
    for (double v : r) out(i, j++) = v;
    ++i;
  }
  return out;
}

inline Vec vec(std::initializer_list<double> vals) {
  Vec out(static_cast<int>(vals.size()));
  int i = 0;
  for (double v : vals) out[i++] = v;
  return out;
}

inline Instance linear_instance(const Mat& D, Mode mode = Mode::kChoresOnly) {
  Instance inst;
  inst.n = static_cast<int>(D.rows());
  inst.m = static_cast<int>(D.cols());
  inst.original_m = inst.m;
  inst.mode = mode;
  for (int i = 0; i < inst.n; ++i) {
    inst.disutilities.push_back(DisutilitySpec::linear(D.row(i).transpose()));
  }
  return validate_and_preprocess(std::move(inst));
}

// Uniform random linear chores instance with coefficients in [lo, hi].
inline Mat random_matrix(int n, int m, std::mt19937_64& rng, double lo = 1.0, double hi = 10.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat D(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) D(i, j) = u(rng);
  return D;
}

// Random exactly feasible allocation: each column drawn on the simplex.
inline Mat random_allocation(int n, int m, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Mat x(n, m);
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      x(i, j) = e(rng);
      s += x(i, j);
    }
    x.col(j) /= s;
  }
  return x;
}

}  // namespace choreeq::testing
