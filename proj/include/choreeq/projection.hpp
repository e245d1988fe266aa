#pragma once

#include <cstdint>
#include <vector>

#include "choreeq/instance.hpp"

namespace choreeq {

// Column support mask for instances with eliminated variables. Empty mask
// means every entry is allowed.
using SupportMask = std::vector<std::vector<std::uint8_t>>;  // [j][i]

// Euclidean projection onto { v >= 0, sum v = total }.
Vec project_simplex(const Vec& v, double total = 1.0);

// Euclidean projection onto { 0 <= v <= hi, sum v >= lo }.
Vec project_lower_box(const Vec& v, double lo = 1.0, double hi = 2.0);

// Euclidean projection onto { v >= 0, sum v <= hi_total }.
Vec project_capped_simplex(const Vec& v, double hi_total = 1.0);

// Euclidean projection onto { y >= 0, <p, y> = budget } for p > 0.
Vec project_weighted_simplex(const Vec& v, const Vec& p, double budget = 1.0);

// Projects every column of x onto the simplex { >= 0, sum = 1 }, honoring an
// optional support mask (masked-out entries are pinned to zero).
void project_columns_simplex(Mat& x, const SupportMask* mask = nullptr);

// Projects every column onto { 0 <= v <= hi, sum v >= 1 } (over-allocation
// allowed up to the box bound).
void project_columns_lower_box(Mat& x, double hi = 2.0, const SupportMask* mask = nullptr);

}  // namespace choreeq
