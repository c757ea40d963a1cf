// Copyright 2026 The assocmem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Principal branch of the product logarithm, y e^y = x.

#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace assocmem {

inline constexpr int kLambertMaxIter = 50;

namespace detail {

inline double lambert_guess(double x) {
  constexpr double e = std::numbers::e;
  if (x < -0.25) {
    // Series in p = sqrt(2 (e x + 1)) around the branch point -1/e.
    const double p = std::sqrt(std::max(0.0, 2.0 * (e * x + 1.0)));
    return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * 11.0 / 72.0));
  }
  if (x <= e) return std::log1p(x) * (1.0 - std::log1p(std::log1p(x)) / (2.0 + std::log1p(x)));
  const double l1 = std::log(x);
  const double l2 = std::log(l1);
  return l1 - l2 + l2 / l1;
}

}  // namespace detail

inline double lambert_w0(double x) {
  constexpr double branch = -1.0 / std::numbers::e;
  if (std::isnan(x)) throw std::domain_error("lambert_w0: NaN argument");
  if (x < branch) {
    // Allow the last ulp or so below -1/e, which is where the rounded constant lands.
    if (x < branch - 4.0 * std::numeric_limits<double>::epsilon()) throw std::domain_error("lambert_w0: x < -1/e");
    return -1.0;
  }
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return x;
  if (x == branch) return -1.0;

  double y = detail::lambert_guess(x);
  for (int it = 0; it < kLambertMaxIter; ++it) {
    const double ey = std::exp(y);
    const double f = y * ey - x;
    const double yp1 = y + 1.0;
    if (yp1 == 0.0) break;
    const double denom = ey * yp1 - (y + 2.0) * f / (2.0 * yp1);
    if (denom == 0.0 || !std::isfinite(denom)) break;
    const double step = f / denom;
    double next = y - step;
    if (next <= -1.0) next = 0.5 * (y - 1.0);  // stay on the principal branch
    const bool done = std::abs(next - y) <= 1e-14 * (1.0 + std::abs(next));
    y = next;
    if (done) break;
  }
  return y;
}

// W0(exp(v)) without forming exp(v): the root of w + log w = v, w > 0.
inline double lambert_w0_exp(double v) {
  if (std::isnan(v)) throw std::domain_error("lambert_w0_exp: NaN argument");
  if (v == std::numeric_limits<double>::infinity()) return v;
  if (v < 1.0) return lambert_w0(std::exp(v));
  double w = v - std::log(v);
  if (w <= 0.0) w = 0.5;
  for (int it = 0; it < kLambertMaxIter; ++it) {
    const double g = w + std::log(w) - v;
    // Halley on g(w) = w + log w - v: g' = 1 + 1/w, g'' = -1/w^2.
    const double g1 = 1.0 + 1.0 / w;
    const double g2 = -1.0 / (w * w);
    double next = w - 2.0 * g * g1 / (2.0 * g1 * g1 - g * g2);
    if (next <= 0.0) next = 0.5 * w;
    const bool done = std::abs(next - w) <= 1e-15 * (1.0 + std::abs(next));
    w = next;
    if (done) break;
  }
  return w;
}

}  // namespace assocmem
