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

// Embedded Runge-Kutta 5(4) pair of Dormand and Prince with PI step-size
// control and the fourth-order continuous extension for dense output.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>

#include "assocmem/types.hpp"

namespace assocmem {

struct OdeOptions {
  double atol = 1e-8;
  double rtol = 1e-8;
  double initial_step = 0.0;  // 0 selects a step from the local scale
  double max_step = 0.0;      // 0 means unbounded
  std::size_t max_steps = 50'000'000;
};

struct OdeStats {
  bool ok = true;
  bool stopped = false;  // the observer asked to stop
  std::string message;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
};

namespace dopri {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dopri

// Integrates y' = rhs(t, y) from t0 to t1 (t1 >= t0). `observe(t, y)` is
// called at each entry of `out_times` (ascending, inside [t0, t1]) with the
// dense-output state; returning false stops the integration.
template <class Rhs, class Observer>
OdeStats integrate_dopri5(Rhs&& rhs, Vector& y, double t0, double t1, std::span<const double> out_times,
                          Observer&& observe, const OdeOptions& opt = {}) {
  using namespace dopri;
  OdeStats stats;
  const Index n = y.size();
  auto f = [&](double t, const Vector& state, Vector& out) {
    out = rhs(t, state);
    ++stats.rhs_evals;
  };
  auto scaled_norm = [&](const Vector& v, const Vector& a, const Vector& b) {
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(a(i)), std::abs(b(i)));
      acc += (v(i) / sc) * (v(i) / sc);
    }
    return n > 0 ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
  };

  std::size_t next_out = 0;
  auto emit_until = [&](double t_limit, auto&& state_at) -> bool {
    while (next_out < out_times.size() && out_times[next_out] <= t_limit) {
      const double tq = out_times[next_out++];
      if (!observe(tq, state_at(tq))) return false;
    }
    return true;
  };

  if (!(t1 >= t0)) {
    stats.ok = false;
    stats.message = "integration end precedes start";
    return stats;
  }
  if (t1 == t0 || n == 0) {
    if (!emit_until(t1, [&](double) -> const Vector& { return y; })) stats.stopped = true;
    return stats;
  }
  // Requested outputs at t0 itself.
  if (!emit_until(t0, [&](double) -> const Vector& { return y; })) {
    stats.stopped = true;
    return stats;
  }

  Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), y1(n), err(n);
  Vector r1(n), r2(n), r3(n), r4(n), r5(n);
  double t = t0;
  f(t, y, k1);

  double h = opt.initial_step;
  if (h <= 0.0) {
    const Vector zero = Vector::Zero(n);
    const double dn0 = scaled_norm(y, y, zero);
    const double dn1 = scaled_norm(k1, y, zero);
    double h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? 1e-6 : 0.01 * dn0 / dn1;
    h0 = std::min(h0, t1 - t0);
    ytmp = y + h0 * k1;
    f(t + h0, ytmp, k2);
    const double dn2 = scaled_norm(k2 - k1, y, zero) / h0;
    const double h1 = std::max(dn1, dn2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                   : std::pow(0.01 / std::max(dn1, dn2), 1.0 / 5.0);
    h = std::min(100.0 * h0, h1);
  }
  const double hmax = opt.max_step > 0.0 ? opt.max_step : (t1 - t0);
  h = std::min(h, hmax);

  constexpr double safe = 0.9, facmin = 0.2, facmax = 10.0, beta = 0.04;
  const double expo1 = 0.2 - beta * 0.75;
  double facold = 1e-4;
  bool last_rejected = false;

  while (t < t1) {
    if (stats.accepted + stats.rejected >= opt.max_steps) {
      stats.ok = false;
      stats.message = "maximum number of steps exceeded at t = " + std::to_string(t);
      return stats;
    }
    if (h < 1e-14 * std::max(1.0, std::abs(t))) {
      stats.ok = false;
      stats.message = "step size underflow at t = " + std::to_string(t);
      return stats;
    }
    if (t + h > t1) h = t1 - t;

    ytmp = y + h * a21 * k1;
    f(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, ytmp, k6);
    y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    f(t + h, y1, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double en = scaled_norm(err, y, y1);
    if (!std::isfinite(en)) {
      stats.ok = false;
      stats.message = "non-finite state at t = " + std::to_string(t);
      return stats;
    }
    const double fac11 = std::pow(std::max(en, 1e-300), expo1);
    if (en <= 1.0) {
      double fac = fac11 / std::pow(facold, beta);
      fac = std::clamp(fac / safe, 1.0 / facmax, 1.0 / facmin);
      double hnew = h / fac;
      facold = std::max(en, 1e-4);

      // Continuous extension over [t, t + h].
      r1 = y;
      r2 = y1 - y;
      r3 = h * k1 - r2;
      r4 = r2 - h * k7 - r3;
      r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      const double told = t;
      const double hstep = h;
      t = (t + h >= t1) ? t1 : t + h;
      bool keep_going = emit_until(t, [&](double tq) -> Vector {
        if (tq >= t) return y1;
        const double th = (tq - told) / hstep;
        const double th1 = 1.0 - th;
        return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
      });
      y = y1;
      k1 = k7;
      ++stats.accepted;
      if (!keep_going) {
        stats.stopped = true;
        return stats;
      }
      if (last_rejected) hnew = std::min(hnew, h);
      last_rejected = false;
      h = std::min(hnew, hmax);
    } else {
      h = h / std::min(1.0 / facmin, fac11 / safe);
      last_rejected = true;
      ++stats.rejected;
    }
  }
  return stats;
}

}  // namespace assocmem
