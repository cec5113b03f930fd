// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference oracle used by the gradient tests. Deliberately
// independent of the tape: it only re-runs a scalar forward closure.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "caw/autodiff.hpp"

namespace caw::test {

inline double central_diff(const std::function<double()>& forward, double& x, double step = 1e-5) {
  const double saved = x;
  x = saved + step;
  const double hi = forward();
  x = saved - step;
  const double lo = forward();
  x = saved;
  return (hi - lo) / (2.0 * step);
}

struct GradMismatch {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares every entry of every parameter gradient against central finite
// differences of `forward`. Parameters must already hold the analytic
// gradients (i.e. run backward first). Returns mismatches beyond
// |a - n| > abs_floor + rel_tol * max(|a|, |n|).
inline std::vector<GradMismatch> check_gradients(const std::vector<caw::Parameter*>& params,
                                                 const std::function<double()>& forward,
                                                 double rel_tol = 1e-3, double abs_floor = 1e-5,
                                                 double step = 1e-5) {
  std::vector<GradMismatch> bad;
  for (caw::Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double numeric = central_diff(forward, p->value.v[i], step);
      const double analytic = p->grad.v[i];
      const double tol = abs_floor + rel_tol * std::max(std::abs(analytic), std::abs(numeric));
      if (std::abs(analytic - numeric) > tol)
        bad.push_back({p->name, i, analytic, numeric});
    }
  }
  return bad;
}

}  // namespace caw::test
