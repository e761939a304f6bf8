#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "narrationdep/core/params.hpp"

namespace narrationdep {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Central-difference check of `analytic` against loss_fn over every
/// coordinate of every parameter. Error per coordinate is
/// |a - n| / max(1e-8, |a| + |n|); the maximum is reported. Parameters are
/// restored exactly after each probe.
inline GradCheckResult finite_diff_check(const std::function<double()>& loss_fn,
                                         const ParamRefs& params,
                                         const ConstParamRefs& analytic,
                                         double epsilon = 1e-5) {
  require_matching_keys(params, analytic, "finite_diff_check");
  GradCheckResult res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].tensor->data();
    auto g = analytic[k].tensor->data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Real saved = p[i];
      p[i] = static_cast<Real>(saved + epsilon);
      const double plus = loss_fn();
      p[i] = static_cast<Real>(saved - epsilon);
      const double minus = loss_fn();
      p[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericalError("finite_diff_check: non-finite loss while probing '" +
                             params[k].name + "'[" + std::to_string(i) + "]");
      }
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = g[i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++res.coordinates;
      if (err > res.max_relative_error || res.coordinates == 1) {
        res.max_relative_error = err;
        res.worst_param = params[k].name;
        res.worst_index = i;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

inline GradCheckResult finite_diff_check(const std::function<double()>& loss_fn, const ParamRefs& params,
                                         const ParamRefs& analytic, double epsilon = 1e-5) {
  return finite_diff_check(loss_fn, params, as_const(analytic), epsilon);
}

}  // namespace narrationdep
