#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tcat/diff/params.hpp"
#include "tcat/diff/tensor.hpp"

namespace tcat::diff {

struct ParamCheck {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
};

struct CheckReport {
  std::vector<ParamCheck> params;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool passed = false;
  std::string diagnostic;  // set when f produced a non-finite value
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps round-off on vanishing
/// gradients from reading as a large relative error.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Compares tape gradients of the scalar `f` against central differences
/// (f(t+eps) - f(t-eps)) / (2 eps) for every entry of every parameter.
/// `f` must be deterministic and rebuild its graph on each call.
CheckReport finite_diff_check(const std::function<Tensor()>& f,
                              const std::vector<ParamStore::Entry>& params,
                              double eps, double tol);

}  // namespace tcat::diff
