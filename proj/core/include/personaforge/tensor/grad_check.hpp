#pragma once

#include <functional>
#include <span>
#include <vector>

#include "personaforge/tensor/tensor.hpp"

namespace personaforge::tensor {

/// Scalar-valued function of one or more tensors.
using ScalarFunction = std::function<Tensor(std::span<const Tensor>)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares tape gradients of f at `point` against central differences.
/// Relative error per coordinate is |a - n| / max(1e-8, |a| + |n|).
/// The point tensors are copied; the caller's tensors are left untouched.
GradCheckReport grad_check_report(const ScalarFunction& f, std::span<const Tensor> point,
                                  double epsilon = 1e-5);

double grad_check(const ScalarFunction& f, std::span<const Tensor> point,
                  double epsilon = 1e-5);

}  // namespace personaforge::tensor
