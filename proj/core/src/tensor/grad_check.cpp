#include "personaforge/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace personaforge::tensor {

GradCheckReport grad_check_report(const ScalarFunction& f, std::span<const Tensor> point,
                                  double epsilon) {
  std::vector<Tensor> inputs;
  inputs.reserve(point.size());
  for (const Tensor& t : point) {
    Tensor copy = t.clone();
    copy.set_requires_grad(true);
    inputs.push_back(std::move(copy));
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f(inputs);
    tape.backward(loss);
    for (const Tensor& t : inputs) analytic.push_back(t.grad());
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& t = inputs[k];
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t[i];
      t[i] = saved + epsilon;
      const double up = f(inputs).item();
      t[i] = saved - epsilon;
      const double down = f(inputs).item();
      t[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (err > report.max_relative_error) {
        report = {err, k, i, a, numeric};
      }
    }
  }
  return report;
}

double grad_check(const ScalarFunction& f, std::span<const Tensor> point, double epsilon) {
  return grad_check_report(f, point, epsilon).max_relative_error;
}

}  // namespace personaforge::tensor
