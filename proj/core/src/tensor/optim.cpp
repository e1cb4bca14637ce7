#include "personaforge/tensor/optim.hpp"

#include <cmath>

namespace personaforge::tensor {

Adam::Adam(std::vector<Tensor> parameters, AdamConfig config)
    : parameters_(std::move(parameters)), config_(config) {
  for (const Tensor& p : parameters_) {
    first_moment_.emplace_back(p.numel(), 0.0);
    second_moment_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step(double grad_scale) {
  ++step_;
  const double correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < parameters_.size(); ++k) {
    Tensor& p = parameters_[k];
    if (!p.has_grad()) continue;
    const auto& grad = p.impl()->grad;
    auto values = p.data();
    auto& m = first_moment_[k];
    auto& v = second_moment_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i] * grad_scale;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (Tensor& p : parameters_) p.zero_grad();
}

}  // namespace personaforge::tensor
