#pragma once

#include <vector>

#include "personaforge/tensor/tensor.hpp"

namespace personaforge::tensor {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over a fixed parameter list. Gradients are read from the tensors'
/// accumulated grad buffers.
class Adam {
 public:
  Adam(std::vector<Tensor> parameters, AdamConfig config);

  /// Applies one update using grad * grad_scale, then clears the grads.
  void step(double grad_scale = 1.0);
  void zero_grad();
  long steps_taken() const { return step_; }

 private:
  std::vector<Tensor> parameters_;
  AdamConfig config_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  long step_ = 0;
};

}  // namespace personaforge::tensor
