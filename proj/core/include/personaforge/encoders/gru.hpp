#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>

#include "personaforge/tensor/checkpoint.hpp"
#include "personaforge/tensor/tensor.hpp"

namespace personaforge::encoders {

/// One GRU direction. Input weights are [input, hidden], recurrent weights
/// [hidden, hidden], biases [hidden].
struct GruParams {
  tensor::Tensor w_update, u_update, b_update;
  tensor::Tensor w_reset, u_reset, b_reset;
  tensor::Tensor w_candidate, u_candidate, b_candidate;

  static GruParams zeros(std::size_t input, std::size_t hidden);
  /// Uniform(-1/sqrt(hidden), 1/sqrt(hidden)) for every entry.
  static GruParams init(std::size_t input, std::size_t hidden, std::mt19937_64& rng);

  std::size_t input_size() const { return w_update.dim(0); }
  std::size_t hidden_size() const { return w_update.dim(1); }

  void append_to(tensor::ParameterList& out, const std::string& prefix) const;
  GruParams clone() const;
};

/// z = sigmoid(x Wz + h Uz + bz)
/// r = sigmoid(x Wr + h Ur + br)
/// c = tanh(x Wc + (r * h) Uc + bc)
/// h' = (1 - z) * h + z * c
tensor::Tensor gru_step(const tensor::Tensor& x, const tensor::Tensor& h, const GruParams& p);

/// Runs the recurrence over `inputs` (each [input]) from a zero state and
/// returns the final hidden state.
tensor::Tensor gru_run(std::span<const tensor::Tensor> inputs, const GruParams& p);

}  // namespace personaforge::encoders
