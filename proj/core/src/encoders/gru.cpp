#include "personaforge/encoders/gru.hpp"

#include <cmath>

#include "personaforge/tensor/ops.hpp"

namespace personaforge::encoders {

using tensor::Tensor;

GruParams GruParams::zeros(std::size_t input, std::size_t hidden) {
  auto w = [&] { return Tensor::zeros({input, hidden}, true); };
  auto u = [&] { return Tensor::zeros({hidden, hidden}, true); };
  auto b = [&] { return Tensor::zeros({hidden}, true); };
  return {w(), u(), b(), w(), u(), b(), w(), u(), b()};
}

GruParams GruParams::init(std::size_t input, std::size_t hidden, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto w = [&] { return Tensor::uniform({input, hidden}, -bound, bound, rng, true); };
  auto u = [&] { return Tensor::uniform({hidden, hidden}, -bound, bound, rng, true); };
  auto b = [&] { return Tensor::uniform({hidden}, -bound, bound, rng, true); };
  GruParams p;
  p.w_update = w(); p.u_update = u(); p.b_update = b();
  p.w_reset = w(); p.u_reset = u(); p.b_reset = b();
  p.w_candidate = w(); p.u_candidate = u(); p.b_candidate = b();
  return p;
}

void GruParams::append_to(tensor::ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".w_update", w_update});
  out.push_back({prefix + ".u_update", u_update});
  out.push_back({prefix + ".b_update", b_update});
  out.push_back({prefix + ".w_reset", w_reset});
  out.push_back({prefix + ".u_reset", u_reset});
  out.push_back({prefix + ".b_reset", b_reset});
  out.push_back({prefix + ".w_candidate", w_candidate});
  out.push_back({prefix + ".u_candidate", u_candidate});
  out.push_back({prefix + ".b_candidate", b_candidate});
}

GruParams GruParams::clone() const {
  return {w_update.clone(), u_update.clone(), b_update.clone(),
          w_reset.clone(),  u_reset.clone(),  b_reset.clone(),
          w_candidate.clone(), u_candidate.clone(), b_candidate.clone()};
}

Tensor gru_step(const Tensor& x, const Tensor& h, const GruParams& p) {
  using namespace tensor;
  const Tensor no_bias = Tensor::zeros({p.hidden_size()});
  const Tensor z = sigmoid(add(linear(x, p.w_update, p.b_update), linear(h, p.u_update, no_bias)));
  const Tensor r = sigmoid(add(linear(x, p.w_reset, p.b_reset), linear(h, p.u_reset, no_bias)));
  const Tensor c = tensor::tanh(
      add(linear(x, p.w_candidate, p.b_candidate), linear(mul(r, h), p.u_candidate, no_bias)));
  // (1 - z) * h + z * c == h + z * (c - h)
  return add(h, mul(z, sub(c, h)));
}

Tensor gru_run(std::span<const Tensor> inputs, const GruParams& p) {
  Tensor h = Tensor::zeros({p.hidden_size()});
  for (const Tensor& x : inputs) h = gru_step(x, h, p);
  return h;
}

}  // namespace personaforge::encoders
