#include "personaforge/encoders/text_encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "personaforge/tensor/ops.hpp"

namespace personaforge::encoders {

using tensor::Tensor;

TextEncoderParams TextEncoderParams::zeros(std::size_t vocab_size) {
  return {Tensor::zeros({vocab_size, kEmbeddingDim}, true),
          GruParams::zeros(kEmbeddingDim, kGruHidden),
          GruParams::zeros(kEmbeddingDim, kGruHidden),
          Tensor::zeros({2 * kGruHidden, kViewDim}, true),
          Tensor::zeros({kViewDim}, true)};
}

TextEncoderParams TextEncoderParams::init(std::size_t vocab_size, std::mt19937_64& rng) {
  TextEncoderParams p;
  p.embedding = Tensor::normal({vocab_size, kEmbeddingDim}, 0.3, rng, true);
  p.forward = GruParams::init(kEmbeddingDim, kGruHidden, rng);
  p.backward = GruParams::init(kEmbeddingDim, kGruHidden, rng);
  const double bound = std::sqrt(6.0 / static_cast<double>(2 * kGruHidden + kViewDim));
  p.proj_weight = Tensor::uniform({2 * kGruHidden, kViewDim}, -bound, bound, rng, true);
  p.proj_bias = Tensor::full({kViewDim}, 0.01, true);
  return p;
}

tensor::ParameterList TextEncoderParams::parameters(const std::string& prefix) const {
  tensor::ParameterList out{{prefix + ".embedding", embedding}};
  forward.append_to(out, prefix + ".gru_forward");
  backward.append_to(out, prefix + ".gru_backward");
  out.push_back({prefix + ".proj_weight", proj_weight});
  out.push_back({prefix + ".proj_bias", proj_bias});
  return out;
}

TextEncoderParams TextEncoderParams::clone() const {
  return {embedding.clone(), forward.clone(), backward.clone(), proj_weight.clone(),
          proj_bias.clone()};
}

BiGruStates bigru_states(std::span<const std::size_t> ids, const TextEncoderParams& params) {
  std::vector<Tensor> steps;
  steps.reserve(ids.size());
  for (std::size_t id : ids) {
    if (id == kPadId) continue;
    const std::size_t one[] = {id};
    steps.push_back(tensor::reshape(tensor::embedding_lookup(params.embedding, one),
                                    {params.embedding.dim(1)}));
  }
  BiGruStates states{gru_run(steps, params.forward), Tensor()};
  std::vector<Tensor> reversed(steps.rbegin(), steps.rend());
  states.backward_final = gru_run(reversed, params.backward);
  return states;
}

Tensor encode_text(std::span<const TokenizedPost> posts, const TextEncoderParams& params) {
  if (posts.empty()) throw std::invalid_argument("encode_text: no posts");
  std::vector<Tensor> per_post;
  per_post.reserve(posts.size());
  for (const auto& post : posts) {
    const BiGruStates s = bigru_states(post.ids, params);
    const Tensor pair[] = {s.forward_final, s.backward_final};
    per_post.push_back(tensor::concat(pair));
  }
  const Tensor pooled = tensor::average(per_post);
  return tensor::relu(tensor::linear(pooled, params.proj_weight, params.proj_bias));
}

}  // namespace personaforge::encoders
