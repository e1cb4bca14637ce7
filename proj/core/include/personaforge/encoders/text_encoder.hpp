#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>

#include "personaforge/encoders/gru.hpp"
#include "personaforge/encoders/vocabulary.hpp"
#include "personaforge/tensor/checkpoint.hpp"

namespace personaforge::encoders {

inline constexpr std::size_t kEmbeddingDim = 64;
inline constexpr std::size_t kGruHidden = 64;
inline constexpr std::size_t kViewDim = 32;

struct TextEncoderParams {
  tensor::Tensor embedding;  // [V, 64]
  GruParams forward;
  GruParams backward;
  tensor::Tensor proj_weight;  // [128, 32]
  tensor::Tensor proj_bias;    // [32]

  static TextEncoderParams zeros(std::size_t vocab_size);
  static TextEncoderParams init(std::size_t vocab_size, std::mt19937_64& rng);

  std::size_t vocab_size() const { return embedding.dim(0); }
  tensor::ParameterList parameters(const std::string& prefix = "text") const;
  TextEncoderParams clone() const;
};

struct BiGruStates {
  tensor::Tensor forward_final;   // state after reading t = 1..T
  tensor::Tensor backward_final;  // state after reading t = T..1
};

/// Runs both directions over the non-PAD tokens of one post.
BiGruStates bigru_states(std::span<const std::size_t> ids, const TextEncoderParams& params);

/// Per post: BiGRU final states concatenated (128), averaged over posts,
/// then relu(FC) -> [32]. Requires at least one post.
tensor::Tensor encode_text(std::span<const TokenizedPost> posts, const TextEncoderParams& params);

}  // namespace personaforge::encoders
