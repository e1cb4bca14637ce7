#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "personaforge/encoders/image_encoder.hpp"
#include "personaforge/tensor/checkpoint.hpp"
#include "personaforge/tensor/tensor.hpp"

namespace personaforge::gan {

inline constexpr std::size_t kLatentDim = 64;
inline constexpr std::size_t kMappingLayers = 3;
inline constexpr std::size_t kConstChannels = 64;
inline constexpr std::size_t kConstSize = 4;
inline constexpr std::size_t kOutputSize = 32;
inline constexpr std::array<std::size_t, 4> kBlockChannels = {64, 32, 16, 16};
inline constexpr double kLeakySlope = 0.2;

/// One synthesis block: optional 2x upsample, 3x3 conv, per-channel noise,
/// leaky relu, instance norm, then style modulation
/// x * (1 + A_s w + b_s) + (A_t w + b_t).
struct SynthesisBlock {
  bool upsample = true;
  tensor::Tensor kernel;        // [c_out, c_in, 3, 3]
  tensor::Tensor bias;          // [c_out]
  tensor::Tensor noise_scale;   // [c_out]
  tensor::Tensor style_scale_weight;  // [64, c_out]
  tensor::Tensor style_scale_bias;    // [c_out]
  tensor::Tensor style_shift_weight;  // [64, c_out]
  tensor::Tensor style_shift_bias;    // [c_out]
};

struct GeneratorParams {
  std::vector<tensor::Tensor> mapping_weights;  // 3 x [64, 64]
  std::vector<tensor::Tensor> mapping_biases;   // 3 x [64]
  tensor::Tensor constant;                      // [64, 4, 4]
  std::vector<SynthesisBlock> blocks;           // 4; the first keeps 4x4
  tensor::Tensor to_rgb_kernel;                 // [3, 16, 1, 1]
  tensor::Tensor to_rgb_bias;                   // [3]

  static GeneratorParams zeros();
  static GeneratorParams init(std::mt19937_64& rng);

  tensor::ParameterList parameters(const std::string& prefix = "generator") const;
  GeneratorParams clone() const;
};

/// z -> w through 3 x (FC + relu).
tensor::Tensor map_latent(const tensor::Tensor& z, const GeneratorParams& params);

struct SynthesisTrace {
  std::vector<tensor::Tensor> block_outputs;
  tensor::Tensor image;  // [3, 32, 32] in [-1, 1]
};

/// Pure function of (w, params, noise_seed).
tensor::Tensor synthesize(const tensor::Tensor& w, const GeneratorParams& params,
                          std::uint64_t noise_seed);
SynthesisTrace synthesize_trace(const tensor::Tensor& w, const GeneratorParams& params,
                                std::uint64_t noise_seed);

/// Standard normal latent drawn from a generator seeded by (seed, index).
tensor::Tensor latent_for(std::uint64_t seed, std::uint64_t index);

/// 1x1 from-RGB, then three (3x3 conv + leaky relu + 2x2 avg pool) stages and
/// a linear read-out of the 64x4x4 map.
struct DiscriminatorParams {
  tensor::Tensor from_rgb_kernel;  // [16, 3, 1, 1]
  tensor::Tensor from_rgb_bias;
  std::vector<tensor::Tensor> kernels;  // [32,16,3,3], [64,32,3,3], [64,64,3,3]
  std::vector<tensor::Tensor> biases;
  tensor::Tensor out_weight;  // [1024, 1]
  tensor::Tensor out_bias;    // [1]

  static DiscriminatorParams init(std::mt19937_64& rng);
  tensor::ParameterList parameters(const std::string& prefix = "discriminator") const;
  DiscriminatorParams clone() const;
};

/// Real/fake logit [1] for a [3,32,32] image.
tensor::Tensor discriminate(const tensor::Tensor& image, const DiscriminatorParams& params);

/// Maps a source asset image to w-space: frozen conv trunk features [64]
/// followed by a learned FC [64 -> 64].
struct StyleEncoder {
  encoders::ImageEncoderParams trunk;
  tensor::Tensor weight;  // [64, 64]
  tensor::Tensor bias;    // [64]

  static StyleEncoder init(std::mt19937_64& rng);
  tensor::ParameterList parameters(const std::string& prefix = "style") const;
  StyleEncoder clone() const;
};

/// Trunk features of a [3,64,64] image (no gradient).
tensor::Tensor style_features(const tensor::Tensor& image64, const StyleEncoder& encoder);
tensor::Tensor style_from_features(const tensor::Tensor& features, const StyleEncoder& encoder);
tensor::Tensor style_of(const tensor::Tensor& image64, const StyleEncoder& encoder);

/// Generator, discriminator and style encoder for one industry.
struct GanModel {
  GeneratorParams generator;
  DiscriminatorParams discriminator;
  StyleEncoder style;

  static GanModel init(std::uint64_t seed);
  tensor::ParameterList parameters() const;
  GanModel clone() const;

  void save(const std::filesystem::path& path, nlohmann::json meta = nlohmann::json::object()) const;
  static GanModel load(const std::filesystem::path& path, nlohmann::json* meta = nullptr);
};

}  // namespace personaforge::gan
