#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "personaforge/encoders/text_encoder.hpp"
#include "personaforge/tensor/checkpoint.hpp"

namespace personaforge::encoders {

inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kImageSize = 64;
inline constexpr std::size_t kMaxRecentImages = 10;
inline constexpr std::size_t kImageFeatureDim = 64;
inline constexpr std::array<std::size_t, 4> kConvBlockChannels = {16, 32, 64, 64};

/// Four blocks of (3x3 conv + relu) x2 followed by 2x2 max-pool, then global
/// average pooling and a [64 -> 32] projection.
struct ImageEncoderParams {
  std::vector<tensor::Tensor> kernels;  // 8 conv kernels, two per block
  std::vector<tensor::Tensor> biases;
  tensor::Tensor proj_weight;  // [64, 32]
  tensor::Tensor proj_bias;    // [32]

  static ImageEncoderParams zeros();
  /// He-normal conv kernels, zero conv biases.
  static ImageEncoderParams init(std::mt19937_64& rng);

  tensor::ParameterList parameters(const std::string& prefix = "image") const;
  /// Parameters of the conv trunk only (no projection).
  tensor::ParameterList trunk_parameters(const std::string& prefix = "image") const;
  ImageEncoderParams clone() const;
};

struct TimedImage {
  tensor::Tensor image;  // [3, 64, 64]
  std::int64_t timestamp = 0;
};

/// Conv trunk + global average pool for one [3,64,64] image -> [64].
tensor::Tensor image_features(const tensor::Tensor& image, const ImageEncoderParams& params);

/// Indices of the (at most) `limit` most recent images, newest first; ties
/// keep input order.
std::vector<std::size_t> most_recent(std::span<const TimedImage> images,
                                     std::size_t limit = kMaxRecentImages);

/// Mean of per-image features over the 10 most recent images, then
/// relu(FC) -> [32]. Requires at least one image.
tensor::Tensor encode_images(std::span<const TimedImage> images,
                             const ImageEncoderParams& params);

}  // namespace personaforge::encoders
