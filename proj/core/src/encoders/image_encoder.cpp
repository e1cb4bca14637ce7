#include "personaforge/encoders/image_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "personaforge/tensor/ops.hpp"

namespace personaforge::encoders {

using tensor::Tensor;

namespace {

std::vector<std::pair<std::size_t, std::size_t>> conv_layout() {
  std::vector<std::pair<std::size_t, std::size_t>> layout;  // (c_in, c_out)
  std::size_t c_in = kImageChannels;
  for (std::size_t c_out : kConvBlockChannels) {
    layout.emplace_back(c_in, c_out);
    layout.emplace_back(c_out, c_out);
    c_in = c_out;
  }
  return layout;
}

}  // namespace

ImageEncoderParams ImageEncoderParams::zeros() {
  ImageEncoderParams p;
  for (auto [c_in, c_out] : conv_layout()) {
    p.kernels.push_back(Tensor::zeros({c_out, c_in, 3, 3}, true));
    p.biases.push_back(Tensor::zeros({c_out}, true));
  }
  p.proj_weight = Tensor::zeros({kImageFeatureDim, kViewDim}, true);
  p.proj_bias = Tensor::zeros({kViewDim}, true);
  return p;
}

ImageEncoderParams ImageEncoderParams::init(std::mt19937_64& rng) {
  ImageEncoderParams p;
  for (auto [c_in, c_out] : conv_layout()) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(c_in * 9));
    p.kernels.push_back(Tensor::normal({c_out, c_in, 3, 3}, stddev, rng, true));
    p.biases.push_back(Tensor::zeros({c_out}, true));
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(kImageFeatureDim + kViewDim));
  p.proj_weight = Tensor::uniform({kImageFeatureDim, kViewDim}, -bound, bound, rng, true);
  p.proj_bias = Tensor::full({kViewDim}, 0.01, true);
  return p;
}

tensor::ParameterList ImageEncoderParams::trunk_parameters(const std::string& prefix) const {
  tensor::ParameterList out;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    out.push_back({prefix + ".conv" + std::to_string(i) + ".kernel", kernels[i]});
    out.push_back({prefix + ".conv" + std::to_string(i) + ".bias", biases[i]});
  }
  return out;
}

tensor::ParameterList ImageEncoderParams::parameters(const std::string& prefix) const {
  tensor::ParameterList out = trunk_parameters(prefix);
  out.push_back({prefix + ".proj_weight", proj_weight});
  out.push_back({prefix + ".proj_bias", proj_bias});
  return out;
}

ImageEncoderParams ImageEncoderParams::clone() const {
  ImageEncoderParams p;
  for (const auto& k : kernels) p.kernels.push_back(k.clone());
  for (const auto& b : biases) p.biases.push_back(b.clone());
  p.proj_weight = proj_weight.clone();
  p.proj_bias = proj_bias.clone();
  return p;
}

Tensor image_features(const Tensor& image, const ImageEncoderParams& params) {
  const tensor::Shape expected{kImageChannels, kImageSize, kImageSize};
  if (image.shape() != expected) {
    throw tensor::DimensionError("image encoder expects " + tensor::shape_string(expected) +
                                 ", got " + tensor::shape_string(image.shape()));
  }
  Tensor x = image;
  for (std::size_t i = 0; i < params.kernels.size(); ++i) {
    x = tensor::relu(tensor::conv2d(x, params.kernels[i], params.biases[i], 1, 1));
    if (i % 2 == 1) x = tensor::pool(x, tensor::PoolMode::kMax, 2, 2);
  }
  return tensor::spatial_mean(x);
}

std::vector<std::size_t> most_recent(std::span<const TimedImage> images, std::size_t limit) {
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return images[a].timestamp > images[b].timestamp;
  });
  if (order.size() > limit) order.resize(limit);
  return order;
}

Tensor encode_images(std::span<const TimedImage> images, const ImageEncoderParams& params) {
  if (images.empty()) throw std::invalid_argument("encode_images: no images");
  std::vector<Tensor> features;
  for (std::size_t idx : most_recent(images)) {
    features.push_back(image_features(images[idx].image, params));
  }
  const Tensor pooled = tensor::average(features);
  return tensor::relu(tensor::linear(pooled, params.proj_weight, params.proj_bias));
}

}  // namespace personaforge::encoders
