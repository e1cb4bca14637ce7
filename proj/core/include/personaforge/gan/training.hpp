#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "personaforge/gan/generator.hpp"

namespace personaforge::gan {

class GanTrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMinTrainingImages = 32;

struct GanStepStats {
  std::size_t step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double r1_penalty = 0.0;  // 0 on steps without the penalty
  double d_accuracy = 0.0;  // real-vs-fake accuracy of D on this batch
};

struct GanConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 8;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.99;
  double r1_gamma = 1.0;
  std::size_t r1_interval = 16;
  double r1_step = 1e-3;
  bool train_generator = true;
  std::uint64_t seed = 11;
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_path;
  std::size_t style_samples = 384;
  std::function<void(const GanStepStats&)> on_step;

  void validate() const;
};

struct GanTrainResult {
  GanModel model;
  std::vector<GanStepStats> history;
};

/// Alternating non-saturating updates (one D step, then one G step) on
/// [3,32,32] images in [-1,1], followed by fitting the style projection.
GanTrainResult train_gan(std::span<const tensor::Tensor> images, const GanConfig& config);
GanTrainResult train_gan(std::span<const tensor::Tensor> images, const GanConfig& config,
                         GanModel initial);

/// Gradient of (gamma / 2) * |d D(x) / dx|^2 with respect to the
/// discriminator parameters, one vector per parameter in parameters() order.
/// Uses the directional difference of parameter gradients along d D / dx.
struct R1Result {
  double penalty = 0.0;
  std::vector<std::vector<double>> gradients;
};
R1Result r1_penalty_gradient(const tensor::Tensor& image, const DiscriminatorParams& params,
                             double gamma, double step = 1e-3);

/// Fits StyleEncoder::weight/bias by least squares so that style_of(image
/// of w) recovers w for w = map_latent(z) over sampled latents.
void fit_style_projection(GanModel& model, std::size_t samples, std::uint64_t seed);

/// Seeded 32x32 corpus of filled shapes (circle, square, triangle) in a few
/// colours over tinted backgrounds.
std::vector<tensor::Tensor> shapes_corpus(std::size_t count, std::uint64_t seed);
/// Seeded 32x32 corpus of two-colour halves with small pixel noise.
std::vector<tensor::Tensor> two_color_corpus(std::size_t count, std::uint64_t seed);

/// Per-channel means of [3,h,w] images.
std::array<double, 3> channel_means(std::span<const tensor::Tensor> images);

}  // namespace personaforge::gan
