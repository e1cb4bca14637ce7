#include "personaforge/gan/training.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "personaforge/tensor/ops.hpp"
#include "personaforge/tensor/optim.hpp"

namespace personaforge::gan {

namespace ts = tensor;
using tensor::Tensor;

namespace {

std::vector<Tensor> tensors_of(const ts::ParameterList& list) {
  std::vector<Tensor> out;
  out.reserve(list.size());
  for (const auto& p : list) out.push_back(p.tensor);
  return out;
}

void zero_grads(const std::vector<Tensor>& params) {
  for (Tensor t : params) t.zero_grad();
}

std::vector<std::vector<double>> take_grads(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (Tensor t : params) {
    out.push_back(t.grad());
    t.zero_grad();
  }
  return out;
}

void add_grads(const std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads,
               double factor) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* buffer = params[i].impl()->grad_buffer();
    for (std::size_t j = 0; j < grads[i].size(); ++j) buffer[j] += factor * grads[i][j];
  }
}

bool all_finite(const std::vector<Tensor>& params) {
  return std::all_of(params.begin(), params.end(), [](const Tensor& t) { return t.all_finite(); });
}

Tensor generated_image(const GeneratorParams& g, std::mt19937_64& rng, Tensor* latent = nullptr,
                       std::uint64_t* noise_seed = nullptr) {
  const Tensor z = Tensor::normal({kLatentDim}, 1.0, rng);
  const std::uint64_t seed = rng();
  if (latent) *latent = z;
  if (noise_seed) *noise_seed = seed;
  return synthesize(map_latent(z, g), g, seed);
}

std::string diagnostics(std::size_t step, const char* phase, double d_loss, double g_loss,
                        double lr) {
  std::ostringstream out;
  out << "gan training diverged at step " << step << " (" << phase << "): d_loss=" << d_loss
      << " g_loss=" << g_loss << " lr=" << lr;
  return out.str();
}

}  // namespace

void GanConfig::validate() const {
  if (steps == 0 || batch_size == 0) throw std::invalid_argument("gan config: steps and batch_size must be positive");
  if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("gan config: invalid optimizer settings");
  }
  if (r1_gamma < 0.0 || r1_interval == 0 || !(r1_step > 0.0)) {
    throw std::invalid_argument("gan config: invalid R1 settings");
  }
  if (checkpoint_every > 0 && checkpoint_path.empty()) {
    throw std::invalid_argument("gan config: checkpoint_every requires checkpoint_path");
  }
}

R1Result r1_penalty_gradient(const Tensor& image, const DiscriminatorParams& params,
                             double gamma, double step) {
  const std::vector<Tensor> d_params = tensors_of(params.parameters());
  const auto saved = take_grads(d_params);

  Tensor x = image.clone();
  x.set_requires_grad(true);
  {
    ts::Tape tape;
    tape.backward(discriminate(x, params));
  }
  const std::vector<double> g = x.grad();
  zero_grads(d_params);

  double norm_sq = 0.0;
  for (double v : g) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  R1Result result;
  result.penalty = 0.5 * gamma * norm_sq;
  result.gradients.resize(d_params.size());
  for (std::size_t i = 0; i < d_params.size(); ++i) {
    result.gradients[i].assign(d_params[i].numel(), 0.0);
  }
  if (norm > 0.0) {
    auto shifted_grads = [&](double sign) {
      Tensor shifted = image.clone();
      for (std::size_t i = 0; i < g.size(); ++i) shifted[i] += sign * step * g[i] / norm;
      ts::Tape tape;
      tape.backward(discriminate(shifted, params));
      return take_grads(d_params);
    };
    const auto plus = shifted_grads(1.0);
    const auto minus = shifted_grads(-1.0);
    const double factor = gamma * norm / (2.0 * step);
    for (std::size_t i = 0; i < d_params.size(); ++i) {
      for (std::size_t j = 0; j < plus[i].size(); ++j) {
        result.gradients[i][j] = factor * (plus[i][j] - minus[i][j]);
      }
    }
  }
  add_grads(d_params, saved, 1.0);
  return result;
}

GanTrainResult train_gan(std::span<const Tensor> images, const GanConfig& config) {
  return train_gan(images, config, GanModel::init(config.seed));
}

GanTrainResult train_gan(std::span<const Tensor> images, const GanConfig& config,
                         GanModel initial) {
  config.validate();
  if (images.size() < kMinTrainingImages) {
    throw GanTrainingError("gan training needs at least " + std::to_string(kMinTrainingImages) +
                           " images, got " + std::to_string(images.size()));
  }
  for (const Tensor& image : images) {
    if (image.shape() != ts::Shape{3, kOutputSize, kOutputSize}) {
      throw ts::DimensionError("train_gan: expected [3,32,32] images, got " +
                               ts::shape_string(image.shape()));
    }
  }

  GanTrainResult result{std::move(initial), {}};
  GanModel& model = result.model;
  const std::vector<Tensor> g_params = tensors_of(model.generator.parameters());
  const std::vector<Tensor> d_params = tensors_of(model.discriminator.parameters());
  const ts::AdamConfig adam_config{config.learning_rate, config.beta1, config.beta2, 1e-8};
  ts::Adam g_adam(g_params, adam_config);
  ts::Adam d_adam(d_params, adam_config);
  zero_grads(g_params);
  zero_grads(d_params);

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);

  for (std::size_t step = 1; step <= config.steps; ++step) {
    GanStepStats stats;
    stats.step = step;
    std::size_t correct = 0;

    std::vector<std::size_t> batch(config.batch_size);
    for (auto& index : batch) index = pick(rng);
    for (std::size_t index : batch) {
      ts::Tape tape;
      const Tensor logit = discriminate(images[index], model.discriminator);
      if (logit[0] > 0.0) ++correct;
      const Tensor loss = ts::sum(ts::softplus(ts::scale(logit, -1.0)));
      stats.d_loss += loss.item() * inv_batch;
      tape.backward(loss);
    }
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      Tensor fake;
      {
        ts::NoGradGuard no_grad;
        fake = generated_image(model.generator, rng);
      }
      ts::Tape tape;
      const Tensor logit = discriminate(fake, model.discriminator);
      if (logit[0] < 0.0) ++correct;
      const Tensor loss = ts::sum(ts::softplus(logit));
      stats.d_loss += loss.item() * inv_batch;
      tape.backward(loss);
    }
    stats.d_accuracy = static_cast<double>(correct) / static_cast<double>(2 * config.batch_size);
    if (config.r1_gamma > 0.0 && step % config.r1_interval == 0) {
      for (std::size_t index : batch) {
        const R1Result r1 = r1_penalty_gradient(images[index], model.discriminator,
                                                config.r1_gamma, config.r1_step);
        stats.r1_penalty += r1.penalty * inv_batch;
        add_grads(d_params, r1.gradients, static_cast<double>(config.r1_interval));
      }
    }
    if (!std::isfinite(stats.d_loss) || !std::isfinite(stats.r1_penalty)) {
      throw GanTrainingError(diagnostics(step, "discriminator", stats.d_loss, stats.g_loss,
                                         config.learning_rate));
    }
    d_adam.step(inv_batch);

    if (config.train_generator) {
      for (std::size_t b = 0; b < config.batch_size; ++b) {
        ts::Tape tape;
        const Tensor fake = generated_image(model.generator, rng);
        const Tensor loss = ts::sum(ts::softplus(ts::scale(discriminate(fake, model.discriminator), -1.0)));
        stats.g_loss += loss.item() * inv_batch;
        tape.backward(loss);
      }
      zero_grads(d_params);
      if (!std::isfinite(stats.g_loss)) {
        throw GanTrainingError(diagnostics(step, "generator", stats.d_loss, stats.g_loss,
                                           config.learning_rate));
      }
      g_adam.step(inv_batch);
    }
    if (!all_finite(g_params) || !all_finite(d_params)) {
      throw GanTrainingError(diagnostics(step, "non-finite parameters", stats.d_loss,
                                         stats.g_loss, config.learning_rate));
    }

    result.history.push_back(stats);
    if (config.on_step) config.on_step(stats);
    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
      model.save(config.checkpoint_path, {{"step", step}});
    }
  }

  fit_style_projection(model, config.style_samples, config.seed ^ 0x5157u);
  if (config.checkpoint_every > 0) model.save(config.checkpoint_path, {{"step", config.steps}});
  return result;
}

void fit_style_projection(GanModel& model, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw std::invalid_argument("fit_style_projection: samples must be positive");
  ts::NoGradGuard no_grad;
  constexpr std::size_t f = encoders::kImageFeatureDim;
  Eigen::MatrixXd features(samples, f + 1);
  Eigen::MatrixXd targets(samples, kLatentDim);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < samples; ++i) {
    const Tensor z = Tensor::normal({kLatentDim}, 1.0, rng);
    const Tensor w = map_latent(z, model.generator);
    const Tensor image = synthesize(w, model.generator, rng());
    const Tensor feats = style_features(ts::upsample2x(image), model.style);
    for (std::size_t j = 0; j < f; ++j) features(i, j) = feats[j];
    features(i, f) = 1.0;
    for (std::size_t j = 0; j < kLatentDim; ++j) targets(i, j) = w[j];
  }
  Eigen::MatrixXd gram = features.transpose() * features;
  gram.diagonal().array() += 1e-2 * gram.trace() / static_cast<double>(gram.rows());
  const Eigen::MatrixXd solution = gram.ldlt().solve(features.transpose() * targets);
  for (std::size_t j = 0; j < f; ++j)
    for (std::size_t k = 0; k < kLatentDim; ++k) model.style.weight[j * kLatentDim + k] = solution(j, k);
  for (std::size_t k = 0; k < kLatentDim; ++k) model.style.bias[k] = solution(f, k);
}

std::vector<Tensor> shapes_corpus(std::size_t count, std::uint64_t seed) {
  static constexpr std::array<std::array<double, 3>, 4> kColors = {{
      {0.9, -0.6, -0.6}, {-0.5, 0.8, -0.4}, {-0.6, -0.4, 0.9}, {0.9, 0.8, -0.7}}};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> kind(0, 2), color(0, 3), size(6, 11), centre(11, 20);
  std::uniform_real_distribution<double> tint(-0.6, -0.2);
  std::vector<Tensor> out;
  out.reserve(count);
  constexpr std::size_t n = kOutputSize;
  for (std::size_t c = 0; c < count; ++c) {
    Tensor image({3, n, n});
    const double background = tint(rng);
    const int shape = kind(rng), radius = size(rng), cx = centre(rng), cy = centre(rng);
    const auto& fill = kColors[static_cast<std::size_t>(color(rng))];
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        const int dx = static_cast<int>(x) - cx, dy = static_cast<int>(y) - cy;
        bool inside = false;
        if (shape == 0) inside = dx * dx + dy * dy <= radius * radius;
        if (shape == 1) inside = std::abs(dx) <= radius * 3 / 4 && std::abs(dy) <= radius * 3 / 4;
        if (shape == 2) inside = dy <= radius / 2 && dy >= -radius && std::abs(dx) * 2 <= dy + radius;
        for (std::size_t ch = 0; ch < 3; ++ch) {
          image[(ch * n + y) * n + x] = inside ? fill[ch] : background;
        }
      }
    }
    out.push_back(std::move(image));
  }
  return out;
}

std::vector<Tensor> two_color_corpus(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::bernoulli_distribution vertical(0.5);
  std::vector<Tensor> out;
  out.reserve(count);
  constexpr std::size_t n = kOutputSize;
  for (std::size_t c = 0; c < count; ++c) {
    Tensor image({3, n, n});
    const bool split_vertical = vertical(rng);
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        const bool first = split_vertical ? x < n / 2 : y < n / 2;
        const double rgb[3] = {first ? 0.8 : -0.8, -0.2, first ? -0.8 : 0.8};
        for (std::size_t ch = 0; ch < 3; ++ch) {
          image[(ch * n + y) * n + x] = std::clamp(rgb[ch] + noise(rng), -1.0, 1.0);
        }
      }
    }
    out.push_back(std::move(image));
  }
  return out;
}

std::array<double, 3> channel_means(std::span<const Tensor> images) {
  std::array<double, 3> sums{0.0, 0.0, 0.0};
  std::size_t pixels = 0;
  for (const Tensor& image : images) {
    const std::size_t plane = image.dim(1) * image.dim(2);
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t i = 0; i < plane; ++i) sums[ch] += image[ch * plane + i];
    pixels += plane;
  }
  for (double& s : sums) s /= static_cast<double>(std::max<std::size_t>(pixels, 1));
  return sums;
}

}  // namespace personaforge::gan
