#include "personaforge/feedback/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace personaforge::feedback {

using tensor::Tensor;

namespace {

constexpr Augmentation kCycle[] = {Augmentation::kHFlip, Augmentation::kCropPad4,
                                   Augmentation::kBrightness, Augmentation::kRotate};

void check_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw tensor::DimensionError("augment: expected [3,h,w], got " +
                                 tensor::shape_string(image.shape()));
  }
}

double sample_clamped(const Tensor& image, std::size_t ch, double y, double x) {
  const std::size_t h = image.dim(1), w = image.dim(2);
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(y)), x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
  auto at = [&](std::size_t yy, std::size_t xx) { return image[(ch * h + yy) * w + xx]; };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
         fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

}  // namespace

std::string_view augmentation_name(Augmentation a) {
  switch (a) {
    case Augmentation::kHFlip: return "hflip";
    case Augmentation::kCropPad4: return "crop_pad4";
    case Augmentation::kBrightness: return "brightness";
    case Augmentation::kRotate: return "rotate";
  }
  return "unknown";
}

Augmentation parse_augmentation(std::string_view name) {
  for (Augmentation a : kCycle) {
    if (augmentation_name(a) == name) return a;
  }
  throw std::invalid_argument("unknown augmentation recipe: " + std::string(name));
}

void to_json(nlohmann::json& j, const Recipe& r) {
  j = {{"kind", augmentation_name(r.kind)}, {"seed", r.seed}};
}

void from_json(const nlohmann::json& j, Recipe& r) {
  r.kind = parse_augmentation(j.at("kind").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
}

CropOffset crop_offset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> offset(-kCropPad, kCropPad);
  const int dx = offset(rng);
  return {dx, offset(rng)};
}

double brightness_factor(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return std::uniform_real_distribution<double>(1.0 - kBrightnessRange, 1.0 + kBrightnessRange)(rng);
}

double rotation_degrees(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return std::uniform_real_distribution<double>(-kRotationDegrees, kRotationDegrees)(rng);
}

Tensor augment(const Tensor& image, Augmentation kind, std::uint64_t seed) {
  check_image(image);
  const std::size_t h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  switch (kind) {
    case Augmentation::kHFlip:
      for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) out[(ch * h + y) * w + x] = image[(ch * h + y) * w + (w - 1 - x)];
      break;
    case Augmentation::kCropPad4: {
      const CropOffset o = crop_offset(seed);
      for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            const long sy = std::clamp<long>(static_cast<long>(y) + o.dy, 0, static_cast<long>(h) - 1);
            const long sx = std::clamp<long>(static_cast<long>(x) + o.dx, 0, static_cast<long>(w) - 1);
            out[(ch * h + y) * w + x] = image[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
          }
      break;
    }
    case Augmentation::kBrightness: {
      const double factor = brightness_factor(seed);
      for (std::size_t i = 0; i < image.numel(); ++i) {
        const double level = std::clamp((image[i] + 1.0) * 0.5 * factor, 0.0, 1.0);
        out[i] = level * 2.0 - 1.0;
      }
      break;
    }
    case Augmentation::kRotate: {
      const double theta = rotation_degrees(seed) * std::numbers::pi / 180.0;
      const double c = std::cos(theta), s = std::sin(theta);
      const double cy = (static_cast<double>(h) - 1) / 2, cx = (static_cast<double>(w) - 1) / 2;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
          const double sy = cy + c * dy - s * dx, sx = cx + s * dy + c * dx;
          for (std::size_t ch = 0; ch < 3; ++ch) {
            out[(ch * h + y) * w + x] = std::clamp(sample_clamped(image, ch, sy, sx), -1.0, 1.0);
          }
        }
      break;
    }
  }
  return out;
}

Tensor augment(const Tensor& image, const Recipe& recipe) {
  return augment(image, recipe.kind, recipe.seed);
}

std::vector<Recipe> recipes_for(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t start = static_cast<std::size_t>(rng() % 4);
  std::vector<Recipe> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({kCycle[(start + i) % 4], rng()});
  return out;
}

}  // namespace personaforge::feedback
