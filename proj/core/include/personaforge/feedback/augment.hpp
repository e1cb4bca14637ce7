#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "personaforge/tensor/tensor.hpp"

namespace personaforge::feedback {

enum class Augmentation { kHFlip, kCropPad4, kBrightness, kRotate };

inline constexpr int kCropPad = 4;
inline constexpr double kBrightnessRange = 0.10;
inline constexpr double kRotationDegrees = 10.0;

std::string_view augmentation_name(Augmentation a);
/// Accepts hflip, crop_pad4, brightness, rotate; throws std::invalid_argument.
Augmentation parse_augmentation(std::string_view name);

struct Recipe {
  Augmentation kind = Augmentation::kHFlip;
  std::uint64_t seed = 0;

  bool operator==(const Recipe&) const = default;
};

void to_json(nlohmann::json& j, const Recipe& r);
void from_json(const nlohmann::json& j, Recipe& r);

/// Label-preserving transform of a [3,h,w] image in [-1,1]; deterministic per
/// seed, same shape, values stay in [-1,1].
///   hflip: mirror columns.
///   crop_pad4: edge-pad by 4, crop at a seeded offset in [-4,4]^2.
///   brightness: scale intensity in [0,1] units by a seeded factor in [0.9,1.1].
///   rotate: seeded angle in [-10,10] degrees about the centre, bilinear,
///           edge-clamped.
tensor::Tensor augment(const tensor::Tensor& image, const Recipe& recipe);
tensor::Tensor augment(const tensor::Tensor& image, Augmentation kind, std::uint64_t seed);

struct CropOffset {
  int dx = 0;
  int dy = 0;
};
CropOffset crop_offset(std::uint64_t seed);
double brightness_factor(std::uint64_t seed);
double rotation_degrees(std::uint64_t seed);

/// n recipes cycling through the four kinds with seeds derived from `seed`.
std::vector<Recipe> recipes_for(std::size_t n, std::uint64_t seed);

}  // namespace personaforge::feedback
