#pragma once

#include <filesystem>
#include <stdexcept>

#include "personaforge/tensor/tensor.hpp"

namespace personaforge::store {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes a [3,h,w] tensor with values in [-1,1] as an 8-bit RGB PNG.
/// Values outside the range are clamped.
void write_png(const std::filesystem::path& path, const tensor::Tensor& image);

/// Reads any 8-bit or 16-bit PNG (gray, RGB, with or without alpha) into a
/// [3,h,w] tensor with values in [-1,1].
tensor::Tensor read_png(const std::filesystem::path& path);

/// Encodes to an in-memory PNG byte string.
std::string encode_png(const tensor::Tensor& image);

/// Bilinear resampling of [c,h,w] to [c,height,width] (align-corners off).
tensor::Tensor resize_bilinear(const tensor::Tensor& image, std::size_t height, std::size_t width);

/// 2x2 box-filter downsampling; h and w must be even.
tensor::Tensor downsample2x(const tensor::Tensor& image);

/// Reads a PNG and resizes it to [3,size,size] when needed.
tensor::Tensor load_square_image(const std::filesystem::path& path, std::size_t size);

}  // namespace personaforge::store
