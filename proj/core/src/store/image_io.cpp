#include "personaforge/store/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <vector>

namespace personaforge::store {

namespace {

using tensor::Tensor;

std::vector<unsigned char> to_rgb8(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ImageError("png: expected [3,h,w] image, got " + tensor::shape_string(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<unsigned char> rgb(h * w * 3);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < h * w; ++i) {
      const double v = std::clamp(image[c * h * w + i], -1.0, 1.0);
      rgb[i * 3 + c] = static_cast<unsigned char>(std::lround((v + 1.0) * 127.5));
    }
  return rgb;
}

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

void write_rows(png_structp png, png_infop info, const std::vector<unsigned char>& rgb,
                std::size_t h, std::size_t w) {
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + y * w * 3));
  }
  png_write_end(png, info);
}

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), length);
}

void no_flush(png_structp) {}

}  // namespace

void write_png(const std::filesystem::path& path, const Tensor& image) {
  const std::string bytes = encode_png(image);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ImageError("png: cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ImageError("png: short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string encode_png(const Tensor& image) {
  const std::vector<unsigned char> rgb = to_rgb8(image);
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::string out;
  PngWriter writer;
  writer.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!writer.png) throw ImageError("png: cannot create writer");
  writer.info = png_create_info_struct(writer.png);
  if (!writer.info) throw ImageError("png: cannot create info");
  if (setjmp(png_jmpbuf(writer.png))) throw ImageError("png: encoding failed");
  png_set_write_fn(writer.png, &out, append_bytes, no_flush);
  write_rows(writer.png, writer.info, rgb, h, w);
  return out;
}

Tensor read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw ImageError("png: cannot read " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> rgb(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw ImageError("png: cannot decode " + path.string() + ": " + msg);
  }
  const std::size_t h = img.height, w = img.width;
  std::vector<double> values(3 * h * w);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < h * w; ++i) {
      values[c * h * w + i] = static_cast<double>(rgb[i * 3 + c]) / 127.5 - 1.0;
    }
  return Tensor({3, h, w}, std::move(values));
}

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3) {
    throw ImageError("resize: expected [c,h,w], got " + tensor::shape_string(image.shape()));
  }
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h == height && w == width) return image.clone();
  std::vector<double> out(c * height * width);
  const double sy = static_cast<double>(h) / static_cast<double>(height);
  const double sx = static_cast<double>(w) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* p = image.data().data() + ch * h * w;
        const double top = p[y0 * w + x0] * (1 - tx) + p[y0 * w + x1] * tx;
        const double bottom = p[y1 * w + x0] * (1 - tx) + p[y1 * w + x1] * tx;
        out[(ch * height + y) * width + x] = top * (1 - ty) + bottom * ty;
      }
    }
  }
  return Tensor({c, height, width}, std::move(out));
}

Tensor downsample2x(const Tensor& image) {
  if (image.rank() != 3 || image.dim(1) % 2 || image.dim(2) % 2) {
    throw ImageError("downsample2x: expected [c,h,w] with even h and w, got " +
                     tensor::shape_string(image.shape()));
  }
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<double> out(c * (h / 2) * (w / 2));
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h / 2; ++y)
      for (std::size_t x = 0; x < w / 2; ++x) {
        const double* p = image.data().data() + (ch * h + 2 * y) * w + 2 * x;
        out[(ch * (h / 2) + y) * (w / 2) + x] = 0.25 * (p[0] + p[1] + p[w] + p[w + 1]);
      }
  return Tensor({c, h / 2, w / 2}, std::move(out));
}

Tensor load_square_image(const std::filesystem::path& path, std::size_t size) {
  return resize_bilinear(read_png(path), size, size);
}

}  // namespace personaforge::store
