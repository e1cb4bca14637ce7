#include "personaforge/tensor/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <utility>

namespace personaforge::tensor {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

void record(const Tensor& out, Tape::BackwardFn fn) {
  if (out.requires_grad()) Tape::active()->record(out.impl(), std::move(fn));
}

bool wants(const ImplPtr& impl) { return impl->requires_grad; }

// Row-major C[m,n] = op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, double beta) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (beta == 0.0) std::fill(c, c + m * n, 0.0);
    return;
  }
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstMap = Eigen::Map<const Matrix>;
  const auto rows_a = static_cast<Eigen::Index>(trans_a ? k : m);
  const auto cols_a = static_cast<Eigen::Index>(trans_a ? m : k);
  const auto rows_b = static_cast<Eigen::Index>(trans_b ? n : k);
  const auto cols_b = static_cast<Eigen::Index>(trans_b ? k : n);
  ConstMap ma(a, rows_a, cols_a);
  ConstMap mb(b, rows_b, cols_b);
  Eigen::Map<Matrix> mc(c, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  if (beta == 0.0) mc.setZero();
  else if (beta != 1.0) mc *= beta;
  if (trans_a && trans_b) mc.noalias() += ma.transpose() * mb.transpose();
  else if (trans_a) mc.noalias() += ma.transpose() * mb;
  else if (trans_b) mc.noalias() += ma * mb.transpose();
  else mc.noalias() += ma * mb;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got shape " +
                         shape_string(t.shape()));
  }
}

// Elementwise unary op with derivative expressed through input and output.
template <typename Forward, typename Derivative>
Tensor unary(const Tensor& a, Forward forward, Derivative derivative) {
  std::vector<double> values(a.numel());
  const auto in = a.data();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = forward(in[i]);
  Tensor out = make_result(a.shape(), std::move(values), {a});
  record(out, [ai = a.impl(), oi = out.impl(), derivative] {
    if (!wants(ai)) return;
    double* g = ai->grad_buffer();
    for (std::size_t i = 0; i < ai->data.size(); ++i) {
      g[i] += oi->grad[i] * derivative(ai->data[i], oi->data[i]);
    }
  });
  return out;
}

// im2col for one [c,h,w] image: rows are (c, ky, kx), columns output pixels.
void im2col(const double* input, std::size_t channels, std::size_t height,
            std::size_t width, std::size_t kh, std::size_t kw, std::size_t stride,
            std::size_t pad, std::size_t out_h, std::size_t out_w, double* col) {
  const std::size_t out_px = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        double* dst = col + ((c * kh + ky) * kw + kx) * out_px;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(pad);
          double* row = dst + oy * out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) {
            std::fill(row, row + out_w, 0.0);
            continue;
          }
          const double* src = input + (c * height + static_cast<std::size_t>(iy)) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                      static_cast<std::ptrdiff_t>(pad);
            row[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width))
                          ? 0.0
                          : src[ix];
          }
        }
      }
    }
  }
}

void col2im(const double* col, std::size_t channels, std::size_t height,
            std::size_t width, std::size_t kh, std::size_t kw, std::size_t stride,
            std::size_t pad, std::size_t out_h, std::size_t out_w, double* image) {
  const std::size_t out_px = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const double* src = col + ((c * kh + ky) * kw + kx) * out_px;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
          double* dst = image + (c * height + static_cast<std::size_t>(iy)) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                      static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
            dst[ix] += src[oy * out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ: " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()));
  }
  std::vector<double> values(m * n, 0.0);
  gemm(false, false, m, n, k, a.data().data(), b.data().data(), values.data(), 0.0);
  Tensor out = make_result({m, n}, std::move(values), {a, b});
  record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), m, n, k] {
    if (wants(ai)) {
      gemm(false, true, m, k, n, oi->grad.data(), bi->data.data(), ai->grad_buffer(), 1.0);
    }
    if (wants(bi)) {
      gemm(true, false, k, n, m, ai->data.data(), oi->grad.data(), bi->grad_buffer(), 1.0);
    }
  });
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "linear");
  const std::size_t n = weight.dim(0), m = weight.dim(1);
  if (bias.numel() != m) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) +
                         " does not match weight " + shape_string(weight.shape()));
  }
  std::size_t rows = 0;
  Shape out_shape;
  if (x.rank() == 1 && x.dim(0) == n) {
    rows = 1;
    out_shape = {m};
  } else if (x.rank() == 2 && x.dim(1) == n) {
    rows = x.dim(0);
    out_shape = {rows, m};
  } else {
    throw DimensionError("linear: input " + shape_string(x.shape()) +
                         " incompatible with weight " + shape_string(weight.shape()));
  }
  std::vector<double> values(rows * m);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(bias.data().begin(), bias.data().end(), values.begin() + r * m);
  }
  gemm(false, false, rows, m, n, x.data().data(), weight.data().data(), values.data(), 1.0);
  Tensor out = make_result(std::move(out_shape), std::move(values), {x, weight, bias});
  record(out, [xi = x.impl(), wi = weight.impl(), bi = bias.impl(), oi = out.impl(),
               rows, n, m] {
    const double* g = oi->grad.data();
    if (wants(xi)) gemm(false, true, rows, n, m, g, wi->data.data(), xi->grad_buffer(), 1.0);
    if (wants(wi)) gemm(true, false, n, m, rows, xi->data.data(), g, wi->grad_buffer(), 1.0);
    if (wants(bi)) {
      double* gb = bi->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < m; ++j) gb[j] += g[r * m + j];
      }
    }
  });
  return out;
}

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  const bool a_scalar = a.numel() == 1 && b.numel() != 1;
  const bool b_scalar = b.numel() == 1 && a.numel() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    throw DimensionError("elementwise: shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
  const Shape& shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ad[a_scalar ? 0 : i];
    const double y = bd[b_scalar ? 0 : i];
    switch (op) {
      case BinaryOp::kAdd: values[i] = x + y; break;
      case BinaryOp::kSub: values[i] = x - y; break;
      case BinaryOp::kMul: values[i] = x * y; break;
    }
  }
  Tensor out = make_result(shape, std::move(values), {a, b});
  record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), op, a_scalar, b_scalar, n] {
    const double* g = oi->grad.data();
    if (wants(ai)) {
      double* ga = ai->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        double d = g[i];
        if (op == BinaryOp::kMul) d *= bi->data[b_scalar ? 0 : i];
        ga[a_scalar ? 0 : i] += d;
      }
    }
    if (wants(bi)) {
      double* gb = bi->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        double d = g[i];
        if (op == BinaryOp::kSub) d = -d;
        if (op == BinaryOp::kMul) d *= ai->data[a_scalar ? 0 : i];
        gb[b_scalar ? 0 : i] += d;
      }
    }
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kMul, a, b); }

Tensor scale(const Tensor& a, double factor) { return affine(a, factor, 0.0); }

Tensor affine(const Tensor& a, double factor, double offset) {
  return unary(
      a, [factor, offset](double x) { return factor * x + offset; },
      [factor](double, double) { return factor; });
}

Tensor activation(Activation op, const Tensor& a) {
  switch (op) {
    case Activation::kSigmoid:
      return unary(
          a,
          [](double x) {
            if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
          },
          [](double, double y) { return y * (1.0 - y); });
    case Activation::kTanh:
      return unary(
          a, [](double x) { return std::tanh(x); },
          [](double, double y) { return 1.0 - y * y; });
    case Activation::kRelu:
      return unary(
          a, [](double x) { return x > 0.0 ? x : 0.0; },
          [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
  }
  throw std::invalid_argument("activation: unknown op");
}

Tensor sigmoid(const Tensor& a) { return activation(Activation::kSigmoid, a); }
Tensor tanh(const Tensor& a) { return activation(Activation::kTanh, a); }
Tensor relu(const Tensor& a) { return activation(Activation::kRelu, a); }

Tensor leaky_relu(const Tensor& a, double negative_slope) {
  return unary(
      a, [negative_slope](double x) { return x > 0.0 ? x : negative_slope * x; },
      [negative_slope](double x, double) { return x > 0.0 ? 1.0 : negative_slope; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a,
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Tensor log(const Tensor& a) {
  for (double v : a.data()) {
    if (!(v > 0.0)) throw NumericError("log: non-positive argument");
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) +
                         " out of range for " + shape_string(a.shape()));
  }
  const Shape& shape = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t extent = shape[axis];
  const auto in = a.data();
  std::vector<double> values(a.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t base = o * extent * inner + j;
      double peak = -INFINITY;
      for (std::size_t e = 0; e < extent; ++e) peak = std::max(peak, in[base + e * inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < extent; ++e) {
        values[base + e * inner] = std::exp(in[base + e * inner] - peak);
        total += values[base + e * inner];
      }
      for (std::size_t e = 0; e < extent; ++e) values[base + e * inner] /= total;
    }
  }
  Tensor out = make_result(shape, std::move(values), {a});
  record(out, [ai = a.impl(), oi = out.impl(), outer, inner, extent] {
    if (!wants(ai)) return;
    double* g = ai->grad_buffer();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t base = o * extent * inner + j;
        double dot = 0.0;
        for (std::size_t e = 0; e < extent; ++e) {
          dot += oi->grad[base + e * inner] * oi->data[base + e * inner];
        }
        for (std::size_t e = 0; e < extent; ++e) {
          const std::size_t idx = base + e * inner;
          g[idx] += oi->data[idx] * (oi->grad[idx] - dot);
        }
      }
    }
  });
  return out;
}

Tensor sum(const Tensor& a) {
  const auto in = a.data();
  Tensor out = make_result({1}, {std::accumulate(in.begin(), in.end(), 0.0)}, {a});
  record(out, [ai = a.impl(), oi = out.impl()] {
    if (!wants(ai)) return;
    double* g = ai->grad_buffer();
    for (std::size_t i = 0; i < ai->data.size(); ++i) g[i] += oi->grad[0];
  });
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor average(std::span<const Tensor> items) {
  if (items.empty()) throw DimensionError("average: no operands");
  const Shape& shape = items.front().shape();
  for (const Tensor& t : items) {
    if (t.shape() != shape) {
      throw DimensionError("average: shape mismatch " + shape_string(shape) + " vs " +
                           shape_string(t.shape()));
    }
  }
  const double weight = 1.0 / static_cast<double>(items.size());
  std::vector<double> values(shape_numel(shape), 0.0);
  bool any_grad = false;
  for (const Tensor& t : items) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += t[i];
    any_grad = any_grad || t.requires_grad();
  }
  for (double& v : values) v *= weight;
  Tensor out = make_result(shape, std::move(values), {});
  if (any_grad && recording_enabled()) {
    out.set_requires_grad(true);
    std::vector<ImplPtr> inputs;
    for (const Tensor& t : items) inputs.push_back(t.impl());
    record(out, [inputs = std::move(inputs), oi = out.impl(), weight] {
      for (const auto& in : inputs) {
        if (!wants(in)) continue;
        double* g = in->grad_buffer();
        for (std::size_t i = 0; i < in->data.size(); ++i) g[i] += weight * oi->grad[i];
      }
    });
  }
  return out;
}

Tensor concat(std::span<const Tensor> items) {
  std::vector<double> values;
  bool any_grad = false;
  for (const Tensor& t : items) {
    values.insert(values.end(), t.data().begin(), t.data().end());
    any_grad = any_grad || t.requires_grad();
  }
  const std::size_t total = values.size();
  Tensor out = make_result({total}, std::move(values), {});
  if (any_grad && recording_enabled()) {
    out.set_requires_grad(true);
    std::vector<ImplPtr> inputs;
    for (const Tensor& t : items) inputs.push_back(t.impl());
    record(out, [inputs = std::move(inputs), oi = out.impl()] {
      std::size_t offset = 0;
      for (const auto& in : inputs) {
        const std::size_t n = in->data.size();
        if (wants(in)) {
          double* g = in->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) g[i] += oi->grad[offset + i];
        }
        offset += n;
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                         shape_string(shape));
  }
  Tensor out = make_result(std::move(shape),
                           std::vector<double>(a.data().begin(), a.data().end()), {a});
  record(out, [ai = a.impl(), oi = out.impl()] {
    if (!wants(ai)) return;
    double* g = ai->grad_buffer();
    for (std::size_t i = 0; i < ai->data.size(); ++i) g[i] += oi->grad[i];
  });
  return out;
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank(table, 2, "embedding_lookup");
  const std::size_t vocab = table.dim(0), width = table.dim(1);
  std::vector<double> values(ids.size() * width);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= vocab) {
      throw DimensionError("embedding_lookup: id " + std::to_string(ids[t]) +
                           " out of range for vocabulary of " + std::to_string(vocab));
    }
    const auto row = table.data().subspan(ids[t] * width, width);
    std::copy(row.begin(), row.end(), values.begin() + t * width);
  }
  Tensor out = make_result({ids.size(), width}, std::move(values), {table});
  record(out, [ti = table.impl(), oi = out.impl(),
               id_copy = std::vector<std::size_t>(ids.begin(), ids.end()), width] {
    if (!wants(ti)) return;
    double* g = ti->grad_buffer();
    for (std::size_t t = 0; t < id_copy.size(); ++t) {
      for (std::size_t j = 0; j < width; ++j) g[id_copy[t] * width + j] += oi->grad[t * width + j];
    }
  });
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t pad) {
  require_rank(input, 3, "conv2d");
  require_rank(kernel, 4, "conv2d");
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t c_out = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != c_in) {
    throw DimensionError("conv2d: kernel " + shape_string(kernel.shape()) +
                         " expects different channels than input " +
                         shape_string(input.shape()));
  }
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  const std::size_t ph = h + 2 * pad, pw = w + 2 * pad;
  if (kh > ph || kw > pw || (ph - kh) % stride != 0 || (pw - kw) % stride != 0) {
    throw DimensionError("conv2d: kernel " + shape_string(kernel.shape()) + " with stride " +
                         std::to_string(stride) + " and pad " + std::to_string(pad) +
                         " does not tile input " + shape_string(input.shape()));
  }
  const bool has_bias = bias.numel() != 0;
  if (has_bias && bias.numel() != c_out) {
    throw DimensionError("conv2d: bias " + shape_string(bias.shape()) + " for " +
                         std::to_string(c_out) + " output channels");
  }
  const std::size_t out_h = (ph - kh) / stride + 1, out_w = (pw - kw) / stride + 1;
  const std::size_t out_px = out_h * out_w, patch = c_in * kh * kw;

  auto col = std::make_shared<std::vector<double>>(patch * out_px);
  im2col(input.data().data(), c_in, h, w, kh, kw, stride, pad, out_h, out_w, col->data());
  std::vector<double> values(c_out * out_px, 0.0);
  if (has_bias) {
    for (std::size_t co = 0; co < c_out; ++co) {
      std::fill_n(values.begin() + co * out_px, out_px, bias[co]);
    }
  }
  gemm(false, false, c_out, out_px, patch, kernel.data().data(), col->data(), values.data(),
       has_bias ? 1.0 : 0.0);

  Tensor out = make_result({c_out, out_h, out_w}, std::move(values), {input, kernel, bias});
  record(out, [ii = input.impl(), ki = kernel.impl(), bi = bias.impl(), oi = out.impl(), col,
               has_bias, c_in, h, w, c_out, kh, kw, stride, pad, out_h, out_w, out_px, patch] {
    const double* g = oi->grad.data();
    if (wants(ki)) gemm(false, true, c_out, patch, out_px, g, col->data(), ki->grad_buffer(), 1.0);
    if (has_bias && wants(bi)) {
      double* gb = bi->grad_buffer();
      for (std::size_t co = 0; co < c_out; ++co) {
        double acc = 0.0;
        for (std::size_t p = 0; p < out_px; ++p) acc += g[co * out_px + p];
        gb[co] += acc;
      }
    }
    if (wants(ii)) {
      std::vector<double> dcol(patch * out_px);
      gemm(true, false, patch, out_px, c_out, ki->data.data(), g, dcol.data(), 0.0);
      col2im(dcol.data(), c_in, h, w, kh, kw, stride, pad, out_h, out_w, ii->grad_buffer());
    }
  });
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t pad) {
  return conv2d(input, kernel, Tensor(), stride, pad);
}

Tensor pool(const Tensor& input, PoolMode mode, std::size_t window, std::size_t stride) {
  require_rank(input, 3, "pool");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (window == 0 || stride == 0 || window > h || window > w ||
      (h - window) % stride != 0 || (w - window) % stride != 0) {
    throw DimensionError("pool: window " + std::to_string(window) + " stride " +
                         std::to_string(stride) + " does not tile " +
                         shape_string(input.shape()));
  }
  const std::size_t out_h = (h - window) / stride + 1, out_w = (w - window) / stride + 1;
  const auto in = input.data();
  std::vector<double> values(c * out_h * out_w);
  std::vector<std::size_t> argmax;
  if (mode == PoolMode::kMax) argmax.resize(values.size());
  const double inv_area = 1.0 / static_cast<double>(window * window);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const std::size_t o = (ch * out_h + oy) * out_w + ox;
        double best = -INFINITY, total = 0.0;
        std::size_t best_idx = 0;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx = (ch * h + oy * stride + dy) * w + ox * stride + dx;
            total += in[idx];
            if (in[idx] > best) {
              best = in[idx];
              best_idx = idx;
            }
          }
        }
        if (mode == PoolMode::kMax) {
          values[o] = best;
          argmax[o] = best_idx;
        } else {
          values[o] = total * inv_area;
        }
      }
    }
  }
  Tensor out = make_result({c, out_h, out_w}, std::move(values), {input});
  record(out, [ii = input.impl(), oi = out.impl(), argmax = std::move(argmax), mode, c, h, w,
               out_h, out_w, window, stride, inv_area] {
    if (!wants(ii)) return;
    double* g = ii->grad_buffer();
    if (mode == PoolMode::kMax) {
      for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += oi->grad[o];
      return;
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const double d = oi->grad[(ch * out_h + oy) * out_w + ox] * inv_area;
          for (std::size_t dy = 0; dy < window; ++dy) {
            for (std::size_t dx = 0; dx < window; ++dx) {
              g[(ch * h + oy * stride + dy) * w + ox * stride + dx] += d;
            }
          }
        }
      }
    }
  });
  return out;
}

Tensor spatial_mean(const Tensor& input) {
  require_rank(input, 3, "spatial_mean");
  const std::size_t c = input.dim(0), plane = input.dim(1) * input.dim(2);
  if (plane == 0) throw DimensionError("spatial_mean: empty plane");
  std::vector<double> values(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const auto p = input.data().subspan(ch * plane, plane);
    values[ch] = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(plane);
  }
  Tensor out = make_result({c}, std::move(values), {input});
  record(out, [ii = input.impl(), oi = out.impl(), c, plane] {
    if (!wants(ii)) return;
    double* g = ii->grad_buffer();
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double d = oi->grad[ch] / static_cast<double>(plane);
      for (std::size_t p = 0; p < plane; ++p) g[ch * plane + p] += d;
    }
  });
  return out;
}

Tensor upsample2x(const Tensor& input) {
  require_rank(input, 3, "upsample2x");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = 2 * h, ow = 2 * w;
  std::vector<double> values(c * oh * ow);
  const auto in = input.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        values[(ch * oh + y) * ow + x] = in[(ch * h + y / 2) * w + x / 2];
      }
    }
  }
  Tensor out = make_result({c, oh, ow}, std::move(values), {input});
  record(out, [ii = input.impl(), oi = out.impl(), c, h, w, oh, ow] {
    if (!wants(ii)) return;
    double* g = ii->grad_buffer();
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          g[(ch * h + y / 2) * w + x / 2] += oi->grad[(ch * oh + y) * ow + x];
        }
      }
    }
  });
  return out;
}

Tensor channel_affine(const Tensor& input, const Tensor& scale, const Tensor& shift) {
  require_rank(input, 3, "channel_affine");
  const std::size_t c = input.dim(0), plane = input.dim(1) * input.dim(2);
  if (scale.numel() != c || shift.numel() != c) {
    throw DimensionError("channel_affine: scale/shift must have " + std::to_string(c) +
                         " entries");
  }
  std::vector<double> values(input.numel());
  const auto in = input.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < plane; ++p) {
      values[ch * plane + p] = in[ch * plane + p] * scale[ch] + shift[ch];
    }
  }
  Tensor out = make_result(input.shape(), std::move(values), {input, scale, shift});
  record(out, [ii = input.impl(), si = scale.impl(), ti = shift.impl(), oi = out.impl(), c,
               plane] {
    const double* g = oi->grad.data();
    double* gi = wants(ii) ? ii->grad_buffer() : nullptr;
    double* gs = wants(si) ? si->grad_buffer() : nullptr;
    double* gt = wants(ti) ? ti->grad_buffer() : nullptr;
    for (std::size_t ch = 0; ch < c; ++ch) {
      double ds = 0.0, dt = 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t idx = ch * plane + p;
        if (gi) gi[idx] += g[idx] * si->data[ch];
        ds += g[idx] * ii->data[idx];
        dt += g[idx];
      }
      if (gs) gs[ch] += ds;
      if (gt) gt[ch] += dt;
    }
  });
  return out;
}

Tensor instance_norm(const Tensor& input, double eps) {
  require_rank(input, 3, "instance_norm");
  const std::size_t c = input.dim(0), plane = input.dim(1) * input.dim(2);
  if (plane == 0) throw DimensionError("instance_norm: empty plane");
  std::vector<double> values(input.numel());
  auto inv_std = std::make_shared<std::vector<double>>(c);
  const auto in = input.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const auto p = in.subspan(ch * plane, plane);
    const double mu = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(plane);
    double var = 0.0;
    for (double v : p) var += (v - mu) * (v - mu);
    var /= static_cast<double>(plane);
    (*inv_std)[ch] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < plane; ++i) {
      values[ch * plane + i] = (p[i] - mu) * (*inv_std)[ch];
    }
  }
  Tensor out = make_result(input.shape(), std::move(values), {input});
  record(out, [ii = input.impl(), oi = out.impl(), inv_std, c, plane] {
    if (!wants(ii)) return;
    double* g = ii->grad_buffer();
    const double n = static_cast<double>(plane);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double mean_g = 0.0, mean_gy = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t idx = ch * plane + i;
        mean_g += oi->grad[idx];
        mean_gy += oi->grad[idx] * oi->data[idx];
      }
      mean_g /= n;
      mean_gy /= n;
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t idx = ch * plane + i;
        g[idx] += (*inv_std)[ch] * (oi->grad[idx] - mean_g - oi->data[idx] * mean_gy);
      }
    }
  });
  return out;
}

}  // namespace personaforge::tensor
