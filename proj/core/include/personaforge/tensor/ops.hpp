#pragma once

#include <cstddef>
#include <span>

#include "personaforge/tensor/tensor.hpp"

// Differentiable operations. Every function records a backward node on the
// active tape when at least one operand requires grad.
namespace personaforge::tensor {

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// x[n] or x[rows,n] times weight[n,m] plus bias[m] (bias added per row).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

enum class BinaryOp { kAdd, kSub, kMul };

/// Shapes must match exactly, or either side may be a one-element tensor.
Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// factor * a + offset, elementwise.
Tensor affine(const Tensor& a, double factor, double offset);

enum class Activation { kSigmoid, kTanh, kRelu };

Tensor activation(Activation op, const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double negative_slope);
/// log(1 + exp(a)), numerically stable.
Tensor softplus(const Tensor& a);
Tensor log(const Tensor& a);
/// Gradient passes only where lo <= a <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor softmax(const Tensor& a, std::size_t axis);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Elementwise mean of equally shaped tensors.
Tensor average(std::span<const Tensor> items);
/// Flattens and joins the operands into one vector.
Tensor concat(std::span<const Tensor> items);
Tensor reshape(const Tensor& a, Shape shape);

/// Row gather: table[V,d], ids -> [ids.size(), d]. Backward scatters.
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);

/// Cross-correlation of input[c_in,h,w] with kernel[c_out,c_in,kh,kw].
/// bias may be empty (numel 0) or [c_out].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t pad);
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t pad);

enum class PoolMode { kMax, kAvg };

/// Max backward routes to the first maximal element in scan order.
Tensor pool(const Tensor& input, PoolMode mode, std::size_t window,
            std::size_t stride);

/// [c,h,w] -> [c], mean over each channel plane.
Tensor spatial_mean(const Tensor& input);
/// Nearest-neighbour x2 upsampling of [c,h,w].
Tensor upsample2x(const Tensor& input);
/// input[c,h,w] * scale[c] + shift[c].
Tensor channel_affine(const Tensor& input, const Tensor& scale, const Tensor& shift);
/// Per-channel zero mean / unit variance normalization of [c,h,w].
Tensor instance_norm(const Tensor& input, double eps = 1e-5);

}  // namespace personaforge::tensor
