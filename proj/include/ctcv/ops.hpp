#pragma once

// Numeric building blocks. All functions are pure: inputs are not modified
// and results are freshly allocated. Image tensors are N x H x W x C.

#include <cstddef>
#include <vector>

#include "ctcv/tensor.hpp"

namespace ctcv {

enum class ElementwiseOp { add, sub, mul, max_scalar };

template <typename T>
Tensor<T> elementwise(ElementwiseOp op, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> elementwise(ElementwiseOp op, const Tensor<T>& a, T b);

// [M x K] * [K x N] -> [M x N]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

enum class Padding { same, valid };

struct ConvGeometry {
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  std::size_t pad_top = 0;
  std::size_t pad_left = 0;
};

// Output extents and leading zero-padding for one spatial layout.
// `same` follows the usual ceil(in / stride) rule with the odd padding
// pixel placed at the bottom/right.
ConvGeometry conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t kernel_h,
                           std::size_t kernel_w, std::size_t stride, Padding padding);

// Cross-correlation plus per-channel bias.
// kernels: Kh x Kw x Cin x Cout, bias: Cout.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                 Padding padding, std::size_t stride);

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;  // empty unless requested
  Tensor<T> kernels;
  Tensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                               const Tensor<T>& upstream, Padding padding, std::size_t stride,
                               bool want_input_grad = true);

enum class PoolKind { max, average };

template <typename T>
struct PoolResult {
  Tensor<T> output;
  // For max pooling: flat input offset of each output element's maximum.
  std::vector<std::size_t> argmax;
};

std::size_t pool_output_extent(std::size_t in, std::size_t window, std::size_t stride);

template <typename T>
PoolResult<T> pool2d(const Tensor<T>& input, PoolKind kind, std::size_t window,
                     std::size_t stride);

template <typename T>
Tensor<T> pool2d_backward(const Shape& input_shape, PoolKind kind, std::size_t window,
                          std::size_t stride, const std::vector<std::size_t>& argmax,
                          const Tensor<T>& upstream);

// Row-wise softmax of an N x K tensor, max-subtracted.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

// Vector-Jacobian product of softmax given its output.
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& probs, const Tensor<T>& upstream);

}  // namespace ctcv
