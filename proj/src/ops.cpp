#include "ctcv/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ctcv/error.hpp"
#include "ctcv/kernels/kernels.hpp"

namespace ctcv {
namespace {

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.rank() != rank) {
    throw ShapeError(std::string(what) + " expects rank " + std::to_string(rank) + ", got " +
                     s.str());
  }
}

// Unrolls every receptive field of one image into a row of length
// Kh * Kw * Cin, ordered (kh, kw, cin) to match the kernel layout.
template <typename T>
void im2col(const T* image, std::size_t h, std::size_t w, std::size_t c, std::size_t kh,
            std::size_t kw, std::size_t stride, const ConvGeometry& g, T* col) {
  const std::size_t row_len = kh * kw * c;
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      T* row = col + (oy * g.out_w + ox) * row_len;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                  static_cast<std::ptrdiff_t>(g.pad_top);
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                    static_cast<std::ptrdiff_t>(g.pad_left);
          T* dst = row + (ky * kw + kx) * c;
          if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
              ix >= static_cast<std::ptrdiff_t>(w)) {
            std::fill(dst, dst + c, T(0));
          } else {
            const T* src = image + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * c;
            std::copy(src, src + c, dst);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, std::size_t h, std::size_t w, std::size_t c, std::size_t kh,
            std::size_t kw, std::size_t stride, const ConvGeometry& g, T* image) {
  const std::size_t row_len = kh * kw * c;
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const T* row = col + (oy * g.out_w + ox) * row_len;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                  static_cast<std::ptrdiff_t>(g.pad_top);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                    static_cast<std::ptrdiff_t>(g.pad_left);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const T* src = row + (ky * kw + kx) * c;
          T* dst = image + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * c;
          for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> elementwise(ElementwiseOp op, const Tensor<T>& a, const Tensor<T>& b) {
  if (op == ElementwiseOp::max_scalar) {
    throw InvalidArgument("max_scalar takes a scalar right-hand side");
  }
  if (a.shape() != b.shape()) {
    throw ShapeError("elementwise shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
  }
  const auto& k = kernels::active_kernels<T>();
  Tensor<T> out(a.shape());
  switch (op) {
    case ElementwiseOp::add: k.add(a.ptr(), b.ptr(), out.ptr(), a.size()); break;
    case ElementwiseOp::sub: k.sub(a.ptr(), b.ptr(), out.ptr(), a.size()); break;
    case ElementwiseOp::mul: k.mul(a.ptr(), b.ptr(), out.ptr(), a.size()); break;
    case ElementwiseOp::max_scalar: break;
  }
  return out;
}

template <typename T>
Tensor<T> elementwise(ElementwiseOp op, const Tensor<T>& a, T b) {
  const auto& k = kernels::active_kernels<T>();
  Tensor<T> out(a.shape());
  switch (op) {
    case ElementwiseOp::add: k.add_scalar(a.ptr(), b, out.ptr(), a.size()); break;
    case ElementwiseOp::sub: k.add_scalar(a.ptr(), -b, out.ptr(), a.size()); break;
    case ElementwiseOp::mul: k.mul_scalar(a.ptr(), b, out.ptr(), a.size()); break;
    case ElementwiseOp::max_scalar: k.max_scalar(a.ptr(), b, out.ptr(), a.size()); break;
  }
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul");
  require_rank(b.shape(), 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul inner extents differ: " + a.shape().str() + " x " + b.shape().str());
  }
  Tensor<T> out(Shape{a.dim(0), b.dim(1)});
  kernels::active_kernels<T>().gemm(false, false, a.dim(0), b.dim(1), a.dim(1), a.ptr(), b.ptr(),
                                    out.ptr(), false);
  return out;
}

ConvGeometry conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t kernel_h,
                           std::size_t kernel_w, std::size_t stride, Padding padding) {
  if (stride == 0) throw InvalidArgument("stride must be positive");
  ConvGeometry g;
  if (padding == Padding::valid) {
    if (kernel_h > in_h || kernel_w > in_w) {
      throw ShapeError("kernel " + std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
                       " larger than input " + std::to_string(in_h) + "x" + std::to_string(in_w));
    }
    g.out_h = (in_h - kernel_h) / stride + 1;
    g.out_w = (in_w - kernel_w) / stride + 1;
    return g;
  }
  g.out_h = (in_h + stride - 1) / stride;
  g.out_w = (in_w + stride - 1) / stride;
  const std::size_t need_h = (g.out_h - 1) * stride + kernel_h;
  const std::size_t need_w = (g.out_w - 1) * stride + kernel_w;
  g.pad_top = need_h > in_h ? (need_h - in_h) / 2 : 0;
  g.pad_left = need_w > in_w ? (need_w - in_w) / 2 : 0;
  return g;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                 Padding padding, std::size_t stride) {
  require_rank(input.shape(), 4, "conv2d input");
  require_rank(kernels.shape(), 4, "conv2d kernels");
  const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), cin = input.dim(3);
  const std::size_t kh = kernels.dim(0), kw = kernels.dim(1), cout = kernels.dim(3);
  if (kernels.dim(2) != cin) {
    throw ShapeError("conv2d channel mismatch: input " + input.shape().str() + " vs kernels " +
                     kernels.shape().str());
  }
  if (bias.shape() != Shape{cout}) {
    throw ShapeError("conv2d bias " + bias.shape().str() + " does not match " +
                     std::to_string(cout) + " output channels");
  }
  const ConvGeometry g = conv_geometry(h, w, kh, kw, stride, padding);
  const std::size_t rows = g.out_h * g.out_w;
  const std::size_t row_len = kh * kw * cin;

  const auto& k = kernels::active_kernels<T>();
  Tensor<T> out(Shape{n, g.out_h, g.out_w, cout});
  std::vector<T> col(rows * row_len);
  for (std::size_t b = 0; b < n; ++b) {
    im2col(input.ptr() + b * h * w * cin, h, w, cin, kh, kw, stride, g, col.data());
    T* dst = out.ptr() + b * rows * cout;
    for (std::size_t r = 0; r < rows; ++r) std::copy(bias.ptr(), bias.ptr() + cout, dst + r * cout);
    k.gemm(false, false, rows, cout, row_len, col.data(), kernels.ptr(), dst, true);
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                               const Tensor<T>& upstream, Padding padding, std::size_t stride,
                               bool want_input_grad) {
  const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), cin = input.dim(3);
  const std::size_t kh = kernels.dim(0), kw = kernels.dim(1), cout = kernels.dim(3);
  const ConvGeometry g = conv_geometry(h, w, kh, kw, stride, padding);
  const Shape expected{n, g.out_h, g.out_w, cout};
  if (upstream.shape() != expected) {
    throw ShapeError("conv2d upstream gradient " + upstream.shape().str() + " expected " +
                     expected.str());
  }
  const std::size_t rows = g.out_h * g.out_w;
  const std::size_t row_len = kh * kw * cin;
  const auto& k = kernels::active_kernels<T>();

  Conv2dGrads<T> grads;
  grads.kernels = Tensor<T>(kernels.shape());
  grads.bias = Tensor<T>(Shape{cout});
  if (want_input_grad) grads.input = Tensor<T>(input.shape());

  std::vector<T> col(rows * row_len);
  std::vector<T> dcol(want_input_grad ? rows * row_len : 0);
  for (std::size_t b = 0; b < n; ++b) {
    const T* dy = upstream.ptr() + b * rows * cout;
    im2col(input.ptr() + b * h * w * cin, h, w, cin, kh, kw, stride, g, col.data());
    k.gemm(true, false, row_len, cout, rows, col.data(), dy, grads.kernels.ptr(), true);
    k.sum_rows(dy, rows, cout, grads.bias.ptr());
    if (want_input_grad) {
      k.gemm(false, true, rows, row_len, cout, dy, kernels.ptr(), dcol.data(), false);
      col2im(dcol.data(), h, w, cin, kh, kw, stride, g, grads.input.ptr() + b * h * w * cin);
    }
  }
  return grads;
}

std::size_t pool_output_extent(std::size_t in, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw InvalidArgument("pool window and stride must be positive");
  if (window > in) {
    throw ShapeError("pool window " + std::to_string(window) + " exceeds input extent " +
                     std::to_string(in));
  }
  return (in - window) / stride + 1;
}

template <typename T>
PoolResult<T> pool2d(const Tensor<T>& input, PoolKind kind, std::size_t window,
                     std::size_t stride) {
  require_rank(input.shape(), 4, "pool2d");
  const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const std::size_t oh = pool_output_extent(h, window, stride);
  const std::size_t ow = pool_output_extent(w, window, stride);
  PoolResult<T> res;
  res.output = Tensor<T>(Shape{n, oh, ow, c});
  if (kind == PoolKind::max) res.argmax.resize(res.output.size());
  const T inv_area = T(1) / static_cast<T>(window * window);
  T* out = res.output.ptr();
  const T* in = input.ptr();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t o = ((b * oh + oy) * ow + ox) * c + ch;
          if (kind == PoolKind::max) {
            T best = -std::numeric_limits<T>::infinity();
            std::size_t best_at = 0;
            bool first = true;
            for (std::size_t ky = 0; ky < window; ++ky) {
              for (std::size_t kx = 0; kx < window; ++kx) {
                const std::size_t i = ((b * h + oy * stride + ky) * w + ox * stride + kx) * c + ch;
                if (first || in[i] > best) {
                  best = in[i];
                  best_at = i;
                  first = false;
                }
              }
            }
            out[o] = best;
            res.argmax[o] = best_at;
          } else {
            T sum = T(0);
            for (std::size_t ky = 0; ky < window; ++ky) {
              for (std::size_t kx = 0; kx < window; ++kx) {
                sum += in[((b * h + oy * stride + ky) * w + ox * stride + kx) * c + ch];
              }
            }
            out[o] = sum * inv_area;
          }
        }
      }
    }
  }
  return res;
}

template <typename T>
Tensor<T> pool2d_backward(const Shape& input_shape, PoolKind kind, std::size_t window,
                          std::size_t stride, const std::vector<std::size_t>& argmax,
                          const Tensor<T>& upstream) {
  const std::size_t n = input_shape[0], h = input_shape[1], w = input_shape[2], c = input_shape[3];
  const std::size_t oh = pool_output_extent(h, window, stride);
  const std::size_t ow = pool_output_extent(w, window, stride);
  const Shape expected{n, oh, ow, c};
  if (upstream.shape() != expected) {
    throw ShapeError("pool2d upstream gradient " + upstream.shape().str() + " expected " +
                     expected.str());
  }
  Tensor<T> grad(input_shape);
  T* g = grad.ptr();
  const T* dy = upstream.ptr();
  if (kind == PoolKind::max) {
    if (argmax.size() != upstream.size()) throw ShapeError("pool2d argmax cache size mismatch");
    for (std::size_t o = 0; o < upstream.size(); ++o) g[argmax[o]] += dy[o];
    return grad;
  }
  const T inv_area = T(1) / static_cast<T>(window * window);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const T share = dy[((b * oh + oy) * ow + ox) * c + ch] * inv_area;
          for (std::size_t ky = 0; ky < window; ++ky) {
            for (std::size_t kx = 0; kx < window; ++kx) {
              g[((b * h + oy * stride + ky) * w + ox * stride + kx) * c + ch] += share;
            }
          }
        }
      }
    }
  }
  return grad;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require_rank(logits.shape(), 2, "softmax");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  Tensor<T> out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = logits.ptr() + r * cols;
    T* y = out.ptr() + r * cols;
    const T peak = *std::max_element(x, x + cols);
    T sum = T(0);
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - peak);
      sum += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= sum;
  }
  return out;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& probs, const Tensor<T>& upstream) {
  if (probs.shape() != upstream.shape()) {
    throw ShapeError("softmax upstream gradient " + upstream.shape().str() + " vs output " +
                     probs.shape().str());
  }
  const std::size_t rows = probs.dim(0), cols = probs.dim(1);
  Tensor<T> grad(probs.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* y = probs.ptr() + r * cols;
    const T* dy = upstream.ptr() + r * cols;
    T dot = T(0);
    for (std::size_t j = 0; j < cols; ++j) dot += y[j] * dy[j];
    for (std::size_t j = 0; j < cols; ++j) grad[r * cols + j] = y[j] * (dy[j] - dot);
  }
  return grad;
}

#define CTCV_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> elementwise(ElementwiseOp, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> elementwise(ElementwiseOp, const Tensor<T>&, T);                             \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Padding,        \
                            std::size_t);                                                         \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                          Padding, std::size_t, bool);                            \
  template PoolResult<T> pool2d(const Tensor<T>&, PoolKind, std::size_t, std::size_t);            \
  template Tensor<T> pool2d_backward(const Shape&, PoolKind, std::size_t, std::size_t,            \
                                     const std::vector<std::size_t>&, const Tensor<T>&);          \
  template Tensor<T> softmax(const Tensor<T>&);                                                   \
  template Tensor<T> softmax_backward(const Tensor<T>&, const Tensor<T>&);

CTCV_INSTANTIATE_OPS(float)
CTCV_INSTANTIATE_OPS(double)

}  // namespace ctcv
