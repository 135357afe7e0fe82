#include "ctcv/layers.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "ctcv/error.hpp"
#include "ctcv/kernels/kernels.hpp"

namespace ctcv {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::globalavgpool: return "globalavgpool";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

LayerSpec LayerSpec::conv2d(std::size_t filters, std::size_t kernel, std::size_t stride,
                            Padding padding) {
  LayerSpec s{LayerKind::conv2d};
  s.filters = filters;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::maxpool(std::size_t window, std::size_t stride) {
  LayerSpec s{LayerKind::maxpool};
  s.window = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::avgpool(std::size_t window, std::size_t stride) {
  LayerSpec s{LayerKind::avgpool};
  s.window = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t units) {
  LayerSpec s{LayerKind::dense};
  s.units = units;
  return s;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s{LayerKind::dropout};
  s.rate = rate;
  return s;
}

void validate(const LayerSpec& spec) {
  const std::string kind = to_string(spec.kind);
  switch (spec.kind) {
    case LayerKind::conv2d:
      if (spec.filters == 0 || spec.kernel == 0 || spec.stride == 0)
        throw InvalidArgument(kind + ": filters, kernel and stride must be positive");
      break;
    case LayerKind::maxpool:
    case LayerKind::avgpool:
      if (spec.window == 0 || spec.stride == 0)
        throw InvalidArgument(kind + ": window and stride must be positive");
      break;
    case LayerKind::dense:
      if (spec.units == 0) throw InvalidArgument("dense: units must be positive");
      break;
    case LayerKind::dropout:
      if (!(spec.rate >= 0.0 && spec.rate < 1.0))
        throw InvalidArgument("dropout: rate must lie in [0, 1)");
      break;
    default:
      break;
  }
}

namespace {

void require(bool ok, const LayerSpec& spec, const Shape& input, const char* expect) {
  if (!ok) {
    throw ShapeError(std::string(to_string(spec.kind)) + " expects " + expect + ", got " +
                     input.str());
  }
}

}  // namespace

Shape infer_output_shape(const LayerSpec& spec, const Shape& input) {
  validate(spec);
  switch (spec.kind) {
    case LayerKind::conv2d: {
      require(input.rank() == 4, spec, input, "N x H x W x C input");
      const ConvGeometry g =
          conv_geometry(input[1], input[2], spec.kernel, spec.kernel, spec.stride, spec.padding);
      return Shape{input[0], g.out_h, g.out_w, spec.filters};
    }
    case LayerKind::maxpool:
    case LayerKind::avgpool:
      require(input.rank() == 4, spec, input, "N x H x W x C input");
      return Shape{input[0], pool_output_extent(input[1], spec.window, spec.stride),
                   pool_output_extent(input[2], spec.window, spec.stride), input[3]};
    case LayerKind::globalavgpool:
      require(input.rank() == 4, spec, input, "N x H x W x C input");
      return Shape{input[0], input[3]};
    case LayerKind::flatten:
      require(input.rank() >= 2, spec, input, "a batched input");
      return Shape{input[0], input.numel() / input[0]};
    case LayerKind::dense:
      require(input.rank() == 2, spec, input, "N x F input");
      return Shape{input[0], spec.units};
    case LayerKind::softmax:
      require(input.rank() == 2, spec, input, "N x K input");
      return input;
    case LayerKind::relu:
    case LayerKind::dropout:
      return input;
  }
  return input;
}

std::vector<Shape> param_shapes(const LayerSpec& spec, const Shape& input) {
  if (spec.kind == LayerKind::conv2d) {
    return {Shape{spec.kernel, spec.kernel, input[3], spec.filters}, Shape{spec.filters}};
  }
  if (spec.kind == LayerKind::dense) {
    return {Shape{input[1], spec.units}, Shape{spec.units}};
  }
  return {};
}

std::string format_layer(const LayerSpec& spec) {
  std::ostringstream os;
  os << to_string(spec.kind);
  switch (spec.kind) {
    case LayerKind::conv2d:
      os << " filters=" << spec.filters << " kernel=" << spec.kernel << " stride=" << spec.stride
         << " padding=" << (spec.padding == Padding::same ? "same" : "valid");
      break;
    case LayerKind::maxpool:
    case LayerKind::avgpool:
      os << " window=" << spec.window << " stride=" << spec.stride;
      break;
    case LayerKind::dense:
      os << " units=" << spec.units;
      break;
    case LayerKind::dropout: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", spec.rate);
      os << " rate=" << buf;
      break;
    }
    default:
      break;
  }
  return os.str();
}

LayerSpec parse_layer(const std::string& text) {
  std::istringstream is(text);
  std::string kind;
  is >> kind;
  static const std::map<std::string, LayerKind> kinds = {
      {"conv2d", LayerKind::conv2d},   {"maxpool", LayerKind::maxpool},
      {"avgpool", LayerKind::avgpool}, {"globalavgpool", LayerKind::globalavgpool},
      {"relu", LayerKind::relu},       {"flatten", LayerKind::flatten},
      {"dense", LayerKind::dense},     {"dropout", LayerKind::dropout},
      {"softmax", LayerKind::softmax}};
  const auto it = kinds.find(kind);
  if (it == kinds.end()) throw InvalidArgument("unknown layer kind '" + kind + "'");
  LayerSpec spec{it->second};

  auto to_size = [&](const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
      throw InvalidArgument("bad value for " + key + " in layer '" + text + "'");
    return out;
  };
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw InvalidArgument("malformed layer token '" + token + "'");
    const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
    if (key == "filters") spec.filters = to_size(key, value);
    else if (key == "kernel") spec.kernel = to_size(key, value);
    else if (key == "window") spec.window = to_size(key, value);
    else if (key == "stride") spec.stride = to_size(key, value);
    else if (key == "units") spec.units = to_size(key, value);
    else if (key == "padding") {
      if (value == "same") spec.padding = Padding::same;
      else if (value == "valid") spec.padding = Padding::valid;
      else throw InvalidArgument("bad padding '" + value + "'");
    } else if (key == "rate") {
      try {
        std::size_t used = 0;
        spec.rate = std::stod(value, &used);
        if (used != value.size()) throw InvalidArgument("");
      } catch (const std::exception&) {
        throw InvalidArgument("bad dropout rate '" + value + "'");
      }
    } else {
      throw InvalidArgument("unknown layer key '" + key + "'");
    }
  }
  validate(spec);
  return spec;
}

template <typename T>
Tensor<T> layer_forward(const LayerSpec& spec, const LayerParams<T>& params, const Tensor<T>& input,
                        Mode mode, Rng& rng, LayerCache<T>& cache) {
  const Shape out_shape = infer_output_shape(spec, input.shape());
  const auto& k = kernels::active_kernels<T>();
  cache = LayerCache<T>{};
  cache.input_shape = input.shape();
  switch (spec.kind) {
    case LayerKind::conv2d:
      cache.input = input;
      return conv2d(input, params.weights, params.bias, spec.padding, spec.stride);
    case LayerKind::maxpool:
    case LayerKind::avgpool: {
      const PoolKind kind = spec.kind == LayerKind::maxpool ? PoolKind::max : PoolKind::average;
      auto res = pool2d(input, kind, spec.window, spec.stride);
      cache.argmax = std::move(res.argmax);
      return std::move(res.output);
    }
    case LayerKind::globalavgpool: {
      const std::size_t n = input.dim(0), hw = input.dim(1) * input.dim(2), c = input.dim(3);
      Tensor<T> out(out_shape);
      for (std::size_t b = 0; b < n; ++b) {
        k.sum_rows(input.ptr() + b * hw * c, hw, c, out.ptr() + b * c);
      }
      k.mul_scalar(out.ptr(), T(1) / static_cast<T>(hw), out.ptr(), out.size());
      return out;
    }
    case LayerKind::relu:
      cache.input = input;
      return elementwise(ElementwiseOp::max_scalar, input, T(0));
    case LayerKind::flatten:
      return input.reshaped(out_shape);
    case LayerKind::dense: {
      if (params.weights.shape() != Shape{input.dim(1), spec.units}) {
        throw ShapeError("dense weights " + params.weights.shape().str() + " do not fit input " +
                         input.shape().str());
      }
      Tensor<T> out(out_shape);
      for (std::size_t b = 0; b < input.dim(0); ++b) {
        std::copy(params.bias.ptr(), params.bias.ptr() + spec.units, out.ptr() + b * spec.units);
      }
      k.gemm(false, false, input.dim(0), spec.units, input.dim(1), input.ptr(),
             params.weights.ptr(), out.ptr(), true);
      cache.input = input;
      return out;
    }
    case LayerKind::dropout: {
      if (mode == Mode::eval || spec.rate == 0.0) return input;
      Tensor<T> mask(input.shape());
      const T keep_scale = T(1) / static_cast<T>(1.0 - spec.rate);
      for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform01() < spec.rate ? T(0) : keep_scale;
      }
      Tensor<T> out = elementwise(ElementwiseOp::mul, input, mask);
      cache.mask = std::move(mask);
      return out;
    }
    case LayerKind::softmax: {
      Tensor<T> out = softmax(input);
      cache.output = out;
      return out;
    }
  }
  return input;
}

template <typename T>
LayerGrads<T> layer_backward(const LayerSpec& spec, const LayerParams<T>& params,
                             const LayerCache<T>& cache, const Tensor<T>& upstream,
                             bool want_input_grad) {
  const auto& k = kernels::active_kernels<T>();
  LayerGrads<T> g;
  auto check_upstream = [&](const Shape& expected) {
    if (upstream.shape() != expected) {
      throw ShapeError(std::string(to_string(spec.kind)) + " upstream gradient " +
                       upstream.shape().str() + " expected " + expected.str());
    }
  };
  switch (spec.kind) {
    case LayerKind::conv2d: {
      auto cg = conv2d_backward(cache.input, params.weights, upstream, spec.padding, spec.stride,
                                want_input_grad);
      g.input = std::move(cg.input);
      g.params.weights = std::move(cg.kernels);
      g.params.bias = std::move(cg.bias);
      return g;
    }
    case LayerKind::maxpool:
    case LayerKind::avgpool: {
      const PoolKind kind = spec.kind == LayerKind::maxpool ? PoolKind::max : PoolKind::average;
      g.input = pool2d_backward(cache.input_shape, kind, spec.window, spec.stride, cache.argmax,
                                upstream);
      return g;
    }
    case LayerKind::globalavgpool: {
      const Shape& in = cache.input_shape;
      check_upstream(Shape{in[0], in[3]});
      const std::size_t hw = in[1] * in[2], c = in[3];
      g.input = Tensor<T>(in);
      const T inv = T(1) / static_cast<T>(hw);
      for (std::size_t b = 0; b < in[0]; ++b) {
        for (std::size_t p = 0; p < hw; ++p) {
          k.mul_scalar(upstream.ptr() + b * c, inv, g.input.ptr() + (b * hw + p) * c, c);
        }
      }
      return g;
    }
    case LayerKind::relu:
      check_upstream(cache.input.shape());
      g.input = Tensor<T>(upstream.shape());
      k.relu_backward(cache.input.ptr(), upstream.ptr(), g.input.ptr(), upstream.size());
      return g;
    case LayerKind::flatten:
      check_upstream(infer_output_shape(spec, cache.input_shape));
      g.input = upstream.reshaped(cache.input_shape);
      return g;
    case LayerKind::dense: {
      const Tensor<T>& x = cache.input;
      check_upstream(Shape{x.dim(0), spec.units});
      g.params.weights = Tensor<T>(params.weights.shape());
      g.params.bias = Tensor<T>(params.bias.shape());
      k.gemm(true, false, x.dim(1), spec.units, x.dim(0), x.ptr(), upstream.ptr(),
             g.params.weights.ptr(), false);
      k.sum_rows(upstream.ptr(), x.dim(0), spec.units, g.params.bias.ptr());
      if (want_input_grad) {
        g.input = Tensor<T>(x.shape());
        k.gemm(false, true, x.dim(0), x.dim(1), spec.units, upstream.ptr(), params.weights.ptr(),
               g.input.ptr(), false);
      }
      return g;
    }
    case LayerKind::dropout:
      if (cache.mask.empty()) {
        g.input = upstream;
      } else {
        check_upstream(cache.mask.shape());
        g.input = elementwise(ElementwiseOp::mul, upstream, cache.mask);
      }
      return g;
    case LayerKind::softmax:
      g.input = softmax_backward(cache.output, upstream);
      return g;
  }
  return g;
}

#define CTCV_INSTANTIATE_LAYERS(T)                                                                 \
  template Tensor<T> layer_forward(const LayerSpec&, const LayerParams<T>&, const Tensor<T>&, Mode, \
                                   Rng&, LayerCache<T>&);                                          \
  template LayerGrads<T> layer_backward(const LayerSpec&, const LayerParams<T>&,                   \
                                        const LayerCache<T>&, const Tensor<T>&, bool);

CTCV_INSTANTIATE_LAYERS(float)
CTCV_INSTANTIATE_LAYERS(double)

}  // namespace ctcv
