#pragma once

// Layer descriptions and their forward/backward passes.

#include <cstddef>
#include <string>
#include <vector>

#include "ctcv/ops.hpp"
#include "ctcv/random.hpp"
#include "ctcv/tensor.hpp"

namespace ctcv {

enum class LayerKind { conv2d, maxpool, avgpool, globalavgpool, relu, flatten, dense, dropout, softmax };

const char* to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t filters = 0;  // conv2d
  std::size_t kernel = 0;   // conv2d
  std::size_t window = 0;   // maxpool, avgpool
  std::size_t stride = 1;   // conv2d, maxpool, avgpool
  Padding padding = Padding::same;
  std::size_t units = 0;  // dense
  double rate = 0.0;      // dropout

  static LayerSpec conv2d(std::size_t filters, std::size_t kernel, std::size_t stride = 1,
                          Padding padding = Padding::same);
  static LayerSpec maxpool(std::size_t window, std::size_t stride);
  static LayerSpec avgpool(std::size_t window, std::size_t stride);
  static LayerSpec global_avgpool() { return {LayerKind::globalavgpool}; }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec flatten() { return {LayerKind::flatten}; }
  static LayerSpec dense(std::size_t units);
  static LayerSpec dropout(double rate);
  static LayerSpec softmax() { return {LayerKind::softmax}; }

  bool has_params() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }

  bool operator==(const LayerSpec&) const = default;
};

// Throws InvalidArgument when a hyperparameter is missing or out of range.
void validate(const LayerSpec& spec);

// Output shape for a batched input shape; throws ShapeError if the input
// does not fit the layer.
Shape infer_output_shape(const LayerSpec& spec, const Shape& input);

// Weight and bias shapes for a layer fed with `input`; empty for
// parameter-free layers.
std::vector<Shape> param_shapes(const LayerSpec& spec, const Shape& input);

// Single-line text form, e.g. "conv2d filters=32 kernel=3 stride=1 padding=same".
std::string format_layer(const LayerSpec& spec);
LayerSpec parse_layer(const std::string& text);

template <typename T>
struct LayerParams {
  Tensor<T> weights;
  Tensor<T> bias;

  bool empty() const { return weights.empty() && bias.empty(); }
  bool operator==(const LayerParams&) const = default;
};

// One entry per layer, in layer order; parameter-free layers hold empty tensors.
template <typename T>
using ParamSet = std::vector<LayerParams<T>>;

template <typename T>
using GradientSet = std::vector<LayerParams<T>>;

template <typename T>
std::size_t parameter_count(const ParamSet<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.weights.size() + p.bias.size();
  return n;
}

template <typename U, typename T>
ParamSet<U> cast_params(const ParamSet<T>& params) {
  ParamSet<U> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].weights.empty()) out[i].weights = params[i].weights.template cast<U>();
    if (!params[i].bias.empty()) out[i].bias = params[i].bias.template cast<U>();
  }
  return out;
}

enum class Mode { train, eval };

// What a backward pass needs from its forward pass.
template <typename T>
struct LayerCache {
  Shape input_shape;
  Tensor<T> input;  // kept only by layers whose gradient depends on it
  Tensor<T> output;
  std::vector<std::size_t> argmax;
  Tensor<T> mask;
};

template <typename T>
Tensor<T> layer_forward(const LayerSpec& spec, const LayerParams<T>& params, const Tensor<T>& input,
                        Mode mode, Rng& rng, LayerCache<T>& cache);

template <typename T>
struct LayerGrads {
  Tensor<T> input;  // empty when not requested
  LayerParams<T> params;
};

template <typename T>
LayerGrads<T> layer_backward(const LayerSpec& spec, const LayerParams<T>& params,
                             const LayerCache<T>& cache, const Tensor<T>& upstream,
                             bool want_input_grad = true);

}  // namespace ctcv
