#include "ctcv/network.hpp"

#include <string>

#include "ctcv/error.hpp"

namespace ctcv {
namespace {

std::string layer_tag(const ModelSpec& spec, std::size_t i) {
  return "layer " + std::to_string(i) + " (" + to_string(spec.layers[i].kind) + ")";
}

}  // namespace

template <typename T>
Network<T>::Network(ModelSpec spec, ParamSet<T> params)
    : spec_(std::move(spec)), params_(std::move(params)), trainable_(spec_.layers.size(), true) {
  validate_model(spec_);
  const auto shapes = model_param_shapes(spec_);
  if (params_.size() != spec_.layers.size()) {
    throw ShapeError("parameter set has " + std::to_string(params_.size()) + " layers, model " +
                     std::to_string(spec_.layers.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].empty()) {
      if (!params_[i].empty()) throw ShapeError(layer_tag(spec_, i) + " takes no parameters");
      continue;
    }
    if (params_[i].weights.shape() != shapes[i][0] || params_[i].bias.shape() != shapes[i][1]) {
      throw ShapeError(layer_tag(spec_, i) + ": parameters " + params_[i].weights.shape().str() +
                       "/" + params_[i].bias.shape().str() + " expected " + shapes[i][0].str() +
                       "/" + shapes[i][1].str());
    }
  }
}

template <typename T>
void Network<T>::set_trainable(std::vector<bool> mask) {
  if (mask.size() != spec_.layers.size()) {
    throw ShapeError("trainable mask has " + std::to_string(mask.size()) + " entries for " +
                     std::to_string(spec_.layers.size()) + " layers");
  }
  trainable_ = std::move(mask);
}

template <typename T>
void Network<T>::check_batch(const Tensor<T>& batch) const {
  if (batch.shape().rank() != 4 || batch.dim(1) != spec_.input_shape[0] ||
      batch.dim(2) != spec_.input_shape[1] || batch.dim(3) != spec_.input_shape[2]) {
    throw ShapeError("model '" + spec_.name + "' expects N x " + std::to_string(spec_.input_shape[0]) +
                     " x " + std::to_string(spec_.input_shape[1]) + " x " +
                     std::to_string(spec_.input_shape[2]) + " input, got " + batch.shape().str());
  }
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& batch, Mode mode, Rng& rng) {
  check_batch(batch);
  caches_.assign(spec_.layers.size(), {});
  Tensor<T> x = batch;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    try {
      x = layer_forward(spec_.layers[i], params_[i], x, mode, rng, caches_[i]);
    } catch (const ShapeError& e) {
      throw ShapeError(layer_tag(spec_, i) + ": " + e.what());
    }
  }
  have_caches_ = true;
  return x;
}

template <typename T>
Tensor<T> Network<T>::predict(const Tensor<T>& batch) const {
  check_batch(batch);
  Rng unused(0);
  LayerCache<T> cache;
  Tensor<T> x = batch;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    try {
      x = layer_forward(spec_.layers[i], params_[i], x, Mode::eval, unused, cache);
    } catch (const ShapeError& e) {
      throw ShapeError(layer_tag(spec_, i) + ": " + e.what());
    }
  }
  return x;
}

template <typename T>
GradientSet<T> Network<T>::backward_from_logits(const Tensor<T>& grad_logits) {
  if (spec_.layers.back().kind != LayerKind::softmax) {
    throw ShapeError("backward_from_logits needs a softmax head");
  }
  return backward_from(spec_.layers.size() - 1, grad_logits, false);
}

template <typename T>
GradientSet<T> Network<T>::backward(const Tensor<T>& upstream) {
  return backward_from(spec_.layers.size(), upstream, true);
}

template <typename T>
GradientSet<T> Network<T>::backward_from(std::size_t top, Tensor<T> upstream, bool want_input) {
  if (!have_caches_) throw Error("backward called without a preceding forward pass");
  GradientSet<T> grads(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (params_[i].empty()) continue;
    grads[i] = {Tensor<T>(params_[i].weights.shape()), Tensor<T>(params_[i].bias.shape())};
  }
  // Nothing below the lowest trainable layer needs a gradient unless the
  // caller asked for the input gradient.
  std::size_t lowest = top;
  for (std::size_t i = 0; i < top; ++i) {
    if (!params_[i].empty() && trainable_[i]) {
      lowest = i;
      break;
    }
  }
  if (want_input) lowest = 0;
  input_grad_ = Tensor<T>();
  for (std::size_t i = top; i-- > lowest;) {
    const bool need_input = i > lowest || want_input;
    try {
      auto g = layer_backward(spec_.layers[i], params_[i], caches_[i], upstream, need_input);
      if (!params_[i].empty() && trainable_[i]) grads[i] = std::move(g.params);
      upstream = std::move(g.input);
    } catch (const ShapeError& e) {
      throw ShapeError(layer_tag(spec_, i) + ": " + e.what());
    }
  }
  if (want_input) input_grad_ = std::move(upstream);
  return grads;
}

template class Network<float>;
template class Network<double>;

}  // namespace ctcv
