#pragma once

#include <vector>

#include "ctcv/layers.hpp"
#include "ctcv/model.hpp"

namespace ctcv {

// A ModelSpec bound to concrete parameters. forward() keeps per-layer caches
// for the following backward call; predict() keeps nothing and is const.
template <typename T>
class Network {
 public:
  Network(ModelSpec spec, ParamSet<T> params);

  const ModelSpec& spec() const { return spec_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

  // Layers with a false flag receive zero gradients and are skipped by the
  // optimizer. Defaults to all true.
  void set_trainable(std::vector<bool> mask);
  const std::vector<bool>& trainable() const { return trainable_; }

  // Batch is N x H x W x C; returns class probabilities N x K.
  Tensor<T> forward(const Tensor<T>& batch, Mode mode, Rng& rng);
  Tensor<T> predict(const Tensor<T>& batch) const;

  // Gradients from d(loss)/d(logits), bypassing the final softmax (the
  // softmax + cross-entropy shortcut).
  GradientSet<T> backward_from_logits(const Tensor<T>& grad_logits);
  // Gradients from d(loss)/d(probabilities), through every layer.
  GradientSet<T> backward(const Tensor<T>& upstream);

  // Input gradient of the last backward call (empty if it was not needed).
  const Tensor<T>& input_grad() const { return input_grad_; }

 private:
  GradientSet<T> backward_from(std::size_t top, Tensor<T> upstream, bool want_input);
  void check_batch(const Tensor<T>& batch) const;

  ModelSpec spec_;
  ParamSet<T> params_;
  std::vector<bool> trainable_;
  std::vector<LayerCache<T>> caches_;
  Tensor<T> input_grad_;
  bool have_caches_ = false;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace ctcv
