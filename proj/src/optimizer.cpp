#include "ctcv/optimizer.hpp"

#include <cmath>
#include <string>

#include "ctcv/error.hpp"
#include "ctcv/kernels/kernels.hpp"

namespace ctcv {
namespace {

template <typename T>
void check_congruent(const Tensor<T>& p, const Tensor<T>& g, std::size_t layer, const char* name) {
  if (p.shape() != g.shape()) {
    throw ShapeError("layer " + std::to_string(layer) + " " + name + ": parameter " +
                     p.shape().str() + " vs gradient " + g.shape().str());
  }
  if (!g.all_finite()) {
    throw NumericError("non-finite gradient in layer " + std::to_string(layer) + " " + name);
  }
}

}  // namespace

template <typename T>
void optimizer_step(ParamSet<T>& params, const GradientSet<T>& grads, OptimizerState<T>& state,
                    const OptimizerConfig& config, const std::vector<bool>& trainable) {
  if (params.size() != grads.size()) {
    throw ShapeError("parameter set has " + std::to_string(params.size()) +
                     " layers, gradient set " + std::to_string(grads.size()));
  }
  if (!trainable.empty() && trainable.size() != params.size()) {
    throw ShapeError("trainable mask length does not match layer count");
  }
  auto active = [&](std::size_t i) { return trainable.empty() || trainable[i]; };
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!active(i) || params[i].empty()) continue;
    check_congruent(params[i].weights, grads[i].weights, i, "weights");
    check_congruent(params[i].bias, grads[i].bias, i, "bias");
  }

  const auto& k = kernels::active_kernels<T>();
  if (config.kind == OptimizerKind::sgd) {
    const T step = static_cast<T>(-config.lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!active(i) || params[i].empty()) continue;
      k.axpy(step, grads[i].weights.ptr(), params[i].weights.ptr(), params[i].weights.size());
      k.axpy(step, grads[i].bias.ptr(), params[i].bias.ptr(), params[i].bias.size());
    }
    ++state.step;
    return;
  }

  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].empty()) continue;
      state.m[i] = {Tensor<T>(params[i].weights.shape()), Tensor<T>(params[i].bias.shape())};
      state.v[i] = state.m[i];
    }
    state.step = 0;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const kernels::AdamStep<T> s{static_cast<T>(config.lr),
                               static_cast<T>(config.beta1),
                               static_cast<T>(config.beta2),
                               static_cast<T>(config.epsilon),
                               static_cast<T>(1.0 - std::pow(config.beta1, t)),
                               static_cast<T>(1.0 - std::pow(config.beta2, t))};
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!active(i) || params[i].empty()) continue;
    auto& p = params[i];
    k.adam_update(p.weights.ptr(), grads[i].weights.ptr(), state.m[i].weights.ptr(),
                  state.v[i].weights.ptr(), p.weights.size(), s);
    k.adam_update(p.bias.ptr(), grads[i].bias.ptr(), state.m[i].bias.ptr(), state.v[i].bias.ptr(),
                  p.bias.size(), s);
  }
}

template void optimizer_step(ParamSet<float>&, const GradientSet<float>&, OptimizerState<float>&,
                             const OptimizerConfig&, const std::vector<bool>&);
template void optimizer_step(ParamSet<double>&, const GradientSet<double>&,
                             OptimizerState<double>&, const OptimizerConfig&,
                             const std::vector<bool>&);

}  // namespace ctcv
