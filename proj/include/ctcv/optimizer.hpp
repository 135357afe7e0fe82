#pragma once

#include <cstddef>
#include <vector>

#include "ctcv/layers.hpp"

namespace ctcv {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

// Adam moments, allocated on first use. Unused by sgd.
template <typename T>
struct OptimizerState {
  std::size_t step = 0;
  ParamSet<T> m;
  ParamSet<T> v;
};

// Updates every parameter of every layer whose `trainable` flag is set
// (all layers when the mask is empty). Throws NumericError naming the first
// parameter whose gradient is not finite; nothing is updated in that case.
template <typename T>
void optimizer_step(ParamSet<T>& params, const GradientSet<T>& grads, OptimizerState<T>& state,
                    const OptimizerConfig& config, const std::vector<bool>& trainable = {});

}  // namespace ctcv
