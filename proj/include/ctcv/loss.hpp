#pragma once

#include <cstddef>
#include <vector>

#include "ctcv/tensor.hpp"

namespace ctcv {

// Lower clamp on the true-class probability inside the log.
inline constexpr double kProbabilityFloor = 1e-12;

template <typename T>
struct LossResult {
  T loss;
  // d(loss)/d(logits) for a softmax head: (probs - labels) / N
  Tensor<T> grad_logits;
};

// Mean categorical cross-entropy over the batch.
template <typename T>
LossResult<T> cross_entropy_loss(const Tensor<T>& probs, const Tensor<T>& labels);

template <typename T>
Tensor<T> one_hot(const std::vector<int>& classes, std::size_t num_classes);

}  // namespace ctcv
