#include "ctcv/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctcv/error.hpp"

namespace ctcv {

template <typename T>
LossResult<T> cross_entropy_loss(const Tensor<T>& probs, const Tensor<T>& labels) {
  if (probs.shape().rank() != 2 || probs.shape() != labels.shape()) {
    throw ShapeError("cross-entropy expects matching N x K tensors, got " + probs.shape().str() +
                     " and " + labels.shape().str());
  }
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  double total = 0.0;
  LossResult<T> res{T(0), Tensor<T>(probs.shape())};
  const T inv_n = T(1) / static_cast<T>(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t hot = k;
    for (std::size_t j = 0; j < k; ++j) {
      const T y = labels[r * k + j];
      if (y == T(1)) {
        if (hot != k) throw InvalidArgument("malformed one-hot label in row " + std::to_string(r));
        hot = j;
      } else if (y != T(0)) {
        throw InvalidArgument("malformed one-hot label in row " + std::to_string(r));
      }
    }
    if (hot == k) throw InvalidArgument("malformed one-hot label in row " + std::to_string(r));
    const double p = std::clamp(static_cast<double>(probs[r * k + hot]), kProbabilityFloor, 1.0);
    total -= std::log(p);
    for (std::size_t j = 0; j < k; ++j) {
      res.grad_logits[r * k + j] = (probs[r * k + j] - labels[r * k + j]) * inv_n;
    }
  }
  res.loss = static_cast<T>(total / static_cast<double>(n));
  return res;
}

template <typename T>
Tensor<T> one_hot(const std::vector<int>& classes, std::size_t num_classes) {
  Tensor<T> out(Shape{classes.size(), num_classes});
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const int c = classes[i];
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw InvalidArgument("class index " + std::to_string(c) + " out of range");
    }
    out[i * num_classes + static_cast<std::size_t>(c)] = T(1);
  }
  return out;
}

template LossResult<float> cross_entropy_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> cross_entropy_loss(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> one_hot(const std::vector<int>&, std::size_t);
template Tensor<double> one_hot(const std::vector<int>&, std::size_t);

}  // namespace ctcv
