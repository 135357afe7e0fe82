// Reference kernels. Plain loops in a fixed order; every SIMD variant is
// tested for equivalence against these.

#include <cmath>
#include <vector>

#include "variants.hpp"

namespace ctcv::kernels::detail {
namespace {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = T(0);
  }
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = trans_a ? a[p * m + i] : a[i * k + p];
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * b[j * k + p];
      } else {
        const T* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }
}

template <typename T>
void add(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void add_scalar(const T* a, T s, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + s;
}

template <typename T>
void mul_scalar(const T* a, T s, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

template <typename T>
void max_scalar(const T* a, T s, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > s ? a[i] : s;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void relu_backward(const T* x, const T* dy, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
}

template <typename T>
void sum_rows(const T* rows, std::size_t m, std::size_t n, T* out) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += rows[i * n + j];
  }
}

template <typename T>
void adam_update(T* param, const T* grad, T* m, T* v, std::size_t n, const AdamStep<T>& s) {
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grad[i];
    m[i] = s.beta1 * m[i] + (T(1) - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (T(1) - s.beta2) * g * g;
    const T m_hat = m[i] / s.bias_correction1;
    const T v_hat = v[i] / s.bias_correction2;
    param[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

template <typename T>
KernelSet<T> make_set() {
  return KernelSet<T>{"scalar",        &gemm<T>,       &add<T>,  &sub<T>,
                      &mul<T>,         &add_scalar<T>, &mul_scalar<T>,
                      &max_scalar<T>,  &axpy<T>,       &relu_backward<T>,
                      &sum_rows<T>,    &adam_update<T>};
}

}  // namespace

template <typename T>
const KernelSet<T>& scalar_set() {
  static const KernelSet<T> set = make_set<T>();
  return set;
}

template const KernelSet<float>& scalar_set<float>();
template const KernelSet<double>& scalar_set<double>();

}  // namespace ctcv::kernels::detail
