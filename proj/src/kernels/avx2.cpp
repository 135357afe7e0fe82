// AVX2 + FMA kernels. This translation unit is the only one compiled with
// -mavx2 -mfma; dispatch.cpp only hands these out after a CPUID check.

#include <immintrin.h>

#include <vector>

#include "variants.hpp"

namespace ctcv::kernels::detail {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr std::size_t width = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_ps(a, b); }
  static reg max(reg a, reg b) { return _mm256_max_ps(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_ps(a); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg gt_mask(reg a, reg b) { return _mm256_cmp_ps(a, b, _CMP_GT_OQ); }
  static reg bit_and(reg a, reg b) { return _mm256_and_ps(a, b); }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_pd(a, b); }
  static reg max(reg a, reg b) { return _mm256_max_pd(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_pd(a); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg gt_mask(reg a, reg b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
  static reg bit_and(reg a, reg b) { return _mm256_and_pd(a, b); }
};

// Register-blocked tile: ROWS rows of C by two vectors of columns, held in
// registers across the whole k loop.
template <typename T, int ROWS>
inline void tile_2v(std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  typename V::reg acc0[ROWS];
  typename V::reg acc1[ROWS];
  for (int r = 0; r < ROWS; ++r) {
    acc0[r] = V::zero();
    acc1[r] = V::zero();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const auto b0 = V::load(b + p * n);
    const auto b1 = V::load(b + p * n + W);
    for (int r = 0; r < ROWS; ++r) {
      const auto av = V::set1(a[r * k + p]);
      acc0[r] = V::fmadd(av, b0, acc0[r]);
      acc1[r] = V::fmadd(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < ROWS; ++r) {
    T* crow = c + r * n;
    if (accumulate) {
      acc0[r] = V::add(acc0[r], V::load(crow));
      acc1[r] = V::add(acc1[r], V::load(crow + W));
    }
    V::store(crow, acc0[r]);
    V::store(crow + W, acc1[r]);
  }
}

template <typename T, int ROWS>
inline void tile_1v(std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  using V = Vec<T>;
  typename V::reg acc[ROWS];
  for (int r = 0; r < ROWS; ++r) acc[r] = V::zero();
  for (std::size_t p = 0; p < k; ++p) {
    const auto b0 = V::load(b + p * n);
    for (int r = 0; r < ROWS; ++r) acc[r] = V::fmadd(V::set1(a[r * k + p]), b0, acc[r]);
  }
  for (int r = 0; r < ROWS; ++r) {
    T* crow = c + r * n;
    if (accumulate) acc[r] = V::add(acc[r], V::load(crow));
    V::store(crow, acc[r]);
  }
}

template <typename T, int ROWS>
inline void tile_scalar_col(std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                            bool accumulate) {
  T acc[ROWS] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const T bv = b[p * n];
    for (int r = 0; r < ROWS; ++r) acc[r] += a[r * k + p] * bv;
  }
  for (int r = 0; r < ROWS; ++r) c[r * n] = accumulate ? c[r * n] + acc[r] : acc[r];
}

template <typename T, int ROWS>
void row_block(std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  constexpr std::size_t W = Vec<T>::width;
  std::size_t j = 0;
  for (; j + 2 * W <= n; j += 2 * W) tile_2v<T, ROWS>(n, k, a, b + j, c + j, accumulate);
  for (; j + W <= n; j += W) tile_1v<T, ROWS>(n, k, a, b + j, c + j, accumulate);
  for (; j < n; ++j) tile_scalar_col<T, ROWS>(n, k, a, b + j, c + j, accumulate);
}

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) row_block<T, 4>(n, k, a + i * k, b, c + i * n, accumulate);
  for (; i < m; ++i) row_block<T, 1>(n, k, a + i * k, b, c + i * n, accumulate);
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n);

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  std::vector<T> packed_b;
  if (trans_b) {
    packed_b.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) packed_b[p * n + j] = b[j * k + p];
    b = packed_b.data();
  }
  if (trans_a) {
    // Rank-1 updates keep C (typically a small weight gradient) in cache
    // while streaming the long k dimension.
    if (!accumulate) {
      for (std::size_t i = 0; i < m * n; ++i) c[i] = T(0);
    }
    for (std::size_t p = 0; p < k; ++p) {
      const T* arow = a + p * m;
      const T* brow = b + p * n;
      for (std::size_t i = 0; i < m; ++i) axpy<T>(arow[i], brow, c + i * n, n);
    }
    return;
  }
  gemm_nn(m, n, k, a, b, c, accumulate);
}

template <typename T, typename VecOp, typename ScalarOp>
inline void binary(const T* a, const T* b, T* out, std::size_t n, VecOp vop, ScalarOp sop) {
  using V = Vec<T>;
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) V::store(out + i, vop(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = sop(a[i], b[i]);
}

template <typename T>
void add(const T* a, const T* b, T* out, std::size_t n) {
  binary(a, b, out, n, Vec<T>::add, [](T x, T y) { return x + y; });
}

template <typename T>
void sub(const T* a, const T* b, T* out, std::size_t n) {
  binary(a, b, out, n, Vec<T>::sub, [](T x, T y) { return x - y; });
}

template <typename T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
  binary(a, b, out, n, Vec<T>::mul, [](T x, T y) { return x * y; });
}

template <typename T>
void add_scalar(const T* a, T s, T* out, std::size_t n) {
  using V = Vec<T>;
  const auto sv = V::set1(s);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) V::store(out + i, V::add(V::load(a + i), sv));
  for (; i < n; ++i) out[i] = a[i] + s;
}

template <typename T>
void mul_scalar(const T* a, T s, T* out, std::size_t n) {
  using V = Vec<T>;
  const auto sv = V::set1(s);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) V::store(out + i, V::mul(V::load(a + i), sv));
  for (; i < n; ++i) out[i] = a[i] * s;
}

template <typename T>
void max_scalar(const T* a, T s, T* out, std::size_t n) {
  using V = Vec<T>;
  const auto sv = V::set1(s);
  std::size_t i = 0;
  // vmaxps(a, s) computes a > s ? a : s, same as the reference for NaN input.
  for (; i + V::width <= n; i += V::width) V::store(out + i, V::max(V::load(a + i), sv));
  for (; i < n; ++i) out[i] = a[i] > s ? a[i] : s;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  using V = Vec<T>;
  const auto av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width)
    V::store(y + i, V::fmadd(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void relu_backward(const T* x, const T* dy, T* dx, std::size_t n) {
  using V = Vec<T>;
  const auto z = V::zero();
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width)
    V::store(dx + i, V::bit_and(V::gt_mask(V::load(x + i), z), V::load(dy + i)));
  for (; i < n; ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
}

template <typename T>
void sum_rows(const T* rows, std::size_t m, std::size_t n, T* out) {
  using V = Vec<T>;
  std::size_t j = 0;
  for (; j + V::width <= n; j += V::width) {
    auto acc = V::load(out + j);
    for (std::size_t i = 0; i < m; ++i) acc = V::add(acc, V::load(rows + i * n + j));
    V::store(out + j, acc);
  }
  for (; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) out[j] += rows[i * n + j];
  }
}

template <typename T>
void adam_update(T* param, const T* grad, T* m, T* v, std::size_t n, const AdamStep<T>& s) {
  using V = Vec<T>;
  const auto b1 = V::set1(s.beta1);
  const auto b2 = V::set1(s.beta2);
  const auto one_b1 = V::set1(T(1) - s.beta1);
  const auto one_b2 = V::set1(T(1) - s.beta2);
  const auto bc1 = V::set1(s.bias_correction1);
  const auto bc2 = V::set1(s.bias_correction2);
  const auto lr = V::set1(s.lr);
  const auto eps = V::set1(s.epsilon);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) {
    const auto g = V::load(grad + i);
    const auto mv = V::add(V::mul(b1, V::load(m + i)), V::mul(one_b1, g));
    const auto vv = V::add(V::mul(b2, V::load(v + i)), V::mul(V::mul(one_b2, g), g));
    V::store(m + i, mv);
    V::store(v + i, vv);
    const auto m_hat = V::div(mv, bc1);
    const auto v_hat = V::div(vv, bc2);
    const auto step = V::div(V::mul(lr, m_hat), V::add(V::sqrt(v_hat), eps));
    V::store(param + i, V::sub(V::load(param + i), step));
  }
  for (; i < n; ++i) {
    const T g = grad[i];
    m[i] = s.beta1 * m[i] + (T(1) - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (T(1) - s.beta2) * g * g;
    const T m_hat = m[i] / s.bias_correction1;
    const T v_hat = v[i] / s.bias_correction2;
    param[i] -= s.lr * m_hat / (__builtin_sqrt(v_hat) + s.epsilon);
  }
}

template <typename T>
KernelSet<T> make_set() {
  return KernelSet<T>{"avx2",          &gemm<T>,       &add<T>,  &sub<T>,
                      &mul<T>,         &add_scalar<T>, &mul_scalar<T>,
                      &max_scalar<T>,  &axpy<T>,       &relu_backward<T>,
                      &sum_rows<T>,    &adam_update<T>};
}

}  // namespace

template <typename T>
const KernelSet<T>& avx2_set() {
  static const KernelSet<T> set = make_set<T>();
  return set;
}

template const KernelSet<float>& avx2_set<float>();
template const KernelSet<double>& avx2_set<double>();

}  // namespace ctcv::kernels::detail
