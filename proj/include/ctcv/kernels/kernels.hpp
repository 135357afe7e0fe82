#pragma once

// Flat-array inner loops behind every tensor op. Each variant (scalar
// reference, AVX2+FMA) fills one KernelSet; active_kernels() picks one at
// runtime from CPUID and the CTCV_KERNELS environment variable
// ("scalar", "avx2" or "auto").
//
// All variants are deterministic for a fixed input: reductions use a fixed
// lane/accumulation order that does not depend on threading or alignment.

#include <cstddef>
#include <string_view>

namespace ctcv::kernels {

template <typename T>
struct AdamStep {
  T lr;
  T beta1;
  T beta2;
  T epsilon;
  T bias_correction1;  // 1 - beta1^t
  T bias_correction2;  // 1 - beta2^t
};

template <typename T>
struct KernelSet {
  const char* name;

  // c[m x n] (+)= op(a) * op(b), all row-major and densely packed.
  // op(a) is m x k; a is stored k x m when trans_a. Likewise op(b) is k x n.
  void (*gemm)(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
               const T* a, const T* b, T* c, bool accumulate);

  void (*add)(const T* a, const T* b, T* out, std::size_t n);
  void (*sub)(const T* a, const T* b, T* out, std::size_t n);
  void (*mul)(const T* a, const T* b, T* out, std::size_t n);
  void (*add_scalar)(const T* a, T s, T* out, std::size_t n);
  void (*mul_scalar)(const T* a, T s, T* out, std::size_t n);
  void (*max_scalar)(const T* a, T s, T* out, std::size_t n);

  // y += alpha * x
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  // dx = dy where x > 0, else 0
  void (*relu_backward)(const T* x, const T* dy, T* dx, std::size_t n);
  // out[j] += sum_i rows[i * n + j] over m rows
  void (*sum_rows)(const T* rows, std::size_t m, std::size_t n, T* out);

  void (*adam_update)(T* param, const T* grad, T* m, T* v, std::size_t n, const AdamStep<T>& step);
};

template <typename T>
const KernelSet<T>& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks AVX2/FMA.
template <typename T>
const KernelSet<T>* avx2_kernels();

template <typename T>
const KernelSet<T>& active_kernels();

// Overrides the runtime choice ("scalar", "avx2", "auto"). Returns false if
// the requested variant is unavailable; the previous choice is then kept.
bool select_variant(std::string_view name);

std::string_view active_variant_name();

}  // namespace ctcv::kernels
