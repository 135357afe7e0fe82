#include <atomic>
#include <cstdlib>
#include <string>

#include "variants.hpp"

namespace ctcv::kernels {
namespace {

enum class Variant { scalar, avx2 };

bool cpu_has_avx2() {
#if defined(CTCV_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Variant initial_variant() {
  const bool avx2 = cpu_has_avx2();
  if (const char* env = std::getenv("CTCV_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Variant::scalar;
  }
  return avx2 ? Variant::avx2 : Variant::scalar;
}

std::atomic<Variant>& current() {
  static std::atomic<Variant> v{initial_variant()};
  return v;
}

}  // namespace

template <typename T>
const KernelSet<T>& scalar_kernels() {
  return detail::scalar_set<T>();
}

template <typename T>
const KernelSet<T>* avx2_kernels() {
#ifdef CTCV_HAVE_AVX2
  if (cpu_has_avx2()) return &detail::avx2_set<T>();
#endif
  return nullptr;
}

template <typename T>
const KernelSet<T>& active_kernels() {
  if (current().load(std::memory_order_relaxed) == Variant::avx2) {
    if (const auto* k = avx2_kernels<T>()) return *k;
  }
  return scalar_kernels<T>();
}

bool select_variant(std::string_view name) {
  if (name == "scalar") {
    current() = Variant::scalar;
    return true;
  }
  if (name == "avx2" || name == "auto") {
    if (!cpu_has_avx2()) return name == "auto" ? (current() = Variant::scalar, true) : false;
    current() = Variant::avx2;
    return true;
  }
  return false;
}

std::string_view active_variant_name() { return active_kernels<float>().name; }

template const KernelSet<float>& scalar_kernels<float>();
template const KernelSet<double>& scalar_kernels<double>();
template const KernelSet<float>* avx2_kernels<float>();
template const KernelSet<double>* avx2_kernels<double>();
template const KernelSet<float>& active_kernels<float>();
template const KernelSet<double>& active_kernels<double>();

}  // namespace ctcv::kernels
