#include <cstdlib>
#include <string>

#include "sgrf/error.hpp"
#include "sgrf/simd/kernels.hpp"

namespace sgrf::simd {

#ifdef SGRF_HAVE_AVX2
const Kernels& avx2_kernel_table();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(SGRF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels* initial_selection() {
  const Kernels* best = avx2_kernels();
  if (const char* env = std::getenv("SGRF_SIMD")) {
    const std::string choice(env);
    if (choice == "scalar") return &scalar_kernels();
    if (choice == "avx2" && best == nullptr) throw ConfigError("SGRF_SIMD=avx2 but AVX2 is unavailable");
  }
  return best ? best : &scalar_kernels();
}

const Kernels*& current() {
  static const Kernels* k = initial_selection();
  return k;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

const Kernels* avx2_kernels() {
#ifdef SGRF_HAVE_AVX2
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

const Kernels& active() { return *current(); }

void set_active(Isa isa) {
  if (isa == Isa::Scalar) {
    current() = &scalar_kernels();
    return;
  }
  const Kernels* k = avx2_kernels();
  if (!k) throw ConfigError("AVX2 kernels are unavailable on this build or CPU");
  current() = k;
}

}  // namespace sgrf::simd
