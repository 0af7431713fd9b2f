// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "risloc/kernels.hpp"

namespace risloc::kernels {

namespace {

Isa detect() {
  const char* env = std::getenv("RISLOC_ISA");
  if (env && std::strcmp(env, "scalar") == 0) return Isa::scalar;
  return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(RISLOC_HAVE_AVX2_KERNELS) && (defined(__x86_64__) || defined(__i386__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) throw std::invalid_argument(std::string("kernel variant not supported: ") + isa_name(isa));
  current().store(isa, std::memory_order_relaxed);
}

void phasor_sums(const PhasorSumInput& in) {
#if defined(RISLOC_HAVE_AVX2_KERNELS)
  if (active_isa() == Isa::avx2) return phasor_sums_avx2(in);
#endif
  phasor_sums_scalar(in);
}

}  // namespace risloc::kernels

#if !defined(RISLOC_HAVE_AVX2_KERNELS)
namespace risloc::kernels {
void phasor_sums_avx2(const PhasorSumInput&) { throw std::logic_error("AVX2 kernels not compiled in"); }
}  // namespace risloc::kernels
#endif
