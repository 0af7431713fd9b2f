// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace risloc::kernels {

// out[k][n] = sum_r coef[r] * weight_k[r] * step[r]^n, with weight_0 = 1,
// for k in [0, n_weights] and n in [0, n_terms). Complex values split into re/im arrays.
struct PhasorSumInput {
  int n_elements = 0;
  int n_terms = 0;
  int n_weights = 0;  // at most 16 for the AVX2 variant
  const double* coef_re = nullptr;
  const double* coef_im = nullptr;
  const double* step_re = nullptr;
  const double* step_im = nullptr;
  const double* weights = nullptr;  // n_weights rows of n_elements
  double* out_re = nullptr;         // (n_weights + 1) rows of n_terms
  double* out_im = nullptr;
};

enum class Isa { scalar, avx2 };

void phasor_sums_scalar(const PhasorSumInput& in);
void phasor_sums_avx2(const PhasorSumInput& in);

const char* isa_name(Isa isa);
bool isa_supported(Isa isa);
// Best supported variant unless RISLOC_ISA=scalar is set in the environment.
Isa active_isa();
void set_active_isa(Isa isa);

void phasor_sums(const PhasorSumInput& in);

}  // namespace risloc::kernels
