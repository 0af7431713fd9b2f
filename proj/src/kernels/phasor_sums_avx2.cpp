// SPDX-License-Identifier: Apache-2.0
// Built with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "risloc/kernels.hpp"

namespace risloc::kernels {

void phasor_sums_avx2(const PhasorSumInput& in) {
  const int K = in.n_weights + 1;
  const int N = in.n_terms;
  const int R = in.n_elements;
  // Lane-wise partial sums, four doubles per output entry.
  std::vector<double> acc_re(4 * static_cast<size_t>(K) * N, 0.0);
  std::vector<double> acc_im(4 * static_cast<size_t>(K) * N, 0.0);
  double* are = acc_re.data();
  double* aim = acc_im.data();
  __m256d w[16];
  if (K - 1 > 16) throw std::invalid_argument("phasor_sums_avx2: at most 16 weight rows");

  alignas(32) double pad[4 * 4];
  alignas(32) double padw[4];
  for (int r0 = 0; r0 < R; r0 += 4) {
    __m256d pr, pi, zr, zi;
    const int cnt = std::min(4, R - r0);
    if (cnt == 4) {
      pr = _mm256_loadu_pd(in.coef_re + r0);
      pi = _mm256_loadu_pd(in.coef_im + r0);
      zr = _mm256_loadu_pd(in.step_re + r0);
      zi = _mm256_loadu_pd(in.step_im + r0);
      for (int k = 1; k < K; ++k) w[k - 1] = _mm256_loadu_pd(in.weights + (k - 1) * R + r0);
    } else {
      std::fill(pad, pad + 16, 0.0);
      for (int i = 0; i < cnt; ++i) {
        pad[i] = in.coef_re[r0 + i];
        pad[4 + i] = in.coef_im[r0 + i];
        pad[8 + i] = in.step_re[r0 + i];
        pad[12 + i] = in.step_im[r0 + i];
      }
      pr = _mm256_load_pd(pad);
      pi = _mm256_load_pd(pad + 4);
      zr = _mm256_load_pd(pad + 8);
      zi = _mm256_load_pd(pad + 12);
      for (int k = 1; k < K; ++k) {
        std::fill(padw, padw + 4, 0.0);
        for (int i = 0; i < cnt; ++i) padw[i] = in.weights[(k - 1) * R + r0 + i];
        w[k - 1] = _mm256_load_pd(padw);
      }
    }
    for (int n = 0; n < N; ++n) {
      _mm256_storeu_pd(are + 4 * n, _mm256_add_pd(_mm256_loadu_pd(are + 4 * n), pr));
      _mm256_storeu_pd(aim + 4 * n, _mm256_add_pd(_mm256_loadu_pd(aim + 4 * n), pi));
      for (int k = 1; k < K; ++k) {
        const size_t idx = 4 * (static_cast<size_t>(k) * N + n);
        _mm256_storeu_pd(are + idx, _mm256_fmadd_pd(w[k - 1], pr, _mm256_loadu_pd(are + idx)));
        _mm256_storeu_pd(aim + idx, _mm256_fmadd_pd(w[k - 1], pi, _mm256_loadu_pd(aim + idx)));
      }
      const __m256d t = _mm256_fmsub_pd(pr, zr, _mm256_mul_pd(pi, zi));
      pi = _mm256_fmadd_pd(pr, zi, _mm256_mul_pd(pi, zr));
      pr = t;
    }
  }

  for (size_t idx = 0; idx < static_cast<size_t>(K) * N; ++idx) {
    const double* a = are + 4 * idx;
    const double* b = aim + 4 * idx;
    in.out_re[idx] = (a[0] + a[1]) + (a[2] + a[3]);
    in.out_im[idx] = (b[0] + b[1]) + (b[2] + b[3]);
  }
}

}  // namespace risloc::kernels
