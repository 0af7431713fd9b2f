// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "risloc/kernels.hpp"

namespace risloc::kernels {

void phasor_sums_scalar(const PhasorSumInput& in) {
  const int K = in.n_weights + 1;
  const int N = in.n_terms;
  std::fill(in.out_re, in.out_re + K * N, 0.0);
  std::fill(in.out_im, in.out_im + K * N, 0.0);
  for (int r = 0; r < in.n_elements; ++r) {
    double pr = in.coef_re[r], pi = in.coef_im[r];
    const double zr = in.step_re[r], zi = in.step_im[r];
    for (int n = 0; n < N; ++n) {
      in.out_re[n] += pr;
      in.out_im[n] += pi;
      for (int k = 1; k < K; ++k) {
        const double v = in.weights[(k - 1) * in.n_elements + r];
        in.out_re[k * N + n] += v * pr;
        in.out_im[k * N + n] += v * pi;
      }
      const double t = pr * zr - pi * zi;
      pi = pr * zi + pi * zr;
      pr = t;
    }
  }
}

}  // namespace risloc::kernels
