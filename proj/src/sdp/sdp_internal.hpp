// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "risloc/sdp.hpp"

namespace risloc::sdp::detail {

// Position of the strictly upper pair (i, j), i < j, in row-major order.
int upper_index(int n, int i, int j);

RVec functional_row(const ConeProgram& prog, const std::vector<int>& off, const LinearFunctional& f);

// Variable-block parametrization: diagonal, then Re of the strict upper triangle, then
// (hermitian only) Im of the strict upper triangle.
CMat plain_matrix(const StandardForm::Plain& p, const double* y);
// out += scale * adjoint(x), with adjoint taken for <X, Y> = Re tr(X^H Y).
void plain_adjoint(const StandardForm::Plain& p, const CMat& x, double* out, double scale = 1.0);
// Diagonal of adjoint(plain_matrix(.)).
RVec plain_weights(const StandardForm::Plain& p);
// Real vector v with v(X).v(Y) = Re tr(X Y) for Hermitian X, Y.
void isometric_vector(const CMat& x, double* out);

// Public dual/slack matrices embed hermitian variable blocks; internally they are complex n x n.
CMat to_internal(const StandardForm::Block& b, const RMat& x, bool dual);
RMat to_public(const StandardForm::Block& b, const CMat& x, bool dual);

}  // namespace risloc::sdp::detail
