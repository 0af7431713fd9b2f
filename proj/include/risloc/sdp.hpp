// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "risloc/types.hpp"

namespace risloc::sdp {

enum class BlockKind { symmetric, hermitian };

struct VariableBlock {
  std::string name;
  int dim = 0;
  BlockKind kind = BlockKind::symmetric;
};

// sum_b <C_b, X_b> with <C, X> = Re tr(C^H X); only the Hermitian part of C matters.
struct LinearFunctional {
  struct Term {
    int block;
    CMat coeff;
  };
  std::vector<Term> terms;

  LinearFunctional& add(int block, const CMat& coeff);
  double evaluate(const std::vector<CMat>& x) const;
};

struct Equality {
  LinearFunctional f;
  double rhs = 0.0;
};

// Either a variable block required PSD (block >= 0), or the real symmetric expression
// constant + sum_j f_j(X) basis_j required PSD (block < 0).
struct PsdConstraint {
  struct Term {
    LinearFunctional f;
    RMat basis;
  };
  int block = -1;
  RMat constant;
  std::vector<Term> terms;

  static PsdConstraint variable(int block);
  static PsdConstraint affine(const RMat& constant);
  PsdConstraint& add(const LinearFunctional& f, const RMat& basis);
};

struct ConeProgram {
  std::vector<VariableBlock> blocks;
  LinearFunctional objective;
  double objective_offset = 0.0;
  std::vector<Equality> equalities;
  std::vector<PsdConstraint> psd;

  int add_block(const std::string& name, int dim, BlockKind kind);
  void validate() const;
  // Dimension of PSD constraint k (hermitian variable blocks count twice).
  int psd_dim(int k) const;
};

struct Assignment {
  std::vector<CMat> blocks;
  std::vector<RMat> psd_duals;  // one per PSD constraint, real-embedded where hermitian
  RVec eq_duals;
};

enum class SolverStatus { optimal, max_iter, infeasible, unbounded, stalled };
const char* status_name(SolverStatus s);

struct SolverOptions {
  double tol = 1e-7;
  int max_iter = 200;
  bool verbose = false;
};

struct SolverReport {
  SolverStatus status = SolverStatus::max_iter;
  double objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  double seconds = 0.0;
};

struct KktResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
};

struct Solution {
  Assignment x;
  SolverReport report;
};

// Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix and its inverse.
RMat embed_hermitian(const CMat& h);
CMat extract_hermitian(const RMat& e);

// Value of PSD expression k at the primal blocks (real-embedded for hermitian variable blocks).
RMat psd_value(const ConeProgram& prog, int k, const std::vector<CMat>& x);

KktResiduals kkt_residuals(const ConeProgram& prog, const Assignment& a);
Solution solve(const ConeProgram& prog, const SolverOptions& opts = {});

// Real parametrized form: min c^T y + c0 s.t. E y = f and, per block, S_k(y) PSD, where
// S_k is either a variable block (parameters [offset, offset + count)) or C_k + sum_j (T_k y)_j B_kj.
struct StandardForm {
  struct Plain {
    int n = 0;
    bool hermitian = false;
    int offset = 0;
    int dim() const { return hermitian ? 2 * n : n; }
    int count() const { return hermitian ? n * n : n * (n + 1) / 2; }
  };
  struct Affine {
    RMat constant;
    std::vector<RMat> basis;
    RMat t;  // basis.size() x m
  };
  struct Block {
    bool plain = true;
    Plain p;
    Affine a;
    int dim() const { return plain ? p.dim() : static_cast<int>(a.constant.rows()); }
  };

  int m = 0;
  RVec c;
  double c0 = 0.0;
  RMat e;  // equality rows
  RVec f;
  std::vector<Block> blocks;
};

struct StandardSolution {
  RVec y;
  RVec lambda;
  std::vector<RMat> s;
  std::vector<RMat> x;
  SolverReport report;
};

StandardForm lower(const ConeProgram& prog);
// Parameter offsets of each variable block inside y.
std::vector<int> block_offsets(const ConeProgram& prog);
std::vector<CMat> unpack_blocks(const ConeProgram& prog, const RVec& y);

// Relative (primal, dual, gap) residuals of an iterate; used as the stopping test.
using ResidualFn = std::function<KktResiduals(const RVec& y, const std::vector<RMat>& x, const RVec& lambda)>;
KktResiduals standard_residuals(const StandardForm& sf, const RVec& y, const std::vector<RMat>& x,
                                const RVec& lambda);
StandardSolution solve_standard(const StandardForm& sf, const SolverOptions& opts = {},
                                const ResidualFn& residuals = {});

// Plain-text conic format "risloc-conic 1" (see README).
void write_conic(std::ostream& out, const StandardForm& sf);
StandardForm read_conic(std::istream& in);

}  // namespace risloc::sdp
