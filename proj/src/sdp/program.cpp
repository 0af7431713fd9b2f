// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <set>
#include <stdexcept>

#include "risloc/sdp.hpp"
#include "sdp_internal.hpp"

namespace risloc::sdp {

const char* status_name(SolverStatus s) {
  switch (s) {
    case SolverStatus::optimal: return "optimal";
    case SolverStatus::max_iter: return "max_iter";
    case SolverStatus::infeasible: return "infeasible";
    case SolverStatus::unbounded: return "unbounded";
    case SolverStatus::stalled: return "stalled";
  }
  return "unknown";
}

LinearFunctional& LinearFunctional::add(int block, const CMat& coeff) {
  terms.push_back({block, coeff});
  return *this;
}

double LinearFunctional::evaluate(const std::vector<CMat>& x) const {
  double v = 0.0;
  for (const Term& t : terms) v += (t.coeff.conjugate().cwiseProduct(x.at(t.block))).sum().real();
  return v;
}

PsdConstraint PsdConstraint::variable(int block) {
  PsdConstraint c;
  c.block = block;
  return c;
}

PsdConstraint PsdConstraint::affine(const RMat& constant) {
  PsdConstraint c;
  c.constant = constant;
  return c;
}

PsdConstraint& PsdConstraint::add(const LinearFunctional& f, const RMat& basis) {
  terms.push_back({f, basis});
  return *this;
}

int ConeProgram::add_block(const std::string& name, int dim, BlockKind kind) {
  if (dim < 1) throw std::invalid_argument("variable block dimension must be positive");
  blocks.push_back({name, dim, kind});
  return static_cast<int>(blocks.size()) - 1;
}

int ConeProgram::psd_dim(int k) const {
  const PsdConstraint& c = psd.at(k);
  if (c.block >= 0) {
    const VariableBlock& b = blocks.at(c.block);
    return b.kind == BlockKind::hermitian ? 2 * b.dim : b.dim;
  }
  return static_cast<int>(c.constant.rows());
}

void ConeProgram::validate() const {
  auto check_functional = [&](const LinearFunctional& f, const char* where) {
    for (const auto& t : f.terms) {
      if (t.block < 0 || t.block >= static_cast<int>(blocks.size()))
        throw std::invalid_argument(std::string(where) + ": functional references an undeclared block");
      const int d = blocks[t.block].dim;
      if (t.coeff.rows() != d || t.coeff.cols() != d)
        throw std::invalid_argument(std::string(where) + ": coefficient size differs from its block");
    }
  };
  check_functional(objective, "objective");
  for (const Equality& e : equalities) check_functional(e.f, "equality");
  std::set<int> plain_blocks;
  for (const PsdConstraint& c : psd) {
    if (c.block >= 0) {
      if (c.block >= static_cast<int>(blocks.size())) throw std::invalid_argument("PSD constraint: undeclared block");
      if (!plain_blocks.insert(c.block).second)
        throw std::invalid_argument("PSD constraint: a variable block may be constrained PSD only once");
      continue;
    }
    const Eigen::Index d = c.constant.rows();
    if (d < 1 || c.constant.cols() != d) throw std::invalid_argument("PSD constraint: constant must be square");
    for (const auto& t : c.terms) {
      check_functional(t.f, "PSD constraint");
      if (t.basis.rows() != d || t.basis.cols() != d)
        throw std::invalid_argument("PSD constraint: basis size differs from constant");
    }
  }
}

RMat embed_hermitian(const CMat& h) {
  const Eigen::Index n = h.rows();
  RMat e(2 * n, 2 * n);
  e.topLeftCorner(n, n) = h.real();
  e.bottomRightCorner(n, n) = h.real();
  e.topRightCorner(n, n) = -h.imag();
  e.bottomLeftCorner(n, n) = h.imag();
  return e;
}

CMat extract_hermitian(const RMat& e) {
  const Eigen::Index n = e.rows() / 2;
  if (e.rows() != 2 * n || e.cols() != e.rows()) throw std::invalid_argument("extract_hermitian: size must be even");
  const RMat re = 0.5 * (e.topLeftCorner(n, n) + e.bottomRightCorner(n, n));
  const RMat im = 0.5 * (e.bottomLeftCorner(n, n) - e.topRightCorner(n, n));
  CMat h(n, n);
  h.real() = re;
  h.imag() = im;
  return h;
}

std::vector<int> block_offsets(const ConeProgram& prog) {
  std::vector<int> off;
  int m = 0;
  for (const VariableBlock& b : prog.blocks) {
    off.push_back(m);
    m += b.kind == BlockKind::hermitian ? b.dim * b.dim : b.dim * (b.dim + 1) / 2;
  }
  off.push_back(m);
  return off;
}

namespace detail {

int upper_index(int n, int i, int j) { return i * n - i * (i + 1) / 2 + (j - i - 1); }

RVec functional_row(const ConeProgram& prog, const std::vector<int>& off, const LinearFunctional& f) {
  RVec row = RVec::Zero(off.back());
  for (const auto& t : f.terms) {
    const VariableBlock& b = prog.blocks[t.block];
    const int n = b.dim, o = off[t.block];
    const CMat h = 0.5 * (t.coeff + t.coeff.adjoint());
    for (int i = 0; i < n; ++i) row[o + i] += h(i, i).real();
    const int pairs = n * (n - 1) / 2;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const int u = upper_index(n, i, j);
        row[o + n + u] += 2.0 * h(i, j).real();
        if (b.kind == BlockKind::hermitian) row[o + n + pairs + u] += 2.0 * h(i, j).imag();
      }
  }
  return row;
}

}  // namespace detail

std::vector<CMat> unpack_blocks(const ConeProgram& prog, const RVec& y) {
  const std::vector<int> off = block_offsets(prog);
  std::vector<CMat> out;
  for (size_t b = 0; b < prog.blocks.size(); ++b) {
    const int n = prog.blocks[b].dim, o = off[b];
    const bool herm = prog.blocks[b].kind == BlockKind::hermitian;
    const int pairs = n * (n - 1) / 2;
    CMat x = CMat::Zero(n, n);
    for (int i = 0; i < n; ++i) x(i, i) = y[o + i];
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const int u = detail::upper_index(n, i, j);
        const cd v(y[o + n + u], herm ? y[o + n + pairs + u] : 0.0);
        x(i, j) = v;
        x(j, i) = std::conj(v);
      }
    out.push_back(x);
  }
  return out;
}

StandardForm lower(const ConeProgram& prog) {
  prog.validate();
  const std::vector<int> off = block_offsets(prog);
  StandardForm sf;
  sf.m = off.back();
  sf.c = detail::functional_row(prog, off, prog.objective);
  sf.c0 = prog.objective_offset;
  sf.e.resize(static_cast<Eigen::Index>(prog.equalities.size()), sf.m);
  sf.f.resize(static_cast<Eigen::Index>(prog.equalities.size()));
  for (size_t i = 0; i < prog.equalities.size(); ++i) {
    sf.e.row(i) = detail::functional_row(prog, off, prog.equalities[i].f).transpose();
    sf.f[i] = prog.equalities[i].rhs;
  }
  for (const PsdConstraint& c : prog.psd) {
    StandardForm::Block blk;
    if (c.block >= 0) {
      blk.plain = true;
      blk.p.n = prog.blocks[c.block].dim;
      blk.p.hermitian = prog.blocks[c.block].kind == BlockKind::hermitian;
      blk.p.offset = off[c.block];
    } else {
      blk.plain = false;
      blk.a.constant = 0.5 * (c.constant + c.constant.transpose());
      blk.a.t.resize(static_cast<Eigen::Index>(c.terms.size()), sf.m);
      for (size_t j = 0; j < c.terms.size(); ++j) {
        blk.a.basis.push_back(0.5 * (c.terms[j].basis + c.terms[j].basis.transpose()));
        blk.a.t.row(j) = detail::functional_row(prog, off, c.terms[j].f).transpose();
      }
    }
    sf.blocks.push_back(std::move(blk));
  }
  return sf;
}

RMat psd_value(const ConeProgram& prog, int k, const std::vector<CMat>& x) {
  const PsdConstraint& c = prog.psd.at(k);
  if (c.block >= 0) {
    const CMat& v = x.at(c.block);
    if (prog.blocks[c.block].kind == BlockKind::hermitian) return embed_hermitian(0.5 * (v + v.adjoint()));
    return 0.5 * (v.real() + v.real().transpose());
  }
  RMat out = c.constant;
  for (const auto& t : c.terms) out += t.f.evaluate(x) * t.basis;
  return 0.5 * (out + out.transpose());
}

namespace {

double min_eig(const RMat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<RMat> e(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return e.eigenvalues().minCoeff();
}

CMat herm_part(const CMat& c) { return 0.5 * (c + c.adjoint()); }

CMat projected(const CMat& c, BlockKind kind) {
  CMat h = herm_part(c);
  if (kind == BlockKind::symmetric) h = h.real().cast<cd>();
  return h;
}

}  // namespace

KktResiduals kkt_residuals(const ConeProgram& prog, const Assignment& a) {
  prog.validate();
  const size_t nb = prog.blocks.size();
  if (a.blocks.size() != nb || a.psd_duals.size() != prog.psd.size() ||
      a.eq_duals.size() != static_cast<Eigen::Index>(prog.equalities.size()))
    throw std::invalid_argument("kkt_residuals: assignment does not match the program");

  // Primal: equality violation and negative curvature of every PSD expression.
  double rhs_norm = 0.0, eq_viol = 0.0;
  for (const Equality& e : prog.equalities) {
    const double r = e.f.evaluate(a.blocks) - e.rhs;
    eq_viol += r * r;
    rhs_norm += e.rhs * e.rhs;
  }
  double primal = std::sqrt(eq_viol) / (1.0 + std::sqrt(rhs_norm));
  std::vector<RMat> values;
  for (size_t k = 0; k < prog.psd.size(); ++k) {
    values.push_back(psd_value(prog, static_cast<int>(k), a.blocks));
    const double scale = prog.psd[k].block >= 0 ? 0.0 : prog.psd[k].constant.norm();
    primal = std::max(primal, std::max(0.0, -min_eig(values.back())) / (1.0 + scale));
  }

  // Dual: stationarity in matrix space for every block, and dual PSD-ness.
  std::vector<CMat> resid(nb);
  double c_norm2 = 0.0;
  for (size_t b = 0; b < nb; ++b) resid[b] = CMat::Zero(prog.blocks[b].dim, prog.blocks[b].dim);
  for (const auto& t : prog.objective.terms) resid[t.block] += projected(t.coeff, prog.blocks[t.block].kind);
  for (size_t b = 0; b < nb; ++b) c_norm2 += resid[b].squaredNorm();
  for (size_t e = 0; e < prog.equalities.size(); ++e)
    for (const auto& t : prog.equalities[e].f.terms)
      resid[t.block] -= a.eq_duals[e] * projected(t.coeff, prog.blocks[t.block].kind);
  double dual_psd = 0.0;
  for (size_t k = 0; k < prog.psd.size(); ++k) {
    const PsdConstraint& c = prog.psd[k];
    const RMat& xk = a.psd_duals[k];
    if (xk.rows() != prog.psd_dim(static_cast<int>(k))) throw std::invalid_argument("kkt_residuals: dual size");
    dual_psd = std::max(dual_psd, std::max(0.0, -min_eig(xk)) / (1.0 + xk.norm()));
    if (c.block >= 0) {
      const int n = prog.blocks[c.block].dim;
      if (prog.blocks[c.block].kind == BlockKind::hermitian) {
        CMat g(n, n);
        g.real() = xk.topLeftCorner(n, n) + xk.bottomRightCorner(n, n);
        g.imag() = xk.bottomLeftCorner(n, n) - xk.topRightCorner(n, n);
        resid[c.block] -= herm_part(g);
      } else {
        resid[c.block] -= (0.5 * (xk + xk.transpose())).cast<cd>();
      }
      continue;
    }
    for (const auto& t : c.terms) {
      const double w = (t.basis.cwiseProduct(xk)).sum();
      for (const auto& ft : t.f.terms) resid[ft.block] -= w * projected(ft.coeff, prog.blocks[ft.block].kind);
    }
  }
  double r2 = 0.0;
  for (const CMat& r : resid) r2 += r.squaredNorm();
  const double dual = std::max(std::sqrt(r2) / (1.0 + std::sqrt(c_norm2)), dual_psd);

  // Gap: objective difference and complementarity.
  const double pobj = prog.objective.evaluate(a.blocks) + prog.objective_offset;
  double dobj = prog.objective_offset, compl_ = 0.0;
  for (size_t e = 0; e < prog.equalities.size(); ++e) dobj += a.eq_duals[e] * prog.equalities[e].rhs;
  for (size_t k = 0; k < prog.psd.size(); ++k) {
    if (prog.psd[k].block < 0) dobj -= prog.psd[k].constant.cwiseProduct(a.psd_duals[k]).sum();
    compl_ += values[k].cwiseProduct(a.psd_duals[k]).sum();
  }
  const double gap = std::max(std::abs(pobj - dobj), std::abs(compl_)) / (1.0 + std::abs(pobj) + std::abs(dobj));
  return {primal, dual, gap};
}

Solution solve(const ConeProgram& prog, const SolverOptions& opts) {
  const StandardForm sf = lower(prog);
  auto to_assignment = [&](const RVec& y, const std::vector<RMat>& x, const RVec& lambda) {
    Assignment a;
    a.blocks = unpack_blocks(prog, y);
    a.psd_duals = x;
    a.eq_duals = lambda;
    return a;
  };
  const ResidualFn residuals = [&](const RVec& y, const std::vector<RMat>& x, const RVec& lambda) {
    return kkt_residuals(prog, to_assignment(y, x, lambda));
  };
  StandardSolution ss = solve_standard(sf, opts, residuals);
  Solution out;
  out.x = to_assignment(ss.y, ss.x, ss.lambda);
  out.report = ss.report;
  return out;
}

}  // namespace risloc::sdp

namespace risloc::sdp::detail {

CMat plain_matrix(const StandardForm::Plain& p, const double* y) {
  const int n = p.n, pairs = n * (n - 1) / 2;
  CMat x(n, n);
  for (int i = 0; i < n; ++i) x(i, i) = y[i];
  int u = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++u) {
      const cd v(y[n + u], p.hermitian ? y[n + pairs + u] : 0.0);
      x(i, j) = v;
      x(j, i) = std::conj(v);
    }
  return x;
}

void plain_adjoint(const StandardForm::Plain& p, const CMat& x, double* out, double scale) {
  const int n = p.n, pairs = n * (n - 1) / 2;
  for (int i = 0; i < n; ++i) out[i] += scale * x(i, i).real();
  int u = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++u) {
      out[n + u] += scale * (x(i, j).real() + x(j, i).real());
      if (p.hermitian) out[n + pairs + u] += scale * (x(i, j).imag() - x(j, i).imag());
    }
}

RVec plain_weights(const StandardForm::Plain& p) {
  RVec w = RVec::Constant(p.count(), 2.0);
  w.head(p.n).setOnes();
  return w;
}

void isometric_vector(const CMat& x, double* out) {
  const Eigen::Index n = x.rows();
  const Eigen::Index pairs = n * (n - 1) / 2;
  const double r2 = std::sqrt(2.0);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = x(i, i).real();
  Eigen::Index u = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j, ++u) {
      const cd v = 0.5 * (x(i, j) + std::conj(x(j, i)));
      out[n + u] = r2 * v.real();
      out[n + pairs + u] = r2 * v.imag();
    }
}

CMat to_internal(const StandardForm::Block& b, const RMat& x, bool dual) {
  if (b.plain && b.p.hermitian) {
    const int n = b.p.n;
    if (x.rows() != 2 * n || x.cols() != 2 * n) throw std::invalid_argument("embedded block has the wrong size");
    CMat h(n, n);
    h.real() = x.topLeftCorner(n, n) + x.bottomRightCorner(n, n);
    h.imag() = x.bottomLeftCorner(n, n) - x.topRightCorner(n, n);
    // A dual is the adjoint image (sum of both copies); a slack is the matrix itself.
    return dual ? CMat(0.5 * (h + h.adjoint())) : CMat(0.25 * (h + h.adjoint()));
  }
  return x.cast<cd>();
}

RMat to_public(const StandardForm::Block& b, const CMat& x, bool dual) {
  if (b.plain && b.p.hermitian) return dual ? RMat(0.5 * embed_hermitian(x)) : embed_hermitian(x);
  return x.real();
}

}  // namespace risloc::sdp::detail
