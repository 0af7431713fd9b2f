// SPDX-License-Identifier: Apache-2.0
// Infeasible primal-dual interior-point method (NT direction, Mehrotra predictor-corrector)
// for   min c^T y + c0   s.t.   S_k = C_k + A_k(y) PSD,   E y = f.
//
// Variable blocks are kept as complex Hermitian n x n matrices. The Schur matrix
// H = H_p + T^T M T (H_p: variable blocks, T: stacked affine rows, M: affine Gram matrices)
// is never formed for large problems. In the eigenbasis of each NT scaling matrix H_p is
// diagonal, so H = D + L^T L with L = M^{1/2} T; the columns where L dominates D are
// eliminated through a dense Schur complement and the rest through a Woodbury identity.
// GMRES on the exact system cleans up whatever accuracy the factorization loses.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "risloc/sdp.hpp"
#include "sdp_internal.hpp"

namespace risloc::sdp {

namespace {

using detail::plain_adjoint;
using detail::plain_matrix;

constexpr double kInf = std::numeric_limits<double>::infinity();
// Above this many parameters the Schur matrix is only applied, never formed.
constexpr int kDenseLimit = 1500;
// Split threshold on |L_j|^2 / D_j and the largest Schur complement taken from variable blocks.
constexpr double kSplitRatio = 1e5;
constexpr int kSigmaCap = 2000;

CMat herm(const CMat& a) { return 0.5 * (a + a.adjoint()); }

double inner(const CMat& a, const CMat& b) { return (a.conjugate().cwiseProduct(b)).sum().real(); }

// Coefficient matrix of one linear row restricted to a variable block; low-rank rows keep
// an eigen-factorization C = V diag(s) V^H.
struct RowForm {
  bool used = false;
  bool dense = true;
  CMat c;
  RVec s;
  CMat v;
};

RowForm make_row_form(const StandardForm::Plain& p, const RVec& w, const double* row) {
  RowForm f;
  RVec scaled(p.count());
  bool any = false;
  for (int i = 0; i < p.count(); ++i) {
    scaled[i] = row[i] / w[i];
    any = any || row[i] != 0.0;
  }
  if (!any) return f;
  f.used = true;
  f.c = plain_matrix(p, scaled.data());
  if (p.n < 12) return f;
  Eigen::SelfAdjointEigenSolver<CMat> es(f.c);
  const RVec& ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  std::vector<int> keep;
  for (int i = 0; i < p.n; ++i)
    if (std::abs(ev[i]) > 1e-13 * top) keep.push_back(i);
  if (static_cast<int>(keep.size()) * 4 > p.n) return f;
  f.dense = false;
  f.s.resize(static_cast<Eigen::Index>(keep.size()));
  f.v.resize(p.n, static_cast<Eigen::Index>(keep.size()));
  for (size_t k = 0; k < keep.size(); ++k) {
    f.s[k] = ev[keep[k]];
    f.v.col(k) = es.eigenvectors().col(keep[k]);
  }
  f.c.resize(0, 0);
  return f;
}

// Isometric coordinates of a Hermitian (or real symmetric) matrix: diagonal, sqrt2 Re of
// the strict upper triangle, then sqrt2 Im when hermitian.
void hat_vector(const CMat& x, bool hermitian, double* out) {
  const Eigen::Index n = x.rows(), pairs = n * (n - 1) / 2;
  const double r2 = std::sqrt(2.0);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = x(i, i).real();
  Eigen::Index u = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j, ++u) {
      const cd v = 0.5 * (x(i, j) + std::conj(x(j, i)));
      out[n + u] = r2 * v.real();
      if (hermitian) out[n + pairs + u] = r2 * v.imag();
    }
}

CMat hat_matrix(int n, bool hermitian, const double* z) {
  const int pairs = n * (n - 1) / 2;
  const double s = 1.0 / std::sqrt(2.0);
  CMat x(n, n);
  for (int i = 0; i < n; ++i) x(i, i) = z[i];
  int u = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++u) {
      const cd v(s * z[n + u], hermitian ? s * z[n + pairs + u] : 0.0);
      x(i, j) = v;
      x(j, i) = std::conj(v);
    }
  return x;
}

struct Nt {
  CMat g, ginv, w, winv;
  RVec v;
};

bool nt_scaling(const CMat& s, const CMat& x, Nt& out) {
  Eigen::LLT<CMat> ls(s), lx(x);
  if (ls.info() != Eigen::Success || lx.info() != Eigen::Success) return false;
  const CMat lsm = ls.matrixL(), lxm = lx.matrixL();
  Eigen::BDCSVD<CMat> svd(lsm.adjoint() * lxm, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.v = svd.singularValues();
  if (!(out.v.minCoeff() > 0.0) || !out.v.allFinite()) return false;
  const RVec isq = out.v.cwiseSqrt().cwiseInverse();
  out.g = lxm * svd.matrixV() * isq.asDiagonal();
  const CMat g_inv_h = lsm * svd.matrixU() * isq.asDiagonal();
  out.ginv = g_inv_h.adjoint();
  out.w = herm(out.g * out.g.adjoint());
  out.winv = herm(g_inv_h * out.ginv);
  return true;
}

// Largest alpha with m + alpha*dm PSD (inf when dm does not point outward).
double max_step(const CMat& m, const CMat& dm) {
  Eigen::LLT<CMat> l(m);
  if (l.info() != Eigen::Success) return 0.0;
  CMat k = l.matrixL().solve(dm);
  k = l.matrixL().solve(k.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<CMat> es(herm(k), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  return lo < 0.0 ? -1.0 / lo : kInf;
}

// Right-preconditioned GMRES started from M^-1 b; returns the best iterate found.
template <class Op, class Pre>
RVec gmres(const Op& a, const Pre& m_inv, const RVec& b, double rel_tol, int max_iter) {
  const double bnorm = b.norm();
  RVec x = m_inv(b);
  if (!(bnorm > 0.0)) return x;
  RVec r = b - a(x);
  double beta = r.norm();
  if (!(beta > rel_tol * bnorm) || !std::isfinite(beta)) return x;
  const Eigen::Index n = b.size();
  const int k_max = std::max(1, max_iter);
  RMat v(n, k_max + 1), h = RMat::Zero(k_max + 1, k_max);
  RVec cs = RVec::Zero(k_max), sn = RVec::Zero(k_max), e = RVec::Zero(k_max + 1);
  v.col(0) = r / beta;
  e[0] = beta;
  int k = 0;
  for (; k < k_max; ++k) {
    RVec w = a(m_inv(v.col(k)));
    for (int i = 0; i <= k; ++i) {
      h(i, k) = v.col(i).dot(w);
      w -= h(i, k) * v.col(i);
    }
    for (int i = 0; i <= k; ++i) {  // second pass keeps the basis orthogonal
      const double c = v.col(i).dot(w);
      h(i, k) += c;
      w -= c * v.col(i);
    }
    h(k + 1, k) = w.norm();
    if (h(k + 1, k) > 0.0) v.col(k + 1) = w / h(k + 1, k);
    for (int i = 0; i < k; ++i) {
      const double t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
      h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
      h(i, k) = t;
    }
    const double den = std::hypot(h(k, k), h(k + 1, k));
    cs[k] = den > 0.0 ? h(k, k) / den : 1.0;
    sn[k] = den > 0.0 ? h(k + 1, k) / den : 0.0;
    h(k, k) = den;
    h(k + 1, k) = 0.0;
    e[k + 1] = -sn[k] * e[k];
    e[k] = cs[k] * e[k];
    if (std::abs(e[k + 1]) <= rel_tol * bnorm || h(k, k) == 0.0) {
      ++k;
      break;
    }
  }
  const RVec yk = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(e.head(k));
  x += m_inv(v.leftCols(k) * yk);
  return x;
}

class Solver {
 public:
  Solver(const StandardForm& sf, const SolverOptions& opts, const ResidualFn& residuals)
      : sf_(sf), opts_(opts), residuals_(residuals) {
    setup();
  }

  StandardSolution run();

 private:
  void setup();
  void initial_point();
  CMat affine_matrix(int k, const RVec& y) const;
  void affine_adjoint(int k, const CMat& x, RVec& out) const;
  CMat block_operator(int k, const RVec& y) const;  // A_k(y)
  RVec adjoint_sum(const std::vector<CMat>& x) const;
  bool factor();
  RMat to_hat(const RMat& b) const;
  RMat from_hat(const RMat& z) const;
  RMat hat_solve(const RMat& b) const;
  RVec solve_h(const RVec& b) const;
  RVec apply_h(const RVec& v) const;
  void direction(const std::vector<CMat>& tk, RVec& dy, RVec& dl, std::vector<CMat>& ds,
                 std::vector<CMat>& dx) const;
  KktResiduals evaluate(const RVec& y, const std::vector<CMat>& x, const RVec& l) const;
  std::vector<RMat> public_duals(const std::vector<CMat>& x) const;

  const StandardForm& sf_;
  SolverOptions opts_;
  const ResidualFn& residuals_;

  int nb_ = 0, m_ = 0, ne_ = 0, rows_ = 0;
  std::vector<int> plain_, affine_;
  std::vector<int> row_start_;  // per block: first stacked affine row (affine blocks only)
  std::vector<RVec> weights_;   // per block: plain parameter weights
  std::vector<char> is_plain_param_;
  std::vector<int> d_index_;  // parameters outside every variable block
  RMat t_;                    // stacked affine rows, rows_ x m
  std::vector<std::vector<RowForm>> t_forms_, e_forms_;  // per block (plain only)
  std::vector<RMat> basis_flat_;                          // per affine block: columns = basis matrices
  double c_norm_ = 0.0, f_norm_ = 0.0;
  int nu_ = 0;

  // Iterate.
  RVec y_, lambda_;
  std::vector<CMat> s_, x_;

  // Per-iteration factorization, in hat coordinates: the parameters of U^H Y U written as
  // an isometric vector, U the eigenvectors of the block's scaling matrix.
  std::vector<Nt> nt_;
  std::vector<RMat> mk_, fk_;  // M_k and M_k^{1/2}
  std::vector<CMat> eig_u_;    // per variable block
  RVec dhat_;                  // diagonal of H_p (zero outside the variable blocks)
  std::vector<int> sigma_, beta_;
  RMat ls_, lb_;  // L restricted to the sigma / beta columns
  RVec dinv_b_;
  Eigen::LLT<RMat> c_llt_, s_llt_;
  Eigen::LDLT<RMat> ehe_;
  bool have_c_ = false;
};

void Solver::setup() {
  nb_ = static_cast<int>(sf_.blocks.size());
  m_ = sf_.m;
  ne_ = static_cast<int>(sf_.e.rows());
  if (sf_.c.size() != m_) throw std::invalid_argument("standard form: objective length differs from m");
  if (ne_ > 0 && sf_.e.cols() != m_) throw std::invalid_argument("standard form: equality width differs from m");
  if (sf_.f.size() != ne_) throw std::invalid_argument("standard form: equality rhs length");
  is_plain_param_.assign(m_, 0);
  weights_.resize(nb_);
  row_start_.assign(nb_, 0);
  for (int k = 0; k < nb_; ++k) {
    const auto& b = sf_.blocks[k];
    if (b.plain) {
      if (b.p.offset < 0 || b.p.offset + b.p.count() > m_) throw std::invalid_argument("standard form: block range");
      for (int i = 0; i < b.p.count(); ++i) {
        if (is_plain_param_[b.p.offset + i]) throw std::invalid_argument("standard form: overlapping variable blocks");
        is_plain_param_[b.p.offset + i] = 1;
      }
      weights_[k] = detail::plain_weights(b.p);
      plain_.push_back(k);
      nu_ += b.p.n;
    } else {
      const int d = static_cast<int>(b.a.constant.rows());
      if (d < 1 || b.a.constant.cols() != d) throw std::invalid_argument("standard form: affine constant");
      if (b.a.t.rows() != static_cast<Eigen::Index>(b.a.basis.size()) || (b.a.t.rows() > 0 && b.a.t.cols() != m_))
        throw std::invalid_argument("standard form: affine rows");
      row_start_[k] = rows_;
      rows_ += static_cast<int>(b.a.basis.size());
      affine_.push_back(k);
      nu_ += d;
      RMat flat(d * d, static_cast<Eigen::Index>(b.a.basis.size()));
      for (size_t j = 0; j < b.a.basis.size(); ++j) {
        if (b.a.basis[j].rows() != d || b.a.basis[j].cols() != d) throw std::invalid_argument("standard form: basis");
        flat.col(j) = Eigen::Map<const RVec>(b.a.basis[j].data(), d * d);
      }
      basis_flat_.push_back(std::move(flat));
    }
  }
  if (nb_ == 0) throw std::invalid_argument("standard form: no PSD blocks");
  t_.resize(rows_, m_);
  for (int k : affine_) t_.middleRows(row_start_[k], sf_.blocks[k].a.t.rows()) = sf_.blocks[k].a.t;
  for (int i = 0; i < m_; ++i)
    if (!is_plain_param_[i]) d_index_.push_back(i);
  t_forms_.resize(nb_);
  e_forms_.resize(nb_);
  for (int k : plain_) {
    const auto& p = sf_.blocks[k].p;
    for (int r = 0; r < rows_; ++r) {
      const RVec row = t_.row(r).segment(p.offset, p.count()).transpose();
      t_forms_[k].push_back(make_row_form(p, weights_[k], row.data()));
    }
    for (int r = 0; r < ne_; ++r) {
      const RVec row = sf_.e.row(r).segment(p.offset, p.count()).transpose();
      e_forms_[k].push_back(make_row_form(p, weights_[k], row.data()));
    }
  }
  c_norm_ = sf_.c.norm();
  f_norm_ = sf_.f.norm();
}

CMat Solver::affine_matrix(int k, const RVec& y) const {
  const auto& a = sf_.blocks[k].a;
  const int d = static_cast<int>(a.constant.rows());
  const RVec coef = a.t * y;
  const RVec flat = basis_flat_[std::find(affine_.begin(), affine_.end(), k) - affine_.begin()] * coef;
  return Eigen::Map<const RMat>(flat.data(), d, d).cast<cd>();
}

void Solver::affine_adjoint(int k, const CMat& x, RVec& out) const {
  const auto& a = sf_.blocks[k].a;
  const RMat xr = x.real();
  const RVec flat = Eigen::Map<const RVec>(xr.data(), xr.size());
  const RMat& b = basis_flat_[std::find(affine_.begin(), affine_.end(), k) - affine_.begin()];
  out.noalias() += a.t.transpose() * (b.transpose() * flat);
}

CMat Solver::block_operator(int k, const RVec& y) const {
  const auto& b = sf_.blocks[k];
  if (b.plain) return plain_matrix(b.p, y.data() + b.p.offset);
  return affine_matrix(k, y);
}

RVec Solver::adjoint_sum(const std::vector<CMat>& x) const {
  RVec out = RVec::Zero(m_);
  for (int k = 0; k < nb_; ++k) {
    const auto& b = sf_.blocks[k];
    if (b.plain)
      plain_adjoint(b.p, x[k], out.data() + b.p.offset);
    else
      affine_adjoint(k, x[k], out);
  }
  return out;
}

void Solver::initial_point() {
  y_ = RVec::Zero(m_);
  lambda_ = RVec::Zero(ne_);
  s_.resize(nb_);
  x_.resize(nb_);
  // Column norms ||A_k(e_i)|| per block, for the usual scale-aware starting point.
  for (int k = 0; k < nb_; ++k) {
    const auto& b = sf_.blocks[k];
    const int n = b.plain ? b.p.n : static_cast<int>(b.a.constant.rows());
    double xi = std::max(10.0, std::sqrt(double(n))), eta = xi;
    double cnorm = 0.0;
    if (b.plain) {
      for (int i = 0; i < b.p.count(); ++i) {
        const double an = std::sqrt(weights_[k][i]);
        xi = std::max(xi, n * (1.0 + std::abs(sf_.c[b.p.offset + i])) / (1.0 + an));
        eta = std::max(eta, an);
      }
    } else {
      cnorm = b.a.constant.norm();
      const int idx = static_cast<int>(std::find(affine_.begin(), affine_.end(), k) - affine_.begin());
      const RMat gram = basis_flat_[idx].transpose() * basis_flat_[idx];
      for (int i = 0; i < m_; ++i) {
        const RVec col = b.a.t.col(i);
        if (col.squaredNorm() == 0.0) continue;
        const double an = std::sqrt(std::max(0.0, col.dot(gram * col)));
        xi = std::max(xi, n * (1.0 + std::abs(sf_.c[i])) / (1.0 + an));
        eta = std::max(eta, an);
      }
    }
    eta = std::max(eta, cnorm);
    s_[k] = eta * CMat::Identity(n, n);
    x_[k] = xi * CMat::Identity(n, n);
  }
}

// Factorizes everything the Newton solves need at the current iterate.
bool Solver::factor() {
  nt_.resize(nb_);
  for (int k = 0; k < nb_; ++k)
    if (!nt_scaling(s_[k], x_[k], nt_[k])) return false;

  // Affine Gram matrices M_k = [<G^H B_i G, G^H B_j G>] and their square roots.
  fk_.assign(nb_, RMat());
  mk_.assign(nb_, RMat());
  for (int k : affine_) {
    const auto& a = sf_.blocks[k].a;
    const int d = static_cast<int>(a.constant.rows());
    const int r = static_cast<int>(a.basis.size());
    RMat iso(d * d, r);
    for (int j = 0; j < r; ++j) {
      const CMat p = nt_[k].g.adjoint() * a.basis[j].cast<cd>() * nt_[k].g;
      detail::isometric_vector(herm(p), iso.col(j).data());
    }
    RMat mk = RMat::Zero(r, r);
    mk.selfadjointView<Eigen::Lower>().rankUpdate(iso.transpose());
    mk = mk.selfadjointView<Eigen::Lower>();
    Eigen::SelfAdjointEigenSolver<RMat> es(mk);
    mk_[k] = mk;
    fk_[k] = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
             es.eigenvectors().transpose();
  }

  // Eigenbasis of each variable-block scaling W = U diag(lam) U^H, from the SVD of its factor G.
  dhat_ = RVec::Zero(m_);
  eig_u_.assign(nb_, CMat());
  for (int k : plain_) {
    const auto& p = sf_.blocks[k].p;
    RVec lam;
    if (p.hermitian) {
      Eigen::BDCSVD<CMat> svd(nt_[k].g, Eigen::ComputeFullU);
      eig_u_[k] = svd.matrixU();
      lam = svd.singularValues().cwiseAbs2();
    } else {
      Eigen::SelfAdjointEigenSolver<RMat> es(RMat(nt_[k].w.real()));
      eig_u_[k] = es.eigenvectors().cast<cd>();
      lam = es.eigenvalues().cwiseMax(0.0);
    }
    const int n = p.n, pairs = n * (n - 1) / 2;
    double* d = dhat_.data() + p.offset;
    for (int a = 0; a < n; ++a) d[a] = lam[a] * lam[a];
    int u = 0;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b, ++u) {
        d[n + u] = lam[a] * lam[b];
        if (p.hermitian) d[n + pairs + u] = lam[a] * lam[b];
      }
  }

  // Affine and equality rows in hat coordinates, T^ and E^.
  RMat that(rows_, m_), ehat(ne_, m_);
  for (int i : d_index_) {
    that.col(i) = t_.col(i);
    if (ne_ > 0) ehat.col(i) = sf_.e.col(i);
  }
  for (int k : plain_) {
    const auto& p = sf_.blocks[k].p;
    const CMat& u = eig_u_[k];
    RVec buf(p.count());
    auto fill = [&](const std::vector<RowForm>& forms, RMat& out) {
      for (size_t i = 0; i < forms.size(); ++i) {
        const RowForm& f = forms[i];
        const auto r = static_cast<Eigen::Index>(i);
        if (!f.used) {
          out.row(r).segment(p.offset, p.count()).setZero();
          continue;
        }
        CMat q;
        if (f.dense) {
          q = u.adjoint() * f.c * u;
        } else {
          const CMat vt = u.adjoint() * f.v;
          q = vt * f.s.asDiagonal() * vt.adjoint();
        }
        hat_vector(q, p.hermitian, buf.data());
        out.row(r).segment(p.offset, p.count()) = buf.transpose();
      }
    };
    fill(t_forms_[k], that);
    fill(e_forms_[k], ehat);
  }
  RMat l(rows_, m_);
  for (int k : affine_) {
    const int r0 = row_start_[k], r = static_cast<int>(fk_[k].rows());
    l.middleRows(r0, r).noalias() = fk_[k] * that.middleRows(r0, r);
  }

  // Columns where L^T L dominates D go to the Schur complement; the rest are eliminated by
  // Woodbury, whose capacitance matrix stays well conditioned on them.
  sigma_ = d_index_;
  beta_.clear();
  std::vector<std::pair<double, int>> ratio;
  for (int k : plain_) {
    const auto& p = sf_.blocks[k].p;
    for (int i = p.offset; i < p.offset + p.count(); ++i) {
      const double ln = rows_ > 0 ? l.col(i).squaredNorm() : 0.0;
      ratio.emplace_back(m_ <= kDenseLimit ? kInf : ln / dhat_[i], i);
    }
  }
  std::sort(ratio.begin(), ratio.end(), std::greater<>());
  for (size_t i = 0; i < ratio.size(); ++i) {
    if ((ratio[i].first > kSplitRatio || !(dhat_[ratio[i].second] > 0.0)) &&
        static_cast<int>(sigma_.size()) < kSigmaCap + static_cast<int>(d_index_.size()))
      sigma_.push_back(ratio[i].second);
    else
      beta_.push_back(ratio[i].second);
  }
  std::sort(sigma_.begin(), sigma_.end());
  std::sort(beta_.begin(), beta_.end());
  for (int i : beta_)
    if (!(dhat_[i] > 0.0)) return false;
  const int ns = static_cast<int>(sigma_.size()), nbeta = static_cast<int>(beta_.size());
  ls_.resize(rows_, ns);
  lb_.resize(rows_, nbeta);
  dinv_b_.resize(nbeta);
  for (int j = 0; j < ns; ++j) ls_.col(j) = l.col(sigma_[j]);
  for (int j = 0; j < nbeta; ++j) {
    lb_.col(j) = l.col(beta_[j]);
    dinv_b_[j] = 1.0 / dhat_[beta_[j]];
  }
  l.resize(0, 0);

  have_c_ = rows_ > 0 && nbeta > 0;
  if (have_c_) {
    const RMat kb = lb_ * dinv_b_.cwiseSqrt().asDiagonal();
    RMat cm = RMat::Identity(rows_, rows_);
    cm.selfadjointView<Eigen::Lower>().rankUpdate(kb);
    c_llt_.compute(cm);
    if (c_llt_.info() != Eigen::Success) return false;
  }
  if (ns > 0) {
    RMat sm = RMat::Zero(ns, ns);
    for (int j = 0; j < ns; ++j) sm(j, j) = dhat_[sigma_[j]];
    if (rows_ > 0) {
      const RMat kc = have_c_ ? RMat(c_llt_.matrixL().solve(ls_)) : ls_;
      sm.selfadjointView<Eigen::Lower>().rankUpdate(kc.transpose());
    }
    s_llt_.compute(sm);
    if (s_llt_.info() != Eigen::Success) return false;
  }

  if (ne_ > 0) {
    RMat ehe = ehat * hat_solve(ehat.transpose());
    ehe_.compute(0.5 * (ehe + ehe.transpose()));
    if (ehe_.info() != Eigen::Success) return false;
  }
  return true;
}

RMat Solver::to_hat(const RMat& b) const {
  RMat out(m_, b.cols());
  for (int i : d_index_) out.row(i) = b.row(i);
  for (int k : plain_) {
    const auto& p = sf_.blocks[k].p;
    const CMat& u = eig_u_[k];
    for (Eigen::Index c = 0; c < b.cols(); ++c) {
      const RVec scaled = b.col(c).segment(p.offset, p.count()).cwiseQuotient(weights_[k]);
      hat_vector(u.adjoint() * plain_matrix(p, scaled.data()) * u, p.hermitian, out.col(c).data() + p.offset);
    }
  }
  return out;
}

RMat Solver::from_hat(const RMat& z) const {
  RMat out(m_, z.cols());
  for (int i : d_index_) out.row(i) = z.row(i);
  for (int k : plain_) {
    const auto& p = sf_.blocks[k].p;
    const CMat& u = eig_u_[k];
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      const CMat y = u * hat_matrix(p.n, p.hermitian, z.col(c).data() + p.offset) * u.adjoint();
      auto seg = out.col(c).segment(p.offset, p.count());
      seg.setZero();
      plain_adjoint(p, y, seg.data());
      seg.array() /= weights_[k].array();
    }
  }
  return out;
}

// (D + L^T L)^-1 b in hat coordinates.
RMat Solver::hat_solve(const RMat& b) const {
  const Eigen::Index nc = b.cols();
  const int ns = static_cast<int>(sigma_.size()), nbeta = static_cast<int>(beta_.size());
  RMat bs(ns, nc), bb(nbeta, nc);
  for (int j = 0; j < ns; ++j) bs.row(j) = b.row(sigma_[j]);
  for (int j = 0; j < nbeta; ++j) bb.row(j) = b.row(beta_[j]);
  RMat xs = RMat::Zero(ns, nc);
  if (ns > 0) {
    if (have_c_) {
      const RMat z = c_llt_.solve(lb_ * (dinv_b_.asDiagonal() * bb));
      bs.noalias() -= ls_.transpose() * z;
    }
    xs = s_llt_.solve(bs);
    if (rows_ > 0 && nbeta > 0) bb.noalias() -= lb_.transpose() * (ls_ * xs);
  }
  RMat xb = dinv_b_.asDiagonal() * bb;
  if (have_c_) xb -= dinv_b_.asDiagonal() * (lb_.transpose() * c_llt_.solve(lb_ * xb));
  RMat out(m_, nc);
  for (int j = 0; j < ns; ++j) out.row(sigma_[j]) = xs.row(j);
  for (int j = 0; j < nbeta; ++j) out.row(beta_[j]) = xb.row(j);
  return out;
}

RVec Solver::solve_h(const RVec& b) const { return from_hat(hat_solve(to_hat(b))).col(0); }

RVec Solver::apply_h(const RVec& v) const {
  RVec out = RVec::Zero(m_);
  for (int k : plain_) {
    const auto& p = sf_.blocks[k].p;
    const CMat a = plain_matrix(p, v.data() + p.offset);
    plain_adjoint(p, nt_[k].w * a * nt_[k].w, out.data() + p.offset);
  }
  for (int k : affine_) {
    const auto& t = sf_.blocks[k].a.t;
    out.noalias() += t.transpose() * (mk_[k] * (t * v));
  }
  return out;
}

// Newton direction for complementarity targets tk (dX = tk - W dS W).
void Solver::direction(const std::vector<CMat>& tk, RVec& dy, RVec& dl, std::vector<CMat>& ds,
                       std::vector<CMat>& dx) const {
  std::vector<CMat> rhs(nb_), resid(nb_);
  for (int k = 0; k < nb_; ++k) {
    resid[k] = block_operator(k, y_) - s_[k];
    if (!sf_.blocks[k].plain) resid[k] += sf_.blocks[k].a.constant.cast<cd>();
    rhs[k] = tk[k] - nt_[k].w * resid[k] * nt_[k].w;
  }
  RVec rd = sf_.c - adjoint_sum(x_);
  if (ne_ > 0) rd -= sf_.e.transpose() * lambda_;
  const RVec g = adjoint_sum(rhs) - rd;
  const RVec re = ne_ > 0 ? RVec(sf_.f - sf_.e * y_) : RVec();
  // Solves H dy - E^T dl = g1, E dy = g2.
  auto kkt_solve = [&](const RVec& g1, const RVec& g2, RVec& ry, RVec& rl) {
    const RVec hg = solve_h(g1);
    if (ne_ > 0) {
      rl = ehe_.solve(g2 - sf_.e * hg);
      ry = solve_h(g1 + sf_.e.transpose() * rl);
    } else {
      rl = RVec::Zero(0);
      ry = hg;
    }
  };
  // Near the optimum the split factorization can lose digits, so it serves as a right
  // preconditioner for GMRES on the exact Newton system.
  const int ny = m_;
  auto op = [&](const RVec& v) {
    RVec out(ny + ne_);
    out.head(ny) = apply_h(v.head(ny));
    if (ne_ > 0) {
      out.head(ny) -= sf_.e.transpose() * v.tail(ne_);
      out.tail(ne_) = sf_.e * v.head(ny);
    }
    return out;
  };
  auto precond = [&](const RVec& v) {
    RVec py, pl, out(ny + ne_);
    kkt_solve(v.head(ny), v.tail(ne_), py, pl);
    out.head(ny) = py;
    out.tail(ne_) = pl;
    return out;
  };
  RVec b(ny + ne_);
  b.head(ny) = g;
  if (ne_ > 0) b.tail(ne_) = re;
  const RVec sol = gmres(op, precond, b, 1e-13, 200);
  dy = sol.head(ny);
  dl = sol.tail(ne_);
  ds.resize(nb_);
  dx.resize(nb_);
  for (int k = 0; k < nb_; ++k) {
    ds[k] = herm(block_operator(k, dy) + resid[k]);
    dx[k] = herm(tk[k] - nt_[k].w * ds[k] * nt_[k].w);
  }
}

std::vector<RMat> Solver::public_duals(const std::vector<CMat>& x) const {
  std::vector<RMat> out;
  for (int k = 0; k < nb_; ++k) out.push_back(detail::to_public(sf_.blocks[k], x[k], true));
  return out;
}

KktResiduals Solver::evaluate(const RVec& y, const std::vector<CMat>& x, const RVec& l) const {
  const std::vector<RMat> pub = public_duals(x);
  if (residuals_) return residuals_(y, pub, l);
  return standard_residuals(sf_, y, pub, l);
}

StandardSolution Solver::run() {
  const auto t0 = std::chrono::steady_clock::now();
  initial_point();
  StandardSolution best;
  double best_score = kInf;
  SolverReport rep;
  int stall = 0;

  auto objective = [&](const RVec& y) { return sf_.c.dot(y) + sf_.c0; };
  auto dual_objective = [&](const std::vector<CMat>& x, const RVec& l) {
    double v = sf_.c0 + (ne_ > 0 ? sf_.f.dot(l) : 0.0);
    for (int k : affine_) v -= sf_.blocks[k].a.constant.cwiseProduct(x[k].real()).sum();
    return v;
  };
  auto snapshot = [&](const KktResiduals& r) {
    const double score = std::max({r.primal, r.dual, r.gap});
    if (!(score < best_score) && best_score < kInf) return;
    best_score = score;
    best.y = y_;
    best.lambda = lambda_;
    best.x = public_duals(x_);
    best.s.clear();
    for (int k = 0; k < nb_; ++k) best.s.push_back(detail::to_public(sf_.blocks[k], s_[k], false));
    best.report.objective = objective(y_);
    best.report.dual_objective = dual_objective(x_, lambda_);
    best.report.primal_residual = r.primal;
    best.report.dual_residual = r.dual;
    best.report.gap = r.gap;
  };

  rep.status = SolverStatus::max_iter;
  int it = 0;
  for (;; ++it) {
    const KktResiduals r = evaluate(y_, x_, lambda_);
    snapshot(r);
    best.report.iterations = it;
    if (opts_.verbose)
      std::fprintf(stderr, "ipm %3d  pobj % .9e  dobj % .9e  pres %.2e  dres %.2e  gap %.2e\n", it, objective(y_),
                   dual_objective(x_, lambda_), r.primal, r.dual, r.gap);
    if (r.primal <= opts_.tol && r.dual <= opts_.tol && r.gap <= opts_.tol) {
      rep.status = SolverStatus::optimal;
      break;
    }
    // Certificates: a dual ray proves the parametrized problem infeasible; a primal ray
    // (feasible direction of unbounded descent) proves it unbounded.
    {
      const double dd = dual_objective(x_, lambda_) - sf_.c0;
      RVec ray = adjoint_sum(x_);
      if (ne_ > 0) ray += sf_.e.transpose() * lambda_;
      if (dd > 0.0 && ray.norm() / dd <= opts_.tol && dd > 1e6 * (1.0 + c_norm_)) {
        rep.status = SolverStatus::infeasible;
        break;
      }
      const double descent = -sf_.c.dot(y_);
      if (descent > 1e8 * (1.0 + f_norm_)) {
        double worst = ne_ > 0 ? (sf_.e * y_).norm() : 0.0;
        for (int k = 0; k < nb_; ++k) {
          Eigen::SelfAdjointEigenSolver<CMat> es(herm(block_operator(k, y_)), Eigen::EigenvaluesOnly);
          worst = std::max(worst, -es.eigenvalues().minCoeff());
        }
        if (worst / descent <= opts_.tol) {
          rep.status = SolverStatus::unbounded;
          break;
        }
      }
    }
    if (it >= opts_.max_iter) break;
    if (!factor()) {
      rep.status = SolverStatus::stalled;
      break;
    }

    double mu = 0.0;
    for (int k = 0; k < nb_; ++k) mu += inner(x_[k], s_[k]);
    mu /= nu_;

    // Predictor.
    std::vector<CMat> tk(nb_);
    for (int k = 0; k < nb_; ++k) tk[k] = -x_[k];
    RVec dy, dl;
    std::vector<CMat> ds, dx;
    direction(tk, dy, dl, ds, dx);
    double ap = 1.0, ad = 1.0;
    for (int k = 0; k < nb_; ++k) {
      ap = std::min(ap, max_step(s_[k], ds[k]));
      ad = std::min(ad, max_step(x_[k], dx[k]));
    }
    double mu_aff = 0.0;
    for (int k = 0; k < nb_; ++k) mu_aff += inner(x_[k] + ad * dx[k], s_[k] + ap * ds[k]);
    mu_aff /= nu_;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // Corrector in the scaled space, where X and S both equal diag(v).
    for (int k = 0; k < nb_; ++k) {
      const Nt& s = nt_[k];
      const CMat dxs = s.ginv * dx[k] * s.ginv.adjoint();
      const CMat dss = s.g.adjoint() * ds[k] * s.g;
      CMat rm = -(dxs * dss + dss * dxs);
      const Eigen::Index n = rm.rows();
      for (Eigen::Index i = 0; i < n; ++i) rm(i, i) += 2.0 * (sigma * mu - s.v[i] * s.v[i]);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) rm(i, j) /= s.v[i] + s.v[j];
      tk[k] = herm(s.g * rm * s.g.adjoint());
    }
    direction(tk, dy, dl, ds, dx);
    ap = kInf;
    ad = kInf;
    for (int k = 0; k < nb_; ++k) {
      ap = std::min(ap, max_step(s_[k], ds[k]));
      ad = std::min(ad, max_step(x_[k], dx[k]));
    }
    const double gamma = 0.9 + 0.09 * std::min({ap, ad, 1.0});
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (!dy.allFinite() || !(ap > 0.0) || !(ad > 0.0)) {
      rep.status = SolverStatus::stalled;
      break;
    }
    stall = (ap < 1e-9 && ad < 1e-9) ? stall + 1 : 0;
    if (stall >= 3) {
      rep.status = SolverStatus::stalled;
      break;
    }
    y_ += ap * dy;
    if (ne_ > 0) lambda_ += ad * dl;
    for (int k = 0; k < nb_; ++k) {
      s_[k] = herm(s_[k] + ap * ds[k]);
      x_[k] = herm(x_[k] + ad * dx[k]);
      if (!(sf_.blocks[k].plain && sf_.blocks[k].p.hermitian)) {
        s_[k] = s_[k].real().cast<cd>();
        x_[k] = x_[k].real().cast<cd>();
      }
    }
  }

  // Return the final iterate when it certifies something, else the best one seen.
  if (rep.status == SolverStatus::optimal || rep.status == SolverStatus::infeasible ||
      rep.status == SolverStatus::unbounded) {
    best_score = kInf;
    snapshot(evaluate(y_, x_, lambda_));
  }
  best.report.status = rep.status;
  best.report.iterations = it;
  best.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

double min_eig_c(const CMat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<CMat> es(herm(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

KktResiduals standard_residuals(const StandardForm& sf, const RVec& y, const std::vector<RMat>& x,
                                const RVec& lambda) {
  const int nb = static_cast<int>(sf.blocks.size());
  if (static_cast<int>(x.size()) != nb || y.size() != sf.m || lambda.size() != sf.e.rows())
    throw std::invalid_argument("standard_residuals: iterate does not match the problem");
  double primal = sf.e.rows() > 0 ? (sf.e * y - sf.f).norm() / (1.0 + sf.f.norm()) : 0.0;
  RVec rd = sf.c;
  if (sf.e.rows() > 0) rd -= sf.e.transpose() * lambda;
  double dual_psd = 0.0, dobj = sf.c0 + (sf.e.rows() > 0 ? sf.f.dot(lambda) : 0.0), compl_ = 0.0;
  for (int k = 0; k < nb; ++k) {
    const auto& b = sf.blocks[k];
    const CMat xk = detail::to_internal(b, x[k], true);
    CMat fk;
    double scale = 0.0;
    if (b.plain) {
      fk = detail::plain_matrix(b.p, y.data() + b.p.offset);
      detail::plain_adjoint(b.p, xk, rd.data() + b.p.offset, -1.0);
    } else {
      const RVec coef = b.a.t * y;
      RMat v = b.a.constant;
      for (size_t j = 0; j < b.a.basis.size(); ++j) v += coef[j] * b.a.basis[j];
      fk = v.cast<cd>();
      scale = b.a.constant.norm();
      RVec w(b.a.basis.size());
      for (size_t j = 0; j < b.a.basis.size(); ++j) w[j] = b.a.basis[j].cwiseProduct(xk.real()).sum();
      rd -= b.a.t.transpose() * w;
      dobj -= b.a.constant.cwiseProduct(xk.real()).sum();
    }
    primal = std::max(primal, std::max(0.0, -min_eig_c(fk)) / (1.0 + scale));
    dual_psd = std::max(dual_psd, std::max(0.0, -min_eig_c(xk)) / (1.0 + xk.norm()));
    compl_ += inner(xk, fk);
  }
  const double pobj = sf.c.dot(y) + sf.c0;
  const double dual = std::max(rd.norm() / (1.0 + sf.c.norm()), dual_psd);
  const double gap = std::max(std::abs(pobj - dobj), std::abs(compl_)) / (1.0 + std::abs(pobj) + std::abs(dobj));
  return {primal, dual, gap};
}

StandardSolution solve_standard(const StandardForm& sf, const SolverOptions& opts, const ResidualFn& residuals) {
  if (!(opts.tol > 0.0) || opts.max_iter < 0) throw std::invalid_argument("solver options: tol > 0, max_iter >= 0");
  Solver s(sf, opts, residuals);
  return s.run();
}

}  // namespace risloc::sdp
