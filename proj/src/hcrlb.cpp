// SPDX-License-Identifier: Apache-2.0
#include "risloc/hcrlb.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace risloc {

MuJacobian mu_jacobian(const PolarPosition& ue, const CVec& w, double phi, const RVec& theta,
                       const PilotSequence& pilots, const ScenarioConfig& cfg) {
  const int n = cfg.n_subcarriers;
  if (theta.size() != n) throw std::invalid_argument("mu_jacobian: theta length differs from N");
  const ChannelModel model(cfg);
  CVec h;
  std::array<CVec, 3> dh;
  model.channel_and_gradient(ue, w, h, dh);
  const CMat st = build_signal_matrix(pilots).s.transpose();
  const CVec unit = received_mean(CVec::Ones(n), phi, theta, std::sqrt(cfg.tx_power_w));
  const CVec mu = unit.cwiseProduct(st * h);
  MuJacobian out;
  out.j = CMat::Zero(n, n + 4);
  for (int k = 0; k < n; ++k) {
    out.j(k, 0) = kJ * (2.0 * kPi * k / n) * mu[k];
    out.j(k, 1 + k) = kJ * mu[k];
  }
  for (int a = 0; a < 3; ++a) out.j.col(n + 1 + a) = unit.cwiseProduct(st * dh[a]);
  return out;
}

RMat fim(const MuJacobian& jac, double sigma_sq) {
  RMat f = (2.0 / sigma_sq) * (jac.j.adjoint() * jac.j).real();
  return 0.5 * (f + f.transpose());
}

BimMatrix bim(const RMat& f, const PnCovariance& pn) {
  const int n = static_cast<int>(pn.psi.rows());
  if (f.rows() != n + 4 || f.cols() != n + 4) throw std::invalid_argument("bim: FIM size differs from N+4");
  Eigen::LLT<RMat> llt(pn.psi);
  if (llt.info() != Eigen::Success) throw std::runtime_error("bim: PN covariance not positive definite");
  BimMatrix b{f};
  b.b.block(1, 1, n, n) += llt.solve(RMat::Identity(n, n));
  b.b = 0.5 * (b.b + b.b.transpose());
  return b;
}

TransitionMatrix transition_matrix(const PolarPosition& ue, int n) {
  if (std::abs(std::sin(ue.elevation)) < 1e-12 || !(ue.range > 0.0))
    throw DegenerateGeometry("transition matrix undefined: zero range or sin(elevation) = 0");
  TransitionMatrix t;
  t.xi = RMat::Zero(n + 3, n + 4);
  for (int k = 1; k < n; ++k) {
    t.xi(k, 0) = 2.0 * kPi * k / n;
    t.xi(k, 1) = -1.0;
    t.xi(k, k + 1) = 1.0;
  }
  t.xi.block(n, n + 1, 3, 3) = polar_jacobian(ue);
  return t;
}

HcrlbResult hcrlb(const BimMatrix& bm, const TransitionMatrix& t) {
  const RMat& b = bm.b;
  const int m = static_cast<int>(b.rows());
  if (t.xi.cols() != m) throw std::invalid_argument("hcrlb: transition matrix does not match BIM");
  const RVec d = b.diagonal();
  if ((d.array() <= 0.0).any() || !d.allFinite())
    throw SingularMatrix("hcrlb: BIM has a non-positive diagonal entry", std::numeric_limits<double>::infinity());
  const RVec s = d.cwiseSqrt().cwiseInverse();
  const RMat scaled = s.asDiagonal() * b * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<RMat> eig(scaled, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxBimCondition)) throw SingularMatrix("hcrlb: BIM is numerically singular", cond);
  Eigen::LLT<RMat> llt(scaled);
  if (llt.info() != Eigen::Success) throw SingularMatrix("hcrlb: BIM Cholesky failed", cond);
  // Xi B^-1 Xi^T = (Xi D) (D B D)^-1 (Xi D)^T
  const RMat xs = t.xi * s.asDiagonal();
  HcrlbResult r;
  r.bound = xs * llt.solve(xs.transpose());
  r.bound = 0.5 * (r.bound + r.bound.transpose());
  const int n = m - 4;
  r.peb = std::sqrt(std::max(0.0, r.bound.block(n, n, 3, 3).trace()));
  r.cfo_pn_bound = r.bound.topLeftCorner(n, n).trace();
  r.condition = cond;
  return r;
}

WLinearFim::WLinearFim(const PolarPosition& ue, const PilotSequence& pilots, const ScenarioConfig& cfg)
    : n_(cfg.n_subcarriers), n_elements_(cfg.ris.n_elements), power_(cfg.tx_power_w), noise_(cfg.noise_power_w) {
  const ChannelModel model(cfg);
  const CMat s = build_signal_matrix(pilots).s;
  g_[0] = model.g_matrix(ue).g * s;
  const std::array<CMat, 3> dg = model.g_gradient(ue);
  for (int k = 0; k < 3; ++k) g_[k + 1] = dg[k] * s;
}

namespace {

// Coefficient c_i(n) and factor index b(i) of parameter i.
struct ParamCoef {
  int factor;
  cd coef(int i, int n, int N) const {
    if (i == 0) return kJ * (2.0 * kPi * n / N);
    if (i <= N) return (i - 1 == n) ? kJ : cd(0.0);
    return 1.0;
  }
};

int factor_of(int i, int N) { return i <= N ? 0 : i - N; }

}  // namespace

CMat WLinearFim::coefficient(int i, int j) const {
  const int m = n_params();
  if (i < 0 || j < 0 || i >= m || j >= m) throw std::out_of_range("WLinearFim::coefficient index");
  const int bi = factor_of(i, n_), bj = factor_of(j, n_);
  const ParamCoef pc{0};
  CMat out = CMat::Zero(n_elements_, n_elements_);
  for (int n = 0; n < n_; ++n) {
    const cd c = std::conj(pc.coef(i, n, n_)) * pc.coef(j, n, n_);
    if (c == cd(0.0)) continue;
    out.noalias() += (power_ * c) * g_[bj].col(n) * g_[bi].col(n).adjoint();
  }
  return out;
}

RMat WLinearFim::evaluate(const CMat& W) const {
  if (W.rows() != n_elements_ || W.cols() != n_elements_) throw std::invalid_argument("WLinearFim: W size");
  // q[a][b](n) = g_a(n)^H W g_b(n)
  std::array<CMat, 4> wg;
  for (int b = 0; b < 4; ++b) wg[b] = W * g_[b];
  std::array<std::array<CVec, 4>, 4> q;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) q[a][b] = g_[a].conjugate().cwiseProduct(wg[b]).colwise().sum().transpose();
  const int m = n_params();
  const ParamCoef pc{0};
  RMat f = RMat::Zero(m, m);
  const double scale = 2.0 * power_ / noise_;
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      const int bi = factor_of(i, n_), bj = factor_of(j, n_);
      double acc = 0.0;
      if (i >= 1 && i <= n_) {
        const int n = i - 1;
        acc = (std::conj(pc.coef(i, n, n_)) * pc.coef(j, n, n_) * q[bi][bj][n]).real();
      } else if (j >= 1 && j <= n_) {
        const int n = j - 1;
        acc = (std::conj(pc.coef(i, n, n_)) * pc.coef(j, n, n_) * q[bi][bj][n]).real();
      } else {
        for (int n = 0; n < n_; ++n) acc += (std::conj(pc.coef(i, n, n_)) * pc.coef(j, n, n_) * q[bi][bj][n]).real();
      }
      f(i, j) = f(j, i) = scale * acc;
    }
  return f;
}

RMat WLinearFim::evaluate_rank1(const CVec& w) const {
  // a_b(n) = w^T g_b(n); FIM_ij = scale * sum_n Re(conj(c_i a_bi) c_j a_bj)
  const int m = n_params();
  CMat jac = CMat::Zero(n_, m);
  std::array<CVec, 4> a;
  for (int b = 0; b < 4; ++b) a[b] = (w.transpose() * g_[b]).transpose();
  for (int n = 0; n < n_; ++n) {
    jac(n, 0) = kJ * (2.0 * kPi * n / n_) * a[0][n];
    jac(n, 1 + n) = kJ * a[0][n];
    for (int k = 0; k < 3; ++k) jac(n, n_ + 1 + k) = a[k + 1][n];
  }
  RMat f = (2.0 * power_ / noise_) * (jac.adjoint() * jac).real();
  return 0.5 * (f + f.transpose());
}

WLinearFim w_linear_fim(const PolarPosition& ue, const PilotSequence& pilots, const ScenarioConfig& cfg) {
  return WLinearFim(ue, pilots, cfg);
}

double position_error_bound(const Position3& ue, const CVec& w, const PilotSequence& pilots,
                            const ScenarioConfig& cfg) {
  const PolarPosition p = cartesian_to_polar(ue);
  const int n = cfg.n_subcarriers;
  const MuJacobian jac = mu_jacobian(p, w, 0.0, RVec::Zero(n), pilots, cfg);
  const BimMatrix b = bim(fim(jac, cfg.noise_power_w), build_pn_covariance(n, cfg.pn_increment_var));
  return hcrlb(b, transition_matrix(p, n)).peb;
}

PebEvaluator::PebEvaluator(const std::vector<Position3>& positions, const PilotSequence& pilots,
                           const ScenarioConfig& cfg)
    : pn_(build_pn_covariance(cfg.n_subcarriers, cfg.pn_increment_var)) {
  if (positions.empty()) throw std::invalid_argument("PebEvaluator: no positions");
  for (const Position3& p : positions) {
    const PolarPosition pp = cartesian_to_polar(p);
    fims_.emplace_back(pp, pilots, cfg);
    transitions_.push_back(transition_matrix(pp, cfg.n_subcarriers));
  }
}

HcrlbResult PebEvaluator::bound_at(size_t i, const CVec& w) const {
  return hcrlb(bim(fims_.at(i).evaluate_rank1(w), pn_), transitions_.at(i));
}

double PebEvaluator::average_peb(const CVec& w) const {
  double acc = 0.0;
  for (size_t i = 0; i < fims_.size(); ++i) {
    try {
      acc += peb_at(i, w);
    } catch (const SingularMatrix&) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return acc / static_cast<double>(fims_.size());
}

double PebEvaluator::average_peb_squared(const CVec& w) const {
  double acc = 0.0;
  for (size_t i = 0; i < fims_.size(); ++i) {
    try {
      const double p = peb_at(i, w);
      acc += p * p;
    } catch (const SingularMatrix&) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return acc / static_cast<double>(fims_.size());
}

}  // namespace risloc
