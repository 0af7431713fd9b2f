// SPDX-License-Identifier: Apache-2.0
#include "risloc/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace risloc {

PnSubspace build_pn_subspace(const PnCovariance& cov, int L) {
  const int n = static_cast<int>(cov.psi.rows());
  if (L < 1 || L > n) throw std::invalid_argument("PN subspace dimension out of range");
  Eigen::SelfAdjointEigenSolver<RMat> eig(cov.psi);
  if (eig.info() != Eigen::Success) throw std::runtime_error("PN covariance eigendecomposition failed");
  PnSubspace s;
  s.eigenvalues = eig.eigenvalues().reverse();
  const RMat u = eig.eigenvectors().rowwise().reverse();
  s.projection = u.leftCols(L) * s.eigenvalues.head(L).cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return s;
}

EstimatorConfig EstimatorConfig::defaults_for(const ScenarioConfig& cfg) {
  EstimatorConfig e;
  e.init_position = cfg.aoi_center;
  return e;
}

EstimationProblem::EstimationProblem(const CVec& y_, const CVec& w_, const PilotSequence& pilots,
                                     const ScenarioConfig& cfg_)
    : y(y_),
      w(w_),
      cfg(cfg_),
      model(cfg_),
      s_t(build_signal_matrix(pilots).s.transpose()),
      pn(build_pn_covariance(cfg_.n_subcarriers, cfg_.pn_increment_var)),
      subspace(build_pn_subspace(pn, cfg_.pn_subspace_dim)),
      sqrt_power(std::sqrt(cfg_.tx_power_w)),
      noise_power(cfg_.noise_power_w),
      n(cfg_.n_subcarriers) {
  if (y.size() != n) throw std::invalid_argument("received signal length differs from N");
  if (w.size() != cfg.ris.n_elements) throw std::invalid_argument("phase-shift vector length differs from N_R");
}

EstimatorState initial_state(const EstimationProblem& prob, const EstimatorConfig& est) {
  EstimatorState s;
  s.phi_hat = est.init_phi;
  s.eta_hat = RVec::Zero(prob.subspace.projection.cols());
  s.theta_hat = RVec::Zero(prob.n);
  s.position_hat = cartesian_to_polar(est.init_position);
  s.objective = objective(prob, s);
  return s;
}

namespace {

CVec phase_ramp(int n, double phi, const RVec& theta) {
  CVec r(n);
  for (int k = 0; k < n; ++k) r[k] = std::polar(1.0, 2.0 * kPi * k * phi / n + theta[k]);
  return r;
}

CVec sth_at(const EstimationProblem& prob, const PolarPosition& pos) {
  return prob.s_t * prob.model.channel(pos, prob.w);
}

double likelihood_from_sth(const EstimationProblem& prob, double phi, const RVec& theta, const CVec& sth) {
  const CVec mu = prob.sqrt_power * phase_ramp(prob.n, phi, theta).cwiseProduct(sth);
  return (prob.y - mu).squaredNorm() / prob.noise_power;
}

double objective_from_sth(const EstimationProblem& prob, double phi, const RVec& theta, const RVec& eta,
                          const CVec& sth) {
  return likelihood_from_sth(prob, phi, theta, sth) + 0.5 * eta.squaredNorm();
}

bool valid_position(const PolarPosition& p) {
  return std::isfinite(p.range) && std::isfinite(p.azimuth) && std::isfinite(p.elevation) && p.range > 0.0;
}

}  // namespace

double likelihood_term(const EstimationProblem& prob, double phi, const RVec& theta, const PolarPosition& pos) {
  return likelihood_from_sth(prob, phi, theta, sth_at(prob, pos));
}

double objective(const EstimationProblem& prob, const EstimatorState& state) {
  return likelihood_term(prob, state.phi_hat, state.theta_hat, state.position_hat) +
         0.5 * state.eta_hat.squaredNorm();
}

EstimatorWorkspace build_workspace(const EstimationProblem& prob, const EstimatorState& state) {
  const CVec sth = sth_at(prob, state.position_hat);
  const CVec cfo = phase_ramp(prob.n, state.phi_hat, RVec::Zero(prob.n));
  const CVec pn = phase_ramp(prob.n, 0.0, state.theta_hat);
  EstimatorWorkspace ws;
  const CVec base = prob.sqrt_power * cfo.cwiseProduct(sth);
  ws.y_bar = prob.y - base;
  ws.q = kJ * (base.asDiagonal() * prob.subspace.projection.cast<cd>());
  ws.d_vec = prob.sqrt_power * pn.cwiseProduct(sth);
  return ws;
}

RVec update_eta(const EstimationProblem& prob, const EstimatorState& state) {
  const EstimatorWorkspace ws = build_workspace(prob, state);
  const int L = static_cast<int>(ws.q.cols());
  RMat normal = (ws.q.adjoint() * ws.q).real();
  normal.diagonal().array() += 0.5 * prob.noise_power;
  const RVec rhs = (ws.q.adjoint() * ws.y_bar).real();
  Eigen::LLT<RMat> llt(normal);
  if (llt.info() != Eigen::Success || L == 0) throw std::runtime_error("update_eta: normal matrix not positive definite");
  return llt.solve(rhs);
}

RVec eta_normal_residual(const EstimationProblem& prob, const EstimatorState& state, const RVec& eta) {
  const EstimatorWorkspace ws = build_workspace(prob, state);
  RMat normal = (ws.q.adjoint() * ws.q).real();
  normal.diagonal().array() += 0.5 * prob.noise_power;
  return normal * eta - (ws.q.adjoint() * ws.y_bar).real();
}

double update_cfo(const EstimationProblem& prob, const EstimatorState& state) {
  const EstimatorWorkspace ws = build_workspace(prob, state);
  const int n = prob.n;
  const CVec ramp = phase_ramp(n, state.phi_hat, RVec::Zero(n));
  CVec dramp(n);
  for (int k = 0; k < n; ++k) dramp[k] = kJ * (2.0 * kPi * k / n) * ramp[k];
  const CVec td = dramp.cwiseProduct(ws.d_vec);
  const double denom = td.squaredNorm();
  if (!(denom > 0.0)) throw SignalAbsent("update_cfo: model signal is zero");
  const CVec resid = prob.y - ramp.cwiseProduct(ws.d_vec);
  return state.phi_hat + resid.dot(td).real() / denom;  // dot() conjugates its left operand
}

CfoPnUpdate update_cfo_pn(const EstimationProblem& prob, const EstimatorState& state, bool with_position) {
  const int n = prob.n;
  const RMat& pi = prob.subspace.projection;
  const int L = static_cast<int>(pi.cols());
  const int np = with_position ? 3 : 0;
  CVec h;
  std::array<CVec, 3> dh;
  if (with_position)
    prob.model.channel_and_gradient(state.position_hat, prob.w, h, dh);
  else
    h = prob.model.channel(state.position_hat, prob.w);
  const CVec ramp = prob.sqrt_power * phase_ramp(n, state.phi_hat, state.theta_hat);
  const CVec mu = ramp.cwiseProduct(prob.s_t * h);
  if (!(mu.squaredNorm() > 0.0)) throw SignalAbsent("update_cfo_pn: model signal is zero");
  CMat jac(n, L + 1 + np);
  for (int k = 0; k < n; ++k) jac(k, 0) = kJ * (2.0 * kPi * k / n) * mu[k];
  jac.middleCols(1, L) = kJ * (mu.asDiagonal() * pi.cast<cd>());
  for (int k = 0; k < np; ++k) jac.col(L + 1 + k) = ramp.cwiseProduct(prob.s_t * dh[k]);
  // Gauss-Newton on (1/sigma^2)|y - mu|^2 + |eta|^2 / 2, scaled by sigma^2 / 2.
  RMat normal = (jac.adjoint() * jac).real();
  normal.diagonal().segment(1, L).array() += 0.5 * prob.noise_power;
  RVec rhs = (jac.adjoint() * (prob.y - mu)).real();
  rhs.segment(1, L) -= 0.5 * prob.noise_power * state.eta_hat;
  const RVec step = normal.ldlt().solve(rhs);
  if (!step.allFinite()) throw std::runtime_error("update_cfo_pn: singular normal matrix");
  CfoPnUpdate out{state.phi_hat + step[0], state.eta_hat + step.segment(1, L), state.position_hat};
  if (with_position) {
    out.position.range += step[L + 1];
    out.position.azimuth += step[L + 2];
    out.position.elevation += step[L + 3];
  }
  return out;
}

namespace {

struct GradientInfo {
  Eigen::Vector3d grad;
  Eigen::Matrix3d curvature;  // Gauss-Newton Hessian
};

GradientInfo gradient_info(const EstimationProblem& prob, const EstimatorState& state) {
  CVec h;
  std::array<CVec, 3> dh;
  prob.model.channel_and_gradient(state.position_hat, prob.w, h, dh);
  const CVec ramp = prob.sqrt_power * phase_ramp(prob.n, state.phi_hat, state.theta_hat);
  const CVec resid = prob.y - ramp.cwiseProduct(prob.s_t * h);
  GradientInfo g;
  std::array<CVec, 3> dmu;
  for (int k = 0; k < 3; ++k) {
    dmu[k] = ramp.cwiseProduct(prob.s_t * dh[k]);
    g.grad[k] = -2.0 / prob.noise_power * resid.dot(dmu[k]).real();
  }
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) g.curvature(k, l) = 2.0 / prob.noise_power * dmu[k].dot(dmu[l]).real();
  return g;
}

PolarPosition scaled_step(const PolarPosition& p, const GradientInfo& g, double t, double floor, bool* clamped) {
  PolarPosition out = p;
  // The polar coordinates are strongly coupled in the near field, so the step uses the full
  // 3x3 curvature; the diagonal is the fallback when that is singular.
  Eigen::Vector3d step = Eigen::Vector3d::Zero();
  const Eigen::LDLT<Eigen::Matrix3d> ldlt(g.curvature);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 1e-12 * ldlt.vectorD().maxCoeff()) {
    step = ldlt.solve(g.grad);
  } else {
    for (int k = 0; k < 3; ++k)
      if (g.curvature(k, k) > 0.0) step[k] = g.grad[k] / g.curvature(k, k);
  }
  out.range -= t * step[0];
  out.azimuth -= t * step[1];
  out.elevation -= t * step[2];
  if (out.range <= floor) {
    out.range = floor;
    if (clamped) *clamped = true;
  }
  if (out.elevation < 0.0 || out.elevation > kPi || out.azimuth <= -kPi || out.azimuth > kPi) {
    const Position3 c = polar_to_cartesian(out);
    if (c.norm() > 0.0) out = cartesian_to_polar(c);
  }
  return out;
}

}  // namespace

Eigen::Vector3d position_gradient(const EstimationProblem& prob, const EstimatorState& state) {
  return gradient_info(prob, state).grad;
}

PolarPosition position_gd_step(const EstimationProblem& prob, const EstimatorState& state, double step_length,
                               double range_floor, bool* clamped) {
  if (step_length == 0.0) return state.position_hat;
  return scaled_step(state.position_hat, gradient_info(prob, state), step_length, range_floor, clamped);
}

EstimatorState run_joint_estimation(const EstimationProblem& prob, const EstimatorConfig& est,
                                    std::vector<TracePoint>* trace) {
  if (!(est.step_length >= 0.0) || est.max_inner < 1 || est.max_outer < 1)
    throw std::invalid_argument("estimator configuration out of range");
  const double tol_in = est.inner_tol(prob.n);
  const double tol_out = est.outer_tol(prob.n);
  EstimatorState s = initial_state(prob, est);
  CVec sth = sth_at(prob, s.position_hat);
  auto record = [&](int outer, int inner) {
    if (trace) trace->push_back({outer, inner, s.inner_iters, s.objective, s.phi_hat, s.position_hat});
  };
  record(0, 0);

  for (int outer = 1; outer <= est.max_outer; ++outer) {
    const double start = s.objective;

    if (est.joint_cfo_pn) {
      const CfoPnUpdate cand = update_cfo_pn(prob, s, est.joint_position);
      const double prev_phi = s.phi_hat;
      const RVec prev_eta = s.eta_hat;
      const PolarPosition prev_pos = s.position_hat;
      double t = 1.0;
      for (int tries = 0; tries < (est.backtracking ? 30 : 1); ++tries, t *= 0.5) {
        const double phi = prev_phi + t * (cand.phi - prev_phi);
        const RVec eta = prev_eta + t * (cand.eta - prev_eta);
        const RVec theta = prob.subspace.projection * eta;
        PolarPosition pos = prev_pos;
        CVec cand_sth = sth;
        if (est.joint_position) {
          pos.range += t * (cand.position.range - prev_pos.range);
          pos.azimuth += t * (cand.position.azimuth - prev_pos.azimuth);
          pos.elevation += t * (cand.position.elevation - prev_pos.elevation);
          if (!valid_position(pos)) continue;
          try {
            cand_sth = sth_at(prob, pos);
          } catch (const DegenerateGeometry&) {
            continue;
          }
        }
        const double val = objective_from_sth(prob, phi, theta, eta, cand_sth);
        if (!est.backtracking || val <= s.objective) {
          s.phi_hat = phi;
          s.eta_hat = eta;
          s.theta_hat = theta;
          s.position_hat = pos;
          s.objective = val;
          sth = cand_sth;
          break;
        }
      }
    }

    // PN coefficients: closed form, pulled back toward the previous value if the exact objective rises.
    if (!est.joint_cfo_pn) {
      const RVec cand = update_eta(prob, s);
      const RVec prev = s.eta_hat;
      double t = 1.0;
      for (int tries = 0; tries < (est.backtracking ? 30 : 1); ++tries, t *= 0.5) {
        const RVec eta = prev + t * (cand - prev);
        const RVec theta = prob.subspace.projection * eta;
        const double val = objective_from_sth(prob, s.phi_hat, theta, eta, sth);
        if (!est.backtracking || val <= s.objective) {
          s.eta_hat = eta;
          s.theta_hat = theta;
          s.objective = val;
          break;
        }
      }
    }

    // CFO: Gauss-Newton closed form with the same safeguard.
    if (!est.joint_cfo_pn) {
      const double cand = update_cfo(prob, s);
      const double prev = s.phi_hat;
      double t = 1.0;
      for (int tries = 0; tries < (est.backtracking ? 30 : 1); ++tries, t *= 0.5) {
        const double phi = prev + t * (cand - prev);
        const double val = objective_from_sth(prob, phi, s.theta_hat, s.eta_hat, sth);
        if (!est.backtracking || val <= s.objective) {
          s.phi_hat = phi;
          s.objective = val;
          break;
        }
      }
    }
    record(outer, 0);

    // Position: scaled gradient descent until the decrease falls below the inner tolerance.
    int inner = 0;
    while (inner < est.max_inner) {
      const GradientInfo g = gradient_info(prob, s);
      double t = est.step_length;
      bool clamped = false;
      PolarPosition cand = scaled_step(s.position_hat, g, t, est.range_floor, &clamped);
      CVec cand_sth;
      double val = std::numeric_limits<double>::infinity();
      for (int tries = 0; tries < 40; ++tries) {
        if (valid_position(cand)) {
          try {
            cand_sth = sth_at(prob, cand);
            val = objective_from_sth(prob, s.phi_hat, s.theta_hat, s.eta_hat, cand_sth);
          } catch (const DegenerateGeometry&) {
            val = std::numeric_limits<double>::infinity();
          }
        }
        if (!est.backtracking || val <= s.objective) break;
        t *= 0.5;
        clamped = false;
        cand = scaled_step(s.position_hat, g, t, est.range_floor, &clamped);
      }
      if (!(val <= s.objective) && est.backtracking) break;  // no descent along the scaled gradient
      if (!std::isfinite(val)) break;
      const double decrease = s.objective - val;
      s.position_hat = cand;
      s.objective = val;
      s.range_clamped = s.range_clamped || clamped;
      sth = cand_sth;
      ++inner;
      ++s.inner_iters;
      record(outer, inner);
      if (std::abs(decrease) <= tol_in) break;
    }
    s.max_inner_loop = std::max(s.max_inner_loop, inner);
    s.outer_iters = outer;
    if (std::abs(start - s.objective) <= tol_out) {
      s.converged = true;
      break;
    }
  }
  return s;
}

EstimatorState run_joint_estimation(const ReceivedSignal& rx, const CVec& w, const PilotSequence& pilots,
                                    const ScenarioConfig& cfg, const EstimatorConfig& est,
                                    std::vector<TracePoint>* trace) {
  return run_joint_estimation(EstimationProblem(rx.y, w, pilots, cfg), est, trace);
}

double rmse_position(const std::vector<Position3>& estimates, const Position3& truth) {
  if (estimates.empty()) throw std::invalid_argument("rmse_position: no estimates");
  double acc = 0.0;
  for (const Position3& p : estimates) {
    const double d = distance(p, truth);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

double joint_cfo_pn_mse(double phi, const RVec& theta, double phi_hat, const RVec& theta_hat) {
  if (theta.size() != theta_hat.size() || theta.size() == 0)
    throw std::invalid_argument("joint_cfo_pn_mse: length mismatch");
  const int n = static_cast<int>(theta.size());
  RVec g(n), gh(n);
  for (int k = 0; k < n; ++k) {
    g[k] = theta[k] + 2.0 * kPi * k * phi / n;
    gh[k] = theta_hat[k] + 2.0 * kPi * k * phi_hat / n;
  }
  g.array() -= g[0];
  gh.array() -= gh[0];
  return (g - gh).squaredNorm();
}

}  // namespace risloc
