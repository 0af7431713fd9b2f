// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "risloc/signal_model.hpp"

namespace risloc {

struct PnSubspace {
  RMat projection;  // N x L, U_L Diag(sqrt(e_L))
  RVec eigenvalues; // all N, descending
};

PnSubspace build_pn_subspace(const PnCovariance& cov, int L);

struct EstimatorConfig {
  // Position step relative to the diagonal Gauss-Newton curvature of each polar coordinate.
  double step_length = 0.5;
  double eps_inner = 0.0;  // <= 0 selects 1e-6 * N
  double eps_outer = 0.0;  // <= 0 selects 1e-8 * N
  int max_inner = 5000;
  int max_outer = 100;
  Position3 init_position{2.0, 2.0, 0.0};
  double init_phi = 0.0;
  bool backtracking = true;
  double range_floor = 1e-3;
  bool record_trace = false;
  // Solve the CFO and PN updates as one Gauss-Newton system instead of alternating them.
  bool joint_cfo_pn = true;
  // With joint_cfo_pn, let that step move the position as well.
  bool joint_position = true;

  static EstimatorConfig defaults_for(const ScenarioConfig& cfg);
  double inner_tol(int n) const { return eps_inner > 0 ? eps_inner : 1e-6 * n; }
  double outer_tol(int n) const { return eps_outer > 0 ? eps_outer : 1e-8 * n; }
};

struct EstimatorState {
  double phi_hat = 0.0;
  RVec eta_hat;
  RVec theta_hat;
  PolarPosition position_hat;
  double objective = 0.0;
  int inner_iters = 0;      // total over all inner loops
  int max_inner_loop = 0;   // longest single inner loop
  int outer_iters = 0;
  bool converged = false;
  bool range_clamped = false;
};

struct EstimatorWorkspace {
  CVec y_bar;
  CMat q;
  CVec d_vec;
};

struct TracePoint {
  int outer = 0;
  int inner = 0;        // index inside the current inner loop; 0 marks the outer-loop boundary
  int inner_total = 0;
  double objective = 0.0;
  double phi_hat = 0.0;
  PolarPosition position;
};

// Everything the estimator needs that does not change across iterations.
struct EstimationProblem {
  EstimationProblem(const CVec& y, const CVec& w, const PilotSequence& pilots, const ScenarioConfig& cfg);

  CVec y;
  CVec w;
  ScenarioConfig cfg;
  ChannelModel model;
  CMat s_t;  // S^T
  PnCovariance pn;
  PnSubspace subspace;
  double sqrt_power;
  double noise_power;
  int n;
};

EstimatorState initial_state(const EstimationProblem& prob, const EstimatorConfig& est);

// (1/sigma^2) ||y - mu||^2 only.
double likelihood_term(const EstimationProblem& prob, double phi, const RVec& theta, const PolarPosition& pos);
double objective(const EstimationProblem& prob, const EstimatorState& state);

EstimatorWorkspace build_workspace(const EstimationProblem& prob, const EstimatorState& state);
RVec update_eta(const EstimationProblem& prob, const EstimatorState& state);
// Residual of the regularized normal equations at eta.
RVec eta_normal_residual(const EstimationProblem& prob, const EstimatorState& state, const RVec& eta);
double update_cfo(const EstimationProblem& prob, const EstimatorState& state);

struct CfoPnUpdate {
  double phi;
  RVec eta;
  PolarPosition position;
};
// Joint Gauss-Newton step in (phi, eta), and the polar position when requested, prior included.
CfoPnUpdate update_cfo_pn(const EstimationProblem& prob, const EstimatorState& state, bool with_position = false);

Eigen::Vector3d position_gradient(const EstimationProblem& prob, const EstimatorState& state);
// One scaled gradient step of the given relative length; flags clamping in `clamped` when non-null.
PolarPosition position_gd_step(const EstimationProblem& prob, const EstimatorState& state, double step_length,
                               double range_floor = 1e-3, bool* clamped = nullptr);

EstimatorState run_joint_estimation(const EstimationProblem& prob, const EstimatorConfig& est,
                                    std::vector<TracePoint>* trace = nullptr);
EstimatorState run_joint_estimation(const ReceivedSignal& rx, const CVec& w, const PilotSequence& pilots,
                                    const ScenarioConfig& cfg, const EstimatorConfig& est,
                                    std::vector<TracePoint>* trace = nullptr);

double rmse_position(const std::vector<Position3>& estimates, const Position3& truth);
double joint_cfo_pn_mse(double phi, const RVec& theta, double phi_hat, const RVec& theta_hat);

}  // namespace risloc
