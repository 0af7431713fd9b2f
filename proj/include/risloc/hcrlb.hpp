// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "risloc/signal_model.hpp"

namespace risloc {

// Parameter order everywhere: [phi, theta[0..N-1], range, azimuth, elevation].
struct MuJacobian {
  CMat j;  // N x (N+4)
};

struct BimMatrix {
  RMat b;
};

struct TransitionMatrix {
  RMat xi;  // (N+3) x (N+4)
};

struct HcrlbResult {
  RMat bound;  // (N+3) x (N+3)
  double peb = 0.0;
  double cfo_pn_bound = 0.0;
  double condition = 0.0;  // of the Jacobi-scaled BIM
};

inline constexpr double kMaxBimCondition = 1e12;

MuJacobian mu_jacobian(const PolarPosition& ue, const CVec& w, double phi, const RVec& theta,
                       const PilotSequence& pilots, const ScenarioConfig& cfg);
RMat fim(const MuJacobian& jac, double sigma_sq);
BimMatrix bim(const RMat& fim, const PnCovariance& pn);
TransitionMatrix transition_matrix(const PolarPosition& ue, int n_subcarriers);
HcrlbResult hcrlb(const BimMatrix& b, const TransitionMatrix& xi);

// FIM_ij(W) = (2 / sigma^2) Re tr(M_ij W) for W = conj(w) w^T. Stored in factored form:
// per subcarrier n the vectors g_k(n) = G_k S[:, n] with G_0 = G and G_k = dG/d(xi_k).
class WLinearFim {
 public:
  WLinearFim(const PolarPosition& ue, const PilotSequence& pilots, const ScenarioConfig& cfg);

  int n_subcarriers() const { return n_; }
  int n_elements() const { return n_elements_; }
  int n_params() const { return n_ + 4; }
  double power() const { return power_; }
  double noise_power() const { return noise_; }
  // Column n of factor k in {0: channel, 1..3: range/azimuth/elevation derivative}.
  const CMat& factor(int k) const { return g_[k]; }

  CMat coefficient(int i, int j) const;
  RMat evaluate(const CMat& W) const;
  RMat evaluate_rank1(const CVec& w) const;

 private:
  int n_;
  int n_elements_;
  double power_;
  double noise_;
  std::array<CMat, 4> g_;
};

WLinearFim w_linear_fim(const PolarPosition& ue, const PilotSequence& pilots, const ScenarioConfig& cfg);

// PEB at one position, CFO and PN at zero (the FIM does not depend on them).
double position_error_bound(const Position3& ue, const CVec& w, const PilotSequence& pilots, const ScenarioConfig& cfg);

// Repeated PEB evaluation of many phase-shift vectors over fixed positions.
class PebEvaluator {
 public:
  PebEvaluator(const std::vector<Position3>& positions, const PilotSequence& pilots, const ScenarioConfig& cfg);
  size_t size() const { return fims_.size(); }
  HcrlbResult bound_at(size_t i, const CVec& w) const;
  double peb_at(size_t i, const CVec& w) const { return bound_at(i, w).peb; }
  // Mean PEB; +inf when any BIM is singular.
  double average_peb(const CVec& w) const;
  double average_peb_squared(const CVec& w) const;

 private:
  std::vector<WLinearFim> fims_;
  std::vector<TransitionMatrix> transitions_;
  PnCovariance pn_;
};

}  // namespace risloc
