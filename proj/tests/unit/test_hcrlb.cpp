// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "risloc/hcrlb.hpp"

using namespace risloc;
using namespace risloc::testing;
using Catch::Approx;

namespace {

// Mean of y as a function of the full parameter vector (phi, theta, range, az, el).
CVec mu_of(const RVec& lambda, const CVec& w, const PilotSequence& pilots, const ScenarioConfig& cfg) {
  const int n = cfg.n_subcarriers;
  const PolarPosition p{lambda[n + 1], lambda[n + 2], lambda[n + 3]};
  const CVec sth = build_signal_matrix(pilots).s.transpose() * channel_vector(polar_to_cartesian(p), w, cfg).h;
  return received_mean(sth, lambda[0], lambda.segment(1, n), std::sqrt(cfg.tx_power_w));
}

RVec pack(double phi, const RVec& theta, const PolarPosition& p) {
  const int n = static_cast<int>(theta.size());
  RVec l(n + 4);
  l << phi, theta, p.range, p.azimuth, p.elevation;
  return l;
}

}  // namespace

TEST_CASE("mu Jacobian matches central differences at random AOI points", "[hcrlb][oracle]") {
  const ScenarioConfig cfg = small_scenario(49, 16);
  const PilotSequence pilots = PilotSequence::qpsk(16);
  Rng rng = make_rng(31);
  const double h = 1e-6;
  for (int i = 0; i < 10; ++i) {
    const PolarPosition p = cartesian_to_polar(random_aoi_point(cfg, rng));
    const CVec w = random_unit_modulus(49, rng);
    const RVec theta = sample_phase_noise(build_pn_covariance(16, 1e-3), 100 + i).theta;
    const double phi = 0.1 * (i - 5) / 5.0;
    const MuJacobian jac = mu_jacobian(p, w, phi, theta, pilots, cfg);
    REQUIRE(jac.j.rows() == 16);
    REQUIRE(jac.j.cols() == 20);
    const RVec l0 = pack(phi, theta, p);
    for (int c = 0; c < 20; ++c) {
      auto f = [&](double v) {
        RVec l = l0;
        l[c] = v;
        return mu_of(l, w, pilots, cfg);
      };
      REQUIRE(rel_err_mat(CVec(jac.j.col(c)), central_diff(f, l0[c], h)) < 1e-4);
    }
    // theta column n has a single nonzero entry, in row n
    for (int k = 0; k < 16; ++k) {
      CVec col = jac.j.col(1 + k);
      REQUIRE(std::abs(col[k]) > 0.0);
      col[k] = 0.0;
      REQUIRE(col.norm() == 0.0);
    }
  }
  ScenarioConfig off = cfg;
  off.tx_power_w = 0.0;
  const PolarPosition p = cartesian_to_polar({1.5, 2.15, 0.45});
  CHECK(mu_jacobian(p, CVec::Ones(49), 0.0, RVec::Zero(16), pilots, off).j.norm() == 0.0);
}

TEST_CASE("FIM is symmetric PSD and independent of (phi, theta)", "[hcrlb][property]") {
  const ScenarioConfig cfg = default_scenario(81);
  const PilotSequence pilots = PilotSequence::qpsk(32);
  Rng rng = make_rng(32);
  for (int i = 0; i < 10; ++i) {
    const PolarPosition p = cartesian_to_polar(random_aoi_point(cfg, rng));
    const CVec w = random_unit_modulus(81, rng);
    const RMat f0 = fim(mu_jacobian(p, w, 0.0, RVec::Zero(32), pilots, cfg), cfg.noise_power_w);
    const RVec theta = sample_phase_noise(build_pn_covariance(32, 1e-3), 200 + i).theta;
    const RMat f1 = fim(mu_jacobian(p, w, 0.13, theta, pilots, cfg), cfg.noise_power_w);
    REQUIRE(rel_err_mat(f0, f1) < 1e-10);
    REQUIRE((f0 - f0.transpose()).norm() == 0.0);
    REQUIRE((f0.diagonal().array() >= 0.0).all());
    const double lo = Eigen::SelfAdjointEigenSolver<RMat>(f0).eigenvalues().minCoeff();
    REQUIRE(lo >= -1e-9 * f0.norm());
    const BimMatrix b = bim(f0, build_pn_covariance(32, 1e-3));
    REQUIRE(Eigen::LLT<RMat>(b.b).info() == Eigen::Success);
  }
  CHECK(fim(MuJacobian{CMat::Zero(4, 8)}, 1.0).norm() == 0.0);
}

TEST_CASE("BIM adds the PN prior in the theta block only", "[hcrlb]") {
  const PnCovariance pn = build_pn_covariance(2, 0.5);
  // [[0.5, 0.5], [0.5, 1]]^-1 = [[4, -2], [-2, 2]]
  const BimMatrix b = bim(RMat::Zero(6, 6), pn);
  RMat expect = RMat::Zero(6, 6);
  expect.block(1, 1, 2, 2) << 4, -2, -2, 2;
  CHECK((b.b - expect).norm() < 1e-12);
  CHECK_THROWS(bim(RMat::Zero(5, 5), pn));
  // zero power: singular BIM, the bound refuses
  CHECK_THROWS_AS(hcrlb(b, transition_matrix({1.0, 0.2, 1.0}, 2)), SingularMatrix);
}

TEST_CASE("transition matrix structure", "[hcrlb]") {
  const TransitionMatrix t = transition_matrix({1.0, 0.0, kPi / 2}, 3);
  RMat xi1(3, 4);
  xi1 << 0, 0, 0, 0, 2 * kPi / 3, -1, 1, 0, 4 * kPi / 3, -1, 0, 1;
  CHECK((t.xi.topLeftCorner(3, 4) - xi1).norm() < 1e-15);
  RMat xi2(3, 3);
  xi2 << 1, 0, 0, 0, 1, 0, 0, 0, -1;
  CHECK((t.xi.bottomRightCorner(3, 3) - xi2).norm() < 1e-15);
  CHECK(t.xi.topRightCorner(3, 3).norm() == 0.0);
  CHECK(t.xi.bottomLeftCorner(3, 4).norm() == 0.0);
  CHECK_THROWS_AS(transition_matrix({1.0, 0.0, 0.0}, 3), DegenerateGeometry);
}

TEST_CASE("HCRLB on hand-built inputs", "[hcrlb]") {
  // Xi = I (square), B = 2I
  const int n = 4;
  TransitionMatrix t{RMat::Identity(n + 3, n + 4)};
  BimMatrix b{RMat::Identity(n + 4, n + 4) * 2.0};
  const HcrlbResult r = hcrlb(b, t);
  CHECK((r.bound - 0.5 * RMat::Identity(n + 3, n + 3)).norm() < 1e-15);
  CHECK(r.peb == Approx(std::sqrt(1.5)));
  CHECK(r.cfo_pn_bound == Approx(2.0));

  // general diagonal B against Xi diag^-1 Xi^T
  Rng rng = make_rng(33);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  RVec d(n + 4);
  for (int i = 0; i < n + 4; ++i) d[i] = u(rng);
  const TransitionMatrix xi = transition_matrix({2.0, 0.4, 1.1}, n);
  const HcrlbResult g = hcrlb(BimMatrix{RMat(d.asDiagonal())}, xi);
  const RMat expect = xi.xi * d.cwiseInverse().asDiagonal() * xi.xi.transpose();
  CHECK(rel_err_mat(g.bound, expect) < 1e-13);
  CHECK(g.peb == Approx(std::sqrt(expect.bottomRightCorner(3, 3).trace())));
  CHECK(g.cfo_pn_bound == Approx(expect.topLeftCorner(n, n).trace()));
}

TEST_CASE("PEB falls as transmit power rises", "[hcrlb][property]") {
  const PilotSequence pilots = PilotSequence::qpsk(32);
  Rng rng = make_rng(34);
  for (int i = 0; i < 10; ++i) {
    ScenarioConfig cfg = default_scenario(49);
    const Position3 ue = random_aoi_point(cfg, rng);
    const CVec w = random_unit_modulus(49, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (double dbm : {-30.0, -20.0, -10.0, 0.0}) {
      cfg.set_tx_power_dbm(dbm);
      const double peb = position_error_bound(ue, w, pilots, cfg);
      REQUIRE(peb < prev);
      prev = peb;
    }
  }
}

TEST_CASE("PEB is invariant to a global phase of w", "[hcrlb][property]") {
  const ScenarioConfig cfg = default_scenario(81);
  const PilotSequence pilots = PilotSequence::qpsk(32);
  Rng rng = make_rng(35);
  for (int i = 0; i < 5; ++i) {
    const Position3 ue = random_aoi_point(cfg, rng);
    const CVec w = random_unit_modulus(81, rng);
    const double a = position_error_bound(ue, w, pilots, cfg);
    REQUIRE(rel_err(a, position_error_bound(ue, CVec(w * std::polar(1.0, 0.3 + i)), pilots, cfg)) < 1e-10);
  }
}

TEST_CASE("W-linear FIM reconstruction matches the direct FIM", "[hcrlb][oracle]") {
  const ScenarioConfig cfg = default_scenario(81);
  const PilotSequence pilots = PilotSequence::qpsk(32);
  Rng rng = make_rng(36);
  const PolarPosition p = cartesian_to_polar({1.5, 2.15, 0.45});
  const WLinearFim lin(p, pilots, cfg);
  RMat f_prev;
  CMat w_prev;
  for (int i = 0; i < 5; ++i) {
    const CVec w = random_unit_modulus(81, rng);
    const RMat direct = fim(mu_jacobian(p, w, 0.0, RVec::Zero(32), pilots, cfg), cfg.noise_power_w);
    const CVec wc = w.conjugate();  // h = G^T w, so W = conj(w) w^T
    const CMat W = wc * wc.adjoint();
    const RMat f = lin.evaluate(W);
    REQUIRE((f - direct).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE(rel_err_mat(lin.evaluate_rank1(w), direct) < 1e-10);
    // coefficient matrices: FIM_ij = (2/sigma^2) Re tr(C_ij W)
    for (auto [a, b] : {std::pair{0, 0}, std::pair{0, 5}, std::pair{3, 3}, std::pair{33, 34}, std::pair{35, 0}}) {
      const double v = 2.0 / cfg.noise_power_w * (lin.coefficient(a, b) * W).trace().real();
      REQUIRE(rel_err(v, direct(a, b)) < 1e-9);
    }
    if (i > 0) {
      const double alpha = 0.3;
      const RMat mix = lin.evaluate(alpha * W + (1 - alpha) * w_prev);
      REQUIRE(rel_err_mat(mix, RMat(alpha * f + (1 - alpha) * f_prev)) < 1e-12);
    }
    f_prev = f;
    w_prev = W;
  }
  // one element: W is the scalar 1
  const ScenarioConfig one = default_scenario(1);
  const WLinearFim l1(p, pilots, one);
  const RMat d1 = fim(mu_jacobian(p, CVec::Ones(1), 0.0, RVec::Zero(32), pilots, one), one.noise_power_w);
  CHECK(rel_err_mat(l1.evaluate(CMat::Ones(1, 1)), d1) < 1e-13);
}

TEST_CASE("PEB evaluator agrees with the one-shot bound", "[hcrlb]") {
  const ScenarioConfig cfg = default_scenario(49);
  const PilotSequence pilots = PilotSequence::qpsk(32);
  Rng rng = make_rng(37);
  std::vector<Position3> pts;
  for (int i = 0; i < 4; ++i) pts.push_back(random_aoi_point(cfg, rng));
  const PebEvaluator ev(pts, pilots, cfg);
  const CVec w = random_unit_modulus(49, rng);
  double mean = 0.0, mean_sq = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) {
    const double peb = position_error_bound(pts[i], w, pilots, cfg);
    REQUIRE(rel_err(ev.peb_at(i, w), peb) < 1e-9);
    mean += peb / 4;
    mean_sq += peb * peb / 4;
  }
  CHECK(rel_err(ev.average_peb(w), mean) < 1e-9);
  CHECK(rel_err(ev.average_peb_squared(w), mean_sq) < 1e-9);
}
