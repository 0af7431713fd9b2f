// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "risloc/ris_optimizer.hpp"

using namespace risloc;
using namespace risloc::testing;
using Catch::Approx;

namespace {

constexpr double kTol = 1e-7;

// Pins the off-diagonal entries of W; the assembly already fixes diag(W) = 1.
void pin_w(sdp::ConeProgram& prog, int block, const CMat& target) {
  const int n = static_cast<int>(target.rows());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      CMat re = CMat::Zero(n, n);
      re(i, j) += 0.5;
      re(j, i) += 0.5;
      prog.equalities.push_back({sdp::LinearFunctional().add(block, re), target(i, j).real()});
      CMat im = CMat::Zero(n, n);
      im(i, j) = cd(0, 0.5);
      im(j, i) = cd(0, -0.5);
      prog.equalities.push_back({sdp::LinearFunctional().add(block, im), target(i, j).imag()});
    }
}

double lmi_min_eig(const SdrProblem& prob, const std::vector<CMat>& blocks) {
  double lo = std::numeric_limits<double>::infinity();
  for (int k = 0; k < static_cast<int>(prob.program.psd.size()); ++k)
    lo = std::min(lo, Eigen::SelfAdjointEigenSolver<RMat>(sdp::psd_value(prob.program, k, blocks)).eigenvalues().minCoeff());
  return lo;
}

}  // namespace

TEST_CASE("AOI sampling", "[ris]") {
  ScenarioConfig cfg = default_scenario(16);
  const auto a = sample_aoi(cfg, 50, 1);
  CHECK(a.size() == 50);
  for (const Position3& p : a) {
    REQUIRE(std::abs(p.x - cfg.aoi_center.x) <= cfg.aoi_edge / 2);
    REQUIRE(std::abs(p.y - cfg.aoi_center.y) <= cfg.aoi_edge / 2);
    REQUIRE(std::abs(p.z - cfg.aoi_center.z) <= cfg.aoi_edge / 2);
  }
  CHECK(sample_aoi(cfg, 50, 1) == a);
  CHECK(sample_aoi(cfg, 50, 2) != a);
  cfg.aoi_edge = 0.0;
  CHECK(sample_aoi(cfg, 1, 9).front() == cfg.aoi_center);
  CHECK_THROWS(sample_aoi(cfg, 0, 1));
}

TEST_CASE("SDR assembly structure", "[ris]") {
  const ScenarioConfig cfg = small_scenario(4, 8);
  const PilotSequence pilots = PilotSequence::qpsk(8);
  const SdrProblem prob = assemble_sdr({{1.6, 2.2, 0.3}}, pilots, cfg);
  // U = 1: the objective is tr Z_1
  REQUIRE(prob.program.objective.terms.size() == 1);
  CHECK(prob.program.objective.terms[0].block == prob.z_blocks[0]);
  CHECK((prob.program.objective.terms[0].coeff - CMat::Identity(3, 3)).norm() == 0.0);
  CHECK(prob.program.equalities.size() == 4);  // diag(W) = 1
  CHECK_NOTHROW(prob.program.validate());

  // one-dimensional Schur check: Z = 2, Xi = 1, B = 1
  RMat blk(2, 2);
  blk << 2, 1, 1, 1;
  CHECK(Eigen::SelfAdjointEigenSolver<RMat>(blk).eigenvalues().minCoeff() >= 0.0);
  CHECK(2.0 >= 1.0 * 1.0 / 1.0);
}

TEST_CASE("at a pinned W the minimal trace Z is the bound built from FIM(W)", "[ris][oracle]") {
  // A rank-one W has no strictly feasible neighbourhood, so pin a full-rank mix with the identity.
  const ScenarioConfig cfg = small_scenario(4, 8);
  const PilotSequence pilots = PilotSequence::qpsk(8);
  const PnCovariance pn = build_pn_covariance(8, cfg.pn_increment_var);
  Rng rng = make_rng(61);
  for (double alpha : {0.5, 0.1, 0.01}) {
    const Position3 p = random_aoi_point(cfg, rng);
    const CVec wc = random_unit_modulus(4, rng).conjugate();
    const CMat target = (1 - alpha) * wc * wc.adjoint() + alpha * CMat::Identity(4, 4);
    SdrProblem prob = assemble_sdr({p}, pilots, cfg);
    pin_w(prob.program, prob.w_block, target);
    const SdrSolution sol = solve_sdr(prob, pilots, cfg);
    REQUIRE(sol.report.status == sdp::SolverStatus::optimal);
    const PolarPosition pp = cartesian_to_polar(p);
    const HcrlbResult b = hcrlb(bim(WLinearFim(pp, pilots, cfg).evaluate(target), pn), transition_matrix(pp, 8));
    REQUIRE(rel_err(sol.objective, b.peb * b.peb) < 1e-5);
  }
}

TEST_CASE("SDR solution contracts", "[ris][property]") {
  const ScenarioConfig cfg = small_scenario(9, 8);
  const PilotSequence pilots = PilotSequence::qpsk(8);
  const auto samples = sample_aoi(cfg, 3, 5);
  const SdrProblem prob = assemble_sdr(samples, pilots, cfg);
  SdrOptions opts;
  opts.randomization_candidates = 50;
  const SdrSolution sol = solve_sdr(prob, pilots, cfg, opts);
  REQUIRE(sol.report.status == sdp::SolverStatus::optimal);
  CHECK(std::max({sol.kkt.primal, sol.kkt.dual, sol.kkt.gap}) <= kTol);
  for (int r = 0; r < 9; ++r) CHECK(std::abs(sol.w_matrix(r, r) - 1.0) <= 10 * kTol);
  const sdp::Solution raw = sdp::solve(prob.program);
  CHECK(lmi_min_eig(prob, raw.x.blocks) >= -10 * kTol * std::max(1.0, raw.x.blocks[0].norm()));
  for (int r = 0; r < 9; ++r) CHECK(std::abs(sol.w[r]) == Approx(1.0).epsilon(1e-15));
  // the relaxation lower-bounds the realized mean PEB^2
  CHECK(sol.objective <= sol.realized_mean_peb_sq * (1 + 10 * kTol));
  // and the optimized w beats every random baseline
  const PebEvaluator ev(samples, pilots, cfg);
  for (int i = 0; i < 20; ++i) REQUIRE(sol.realized_mean_peb <= ev.average_peb(random_phase_shifts(9, 100 + i)));
}

TEST_CASE("SDR against exhaustive 16-phase search at N_R = 4", "[ris][oracle]") {
  ScenarioConfig cfg = small_scenario(4, 4);
  const PilotSequence pilots = PilotSequence::qpsk(4);
  const auto samples = sample_aoi(cfg, 1, 3);
  const PebEvaluator ev(samples, pilots, cfg);
  SdrOptions opts;
  opts.randomization_candidates = 200;
  const SdrSolution sol = solve_sdr(assemble_sdr(samples, pilots, cfg), pilots, cfg, opts);
  REQUIRE(sol.report.status == sdp::SolverStatus::optimal);
  double best = std::numeric_limits<double>::infinity();
  CVec w(4);
  for (int k = 0; k < 65536; ++k) {
    for (int i = 0, c = k; i < 4; ++i, c /= 16) w[i] = std::polar(1.0, 2 * kPi * (c % 16) / 16.0);
    best = std::min(best, ev.average_peb(w));
  }
  CHECK(ev.average_peb(sol.w) <= 1.2 * best);
}

TEST_CASE("rank-one extraction", "[ris]") {
  Rng rng = make_rng(62);
  for (int n : {2, 5, 16}) {
    const CVec v = random_unit_modulus(n, rng);
    const Rank1Extraction ex = extract_rank1(v * v.adjoint());
    CHECK(ex.zero_entries.empty());
    const CVec back = ex.w.conjugate();
    const cd rot = back[0] / v[0];
    CHECK((back - rot * v).norm() < 1e-12);
    for (int r = 0; r < n; ++r) REQUIRE(std::abs(ex.w[r]) == 1.0);
  }
  const Rank1Extraction id = extract_rank1(CMat::Identity(2, 2));
  CHECK(id.zero_entries.size() == 1);
  CHECK((id.w - CVec::Ones(2)).norm() == 0.0);
  CHECK(extract_rank1(CMat::Identity(2, 2)).w == id.w);
  // generic PSD input still yields exact unit modulus
  CMat g(6, 6);
  for (int i = 0; i < 6; ++i) g.col(i) = random_complex(6, rng);
  const Rank1Extraction gen = extract_rank1(g * g.adjoint());
  for (int r = 0; r < 6; ++r) CHECK(std::abs(gen.w[r]) == 1.0);
}

TEST_CASE("Gaussian randomization", "[ris]") {
  const ScenarioConfig cfg = small_scenario(9, 8);
  const PilotSequence pilots = PilotSequence::qpsk(8);
  const auto samples = sample_aoi(cfg, 2, 7);
  const PebEvaluator ev(samples, pilots, cfg);
  Rng rng = make_rng(63);
  CMat g(9, 9);
  for (int i = 0; i < 9; ++i) g.col(i) = random_complex(9, rng);
  CMat w = g * g.adjoint();
  for (int r = 0; r < 9; ++r) w.row(r) /= std::sqrt(w(r, r).real());
  for (int c = 0; c < 9; ++c) w.col(c) /= std::sqrt(w(c, c).real());
  const CVec eig = extract_rank1(w).w;
  CHECK(gaussian_randomization(w, 0, 1, ev) == eig);
  const CVec best = gaussian_randomization(w, 100, 1, ev);
  CHECK(ev.average_peb(best) <= ev.average_peb(eig));
  CHECK(gaussian_randomization(w, 100, 1, ev) == best);
  for (int r = 0; r < 9; ++r) CHECK(std::abs(best[r]) == Approx(1.0).epsilon(1e-15));
  CHECK_THROWS(gaussian_randomization(w, -1, 1, ev));
}

TEST_CASE("random phase shifts", "[ris]") {
  const CVec a = random_phase_shifts(81, 4);
  CHECK(a == random_phase_shifts(81, 4));
  CHECK(a != random_phase_shifts(81, 5));
  for (int r = 0; r < 81; ++r) CHECK(std::abs(a[r]) == Approx(1.0).epsilon(1e-15));

  // Kolmogorov-Smirnov against U[0, 2 pi): critical value 1.628 / sqrt(n) at alpha = 0.01
  const int draws = 100000;
  std::vector<double> ph;
  ph.reserve(draws);
  for (int i = 0; i < draws / 100; ++i) {
    const CVec w = random_phase_shifts(100, 1000 + i);
    for (int r = 0; r < 100; ++r) {
      double t = std::arg(w[r]);
      ph.push_back(t < 0 ? t + 2 * kPi : t);
    }
  }
  std::sort(ph.begin(), ph.end());
  double d = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double f = ph[i] / (2 * kPi);
    d = std::max({d, (i + 1.0) / draws - f, f - double(i) / draws});
  }
  CHECK(d < 1.628 / std::sqrt(double(draws)));
}

TEST_CASE("phase CSV round trip", "[ris]") {
  const auto dir = scratch_dir("phase");
  const CVec w = random_phase_shifts(49, 3);
  write_phase_csv((dir / "w.csv").string(), w);
  const CVec back = read_phase_csv((dir / "w.csv").string());
  REQUIRE(back.size() == 49);
  CHECK((back - w).cwiseAbs().maxCoeff() < 1e-15);
}
