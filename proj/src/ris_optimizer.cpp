// SPDX-License-Identifier: Apache-2.0
#include "risloc/ris_optimizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "risloc/csv.hpp"
#include "risloc/random.hpp"

namespace risloc {

std::vector<Position3> sample_aoi(const ScenarioConfig& cfg, int u, std::uint64_t seed) {
  if (u < 1) throw std::invalid_argument("sample_aoi: U must be at least 1");
  Rng rng = make_rng(derive_seed(seed, {0xA01}));
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  std::vector<Position3> out;
  for (int i = 0; i < u; ++i) {
    const double dx = unit(rng), dy = unit(rng), dz = unit(rng);
    out.push_back({cfg.aoi_center.x + cfg.aoi_edge * dx, cfg.aoi_center.y + cfg.aoi_edge * dy,
                   cfg.aoi_center.z + cfg.aoi_edge * dz});
  }
  return out;
}

SdrProblem assemble_sdr(const std::vector<Position3>& samples, const PilotSequence& pilots, const ScenarioConfig& cfg) {
  if (samples.empty()) throw std::invalid_argument("assemble_sdr: no samples");
  if (!(cfg.tx_power_w > 0.0)) throw std::invalid_argument("assemble_sdr: information matrix is singular at zero power");
  const int nr = cfg.ris.n_elements, n = cfg.n_subcarriers, u = static_cast<int>(samples.size());
  const int np = n + 4, dim = 3 + np;
  const PnCovariance pn = build_pn_covariance(n, cfg.pn_increment_var);

  SdrProblem prob;
  prob.samples = samples;
  sdp::ConeProgram& prog = prob.program;
  prob.w_block = prog.add_block("W", nr, sdp::BlockKind::hermitian);
  for (int i = 0; i < u; ++i) prob.z_blocks.push_back(prog.add_block("Z" + std::to_string(i), 3, sdp::BlockKind::symmetric));

  std::vector<WLinearFim> fims;
  std::vector<RMat> xis, priors;
  double mean_trace = 0.0;
  for (const Position3& p : samples) {
    const PolarPosition pp = cartesian_to_polar(p);
    fims.emplace_back(pp, pilots, cfg);
    xis.push_back(transition_matrix(pp, n).xi.bottomRows(3));
    const BimMatrix at_identity = bim(fims.back().evaluate(CMat::Identity(nr, nr)), pn);
    const RVec d = at_identity.b.diagonal().cwiseSqrt().cwiseInverse();
    if (!d.allFinite()) throw SingularMatrix("assemble_sdr: information matrix has a zero diagonal", 0.0);
    prob.lmi_scaling.push_back(d);
    const RMat scaled = d.asDiagonal() * at_identity.b * d.asDiagonal();
    Eigen::LDLT<RMat> ldlt(scaled);
    const RMat xd = xis.back() * d.asDiagonal();
    mean_trace += (xd * ldlt.solve(xd.transpose())).trace() / u;
    priors.push_back(bim(RMat::Zero(np, np), pn).b);
  }
  prob.objective_scale = (mean_trace > 0.0 && std::isfinite(mean_trace)) ? 1.0 / mean_trace : 1.0;
  const double s = prob.objective_scale;

  for (int z : prob.z_blocks) prog.objective.add(z, CMat::Identity(3, 3) / double(u));
  {
    const int w = prob.w_block;
    for (int r = 0; r < nr; ++r) {
      CMat e = CMat::Zero(nr, nr);
      e(r, r) = 1.0;
      prog.equalities.push_back({sdp::LinearFunctional().add(w, e), 1.0});
    }
    prog.psd.push_back(sdp::PsdConstraint::variable(w));
  }

  auto sym_unit = [&](int i, int j) {
    RMat b = RMat::Zero(dim, dim);
    b(i, j) = 1.0;
    b(j, i) = 1.0;
    return b;
  };
  const double kappa = 2.0 * cfg.tx_power_w / cfg.noise_power_w;
  const int o = 3;  // first BIM row inside the LMI
  for (int su = 0; su < u; ++su) {
    const WLinearFim& f = fims[su];
    const RVec& d = prob.lmi_scaling[su];
    RMat constant = RMat::Zero(dim, dim);
    constant.block(0, o, 3, np) = std::sqrt(s) * xis[su] * d.asDiagonal();
    constant.block(o, 0, np, 3) = constant.block(0, o, 3, np).transpose();
    constant.block(o, o, np, np) = d.asDiagonal() * priors[su] * d.asDiagonal();
    sdp::PsdConstraint lmi = sdp::PsdConstraint::affine(constant);

    const int zb = prob.z_blocks[su];
    for (int k = 0; k < 3; ++k)
      for (int l = k; l < 3; ++l) {
        CMat c = CMat::Zero(3, 3);
        c(k, l) += 0.5;
        c(l, k) += 0.5;
        lmi.add(sdp::LinearFunctional().add(zb, c), sym_unit(k, l));
      }

    const int w = prob.w_block;
    const double dphi = d[0];
    const auto& g0 = f.factor(0);
    for (int q = 0; q < n; ++q) {
      const double om = 2.0 * kPi * q / n;
      const int th = o + 1 + q;
      const double dth = d[1 + q];
      // Re(g0^H W g0) feeds the (phi, theta_q) corner.
      RMat b = RMat::Zero(dim, dim);
      b(th, th) = 1.0;
      b(o, th) = b(th, o) = om * dphi / dth;
      b(o, o) = om * om * dphi * dphi / (dth * dth);
      const CMat c = (kappa * dth * dth) * (g0.col(q) * g0.col(q).adjoint());
      lmi.add(sdp::LinearFunctional().add(w, c), b);
      // Im(g0^H W g_k) couples theta_q and phi with the position parameters.
      for (int k = 0; k < 3; ++k) {
        const int pk = o + n + 1 + k;
        const double dp = d[n + 1 + k];
        RMat bk = sym_unit(th, pk);
        bk(o, pk) = bk(pk, o) = om * dphi / dth;
        const CMat ck = (kJ * kappa * dth * dp) * (g0.col(q) * f.factor(k + 1).col(q).adjoint());
        lmi.add(sdp::LinearFunctional().add(w, ck), bk);
      }
    }
    for (int k = 0; k < 3; ++k)
      for (int l = k; l < 3; ++l) {
        const int pk = o + n + 1 + k, pl = o + n + 1 + l;
        RMat b = RMat::Zero(dim, dim);
        b(pk, pl) = b(pl, pk) = 1.0;
        const CMat c = (kappa * d[n + 1 + k] * d[n + 1 + l]) * (f.factor(k + 1) * f.factor(l + 1).adjoint());
        lmi.add(sdp::LinearFunctional().add(w, c), b);
      }
    prog.psd.push_back(std::move(lmi));
  }
  prog.validate();
  return prob;
}

Rank1Extraction extract_rank1(const CMat& w_matrix) {
  const Eigen::Index n = w_matrix.rows();
  if (n < 1 || w_matrix.cols() != n) throw std::invalid_argument("extract_rank1: W must be square and non-empty");
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (w_matrix + w_matrix.adjoint()));
  const double lmax = std::max(es.eigenvalues()[n - 1], 0.0);
  const CVec v = std::sqrt(lmax) * es.eigenvectors().col(n - 1);
  const double top = v.cwiseAbs().maxCoeff();
  Rank1Extraction out;
  CVec wbar(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double a = std::abs(v[r]);
    if (!(a > 1e-12 * top) || !(top > 0.0)) {
      wbar[r] = 1.0;
      out.zero_entries.push_back(static_cast<int>(r));
    } else {
      wbar[r] = v[r] / a;
    }
  }
  // Global phase is unobservable in W; fix it with the first entry.
  wbar *= std::conj(wbar[0]);
  for (Eigen::Index r = 0; r < n; ++r) wbar[r] /= std::abs(wbar[r]);
  out.w = wbar.conjugate();
  return out;
}

PhaseShiftVector gaussian_randomization(const CMat& w_matrix, int n_candidates, std::uint64_t seed,
                                        const PebEvaluator& evaluator) {
  if (n_candidates < 0) throw std::invalid_argument("gaussian_randomization: negative candidate count");
  PhaseShiftVector best = extract_rank1(w_matrix).w;
  if (n_candidates == 0) return best;
  double best_peb = evaluator.average_peb(best);
  const Eigen::Index n = w_matrix.rows();
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (w_matrix + w_matrix.adjoint()));
  const CMat root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Rng rng = make_rng(derive_seed(seed, {0xA02}));
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  for (int c = 0; c < n_candidates; ++c) {
    CVec z(n);
    for (Eigen::Index r = 0; r < n; ++r) z[r] = cd(normal(rng), normal(rng));
    const CVec wbar = root * z;
    PhaseShiftVector w(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const double a = std::abs(wbar[r]);
      w[r] = a > 0.0 ? std::conj(wbar[r]) / a : cd(1.0);
    }
    const double peb = evaluator.average_peb(w);
    if (peb < best_peb) {
      best_peb = peb;
      best = w;
    }
  }
  return best;
}

PhaseShiftVector random_phase_shifts(int n_elements, std::uint64_t seed) {
  if (n_elements < 1) throw std::invalid_argument("random_phase_shifts: need at least one element");
  Rng rng = make_rng(derive_seed(seed, {0xA03}));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  PhaseShiftVector w(n_elements);
  for (int r = 0; r < n_elements; ++r) w[r] = std::polar(1.0, phase(rng));
  return w;
}

SdrSolution solve_sdr(const SdrProblem& problem, const PilotSequence& pilots, const ScenarioConfig& cfg,
                      const SdrOptions& opts) {
  const sdp::Solution sol = sdp::solve(problem.program, opts.solver);
  SdrSolution out;
  out.samples = problem.samples;
  out.report = sol.report;
  out.kkt = sdp::kkt_residuals(problem.program, sol.x);
  out.w_matrix = sol.x.blocks[problem.w_block];
  const double s = problem.objective_scale;
  out.objective = 0.0;
  for (int z : problem.z_blocks) {
    out.z.push_back(sol.x.blocks[z].real() / s);
    out.objective += out.z.back().trace() / static_cast<double>(problem.z_blocks.size());
  }
  out.report.objective /= s;
  out.report.dual_objective /= s;

  const PebEvaluator evaluator(problem.samples, pilots, cfg);
  const Rank1Extraction ex = extract_rank1(out.w_matrix);
  out.zero_entries = ex.zero_entries;
  out.w = opts.randomization_candidates > 0
              ? gaussian_randomization(out.w_matrix, opts.randomization_candidates, opts.randomization_seed, evaluator)
              : ex.w;
  out.realized_mean_peb = evaluator.average_peb(out.w);
  out.realized_mean_peb_sq = evaluator.average_peb_squared(out.w);
  return out;
}

SdrSolution optimize_phase_shifts(const ScenarioConfig& cfg, int u, std::uint64_t seed, const SdrOptions& opts) {
  const PilotSequence pilots = PilotSequence::qpsk(cfg.n_subcarriers);
  const SdrProblem prob = assemble_sdr(sample_aoi(cfg, u, seed), pilots, cfg);
  SdrSolution sol = solve_sdr(prob, pilots, cfg, opts);
  if (sol.report.status != sdp::SolverStatus::optimal)
    throw std::runtime_error(std::string("optimize_phase_shifts: solver finished with status ") +
                             sdp::status_name(sol.report.status));
  return sol;
}

void write_phase_csv(const std::string& path, const PhaseShiftVector& w) {
  csv::Writer out(path, "risloc-phase", 1, {"index", "phase"});
  for (Eigen::Index r = 0; r < w.size(); ++r) {
    out << static_cast<long long>(r) << std::arg(w[r]);
    out.end_row();
  }
}

PhaseShiftVector read_phase_csv(const std::string& path) {
  const csv::Table t = csv::read(path);
  if (t.schema != "risloc-phase" || t.version != 1)
    throw std::runtime_error(path + ": expected schema risloc-phase v1");
  PhaseShiftVector w(static_cast<Eigen::Index>(t.rows.size()));
  for (size_t i = 0; i < t.rows.size(); ++i) {
    const double idx = t.number(i, "index");
    if (idx != static_cast<double>(i)) throw std::runtime_error(path + ": phase indices must be 0..N-1 in order");
    w[static_cast<Eigen::Index>(i)] = std::polar(1.0, t.number(i, "phase"));
  }
  if (w.size() == 0) throw std::runtime_error(path + ": no phases");
  return w;
}

}  // namespace risloc
