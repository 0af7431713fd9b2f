// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.
// Usage: acceptance [output-dir] [criterion numbers...]
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "risloc/estimator.hpp"
#include "risloc/experiment.hpp"
#include "risloc/hcrlb.hpp"
#include "risloc/ris_optimizer.hpp"
#include "risloc/sdp.hpp"

namespace fs = std::filesystem;
using namespace risloc;
using namespace risloc::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path out;
  ExperimentSpec base;  // optimized phases, fixed test position, master seed 1
  PhaseProvider optimized;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(4);
  o << v;
  return o.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1. AOI-grid mean PEB of optimized w against the median of five random baselines.
Outcome ris_gain(Context& ctx) {
  const ScenarioConfig cfg = point_scenario(ctx.base.scenario, 81, -20.0, 1e-3);
  SdrOptions opts;
  opts.randomization_candidates = ctx.base.randomization_candidates;
  opts.randomization_seed = derive_seed(ctx.base.seed, {0xB03});
  const auto t0 = std::chrono::steady_clock::now();
  const SdrSolution sol = optimize_phase_shifts(cfg, 10, derive_seed(ctx.base.seed, {0xB01}), opts);
  const double solve_s = sol.report.seconds;
  PlaneSpec plane;
  plane.resolution = 9;
  plane.z = cfg.aoi_center.z;
  const auto opt_cells = peb_heatmap(cfg, sol.w, plane);
  write_heatmap_csv((ctx.out / "c1_peb_optimized.csv").string(), opt_cells);
  write_phase_csv((ctx.out / "c1_phase_optimized.csv").string(), sol.w);
  const double opt = mean_finite_peb(opt_cells);
  std::vector<double> rnd;
  for (int i = 0; i < 5; ++i) {
    const auto cells = peb_heatmap(cfg, random_phase_shifts(81, derive_seed(ctx.base.seed, {0xC1, std::uint64_t(i)})), plane);
    if (i == 0) write_heatmap_csv((ctx.out / "c1_peb_random.csv").string(), cells);
    rnd.push_back(mean_finite_peb(cells));
  }
  const double ratio = opt / median(rnd);
  return {ratio <= 1.0 / 50 && solve_s <= 60.0,
          "optimized mean PEB " + fmt(opt) + " m, random median " + fmt(median(rnd)) + " m, ratio 1/" +
              fmt(1.0 / ratio) + " (need <= 1/50; target 1/100, hard gate 1/10); SDP solve " + fmt(solve_s) +
              " s (<= 60 s); total " + fmt(seconds_since(t0)) + " s"};
}

// 2. RMSE at the fixed test position, N_R = 121, P = -10 dBm, 100 trials.
Outcome accuracy(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentSpec spec = ctx.base;
  spec.id = "c2";
  spec.n_ris = {121};
  spec.tx_powers_dbm = {-10.0};
  spec.trials = 100;
  const MonteCarloResult r = run_monte_carlo(spec, ctx.optimized);
  write_trials_csv((ctx.out / "c2_trials.csv").string(), r.trials);
  const SweepSummary s = summarize(r.trials).front();
  const double elapsed = seconds_since(t0);
  return {s.rmse <= 3e-2 && elapsed <= 1800.0,
          "RMSE " + fmt(s.rmse) + " m (need <= 3e-2; stretch 1e-2 " + (s.rmse <= 1e-2 ? "met" : "not met") +
              "), mean PEB " + fmt(s.mean_peb) + " m, converged " + std::to_string(s.converged) + "/100, " +
              fmt(elapsed) + " s"};
}

// 3. Convergence envelope at N_R = 81, P = -10 dBm, 50 trials.
Outcome convergence(Context& ctx) {
  ExperimentSpec spec = ctx.base;
  spec.id = "c3";
  spec.n_ris = {81};
  spec.tx_powers_dbm = {-10.0};
  spec.trials = 50;
  const MonteCarloResult r = run_monte_carlo(spec, ctx.optimized);
  write_trials_csv((ctx.out / "c3_trials.csv").string(), r.trials);
  int ok = 0, worst_outer = 0, worst_inner = 0;
  for (const TrialRecord& t : r.trials) {
    if (t.converged && t.outer_iters <= 40 && t.max_inner_loop <= 2000) ++ok;
    worst_outer = std::max(worst_outer, t.outer_iters);
    worst_inner = std::max(worst_inner, t.max_inner_loop);
  }
  return {ok >= 45, std::to_string(ok) + "/50 within outer <= 40 and inner <= 2000 (need >= 45); worst outer " +
                        std::to_string(worst_outer) + ", worst inner loop " + std::to_string(worst_inner)};
}

// Non-increasing in order, allowing one inversion of at most 10%.
bool monotone(const std::vector<double>& v, std::string& why) {
  int inversions = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) {
      ++inversions;
      if (v[i] > 1.1 * v[i - 1]) {
        why = "inversion above 10% at step " + std::to_string(i);
        return false;
      }
    }
  if (inversions > 1) {
    why = std::to_string(inversions) + " inversions";
    return false;
  }
  return true;
}

// 4. Median position error and joint CFO-PN error fall with power; N_R = 121 dominates N_R = 49.
Outcome trends(Context& ctx) {
  ExperimentSpec spec = ctx.base;
  spec.id = "c4";
  spec.n_ris = {49, 121};
  spec.tx_powers_dbm = {-30.0, -20.0, -10.0, 0.0};
  spec.trials = 50;
  const MonteCarloResult r = run_monte_carlo(spec, ctx.optimized);
  write_trials_csv((ctx.out / "c4_trials.csv").string(), r.trials);
  const auto summary = summarize(r.trials);
  write_summary_csv((ctx.out / "c4_summary.csv").string(), summary);
  std::map<int, std::vector<double>> err, mse;
  for (const SweepSummary& s : summary) {
    err[s.n_ris].push_back(s.median_position_error);
    mse[s.n_ris].push_back(s.median_joint_sq_error);
  }
  bool pass = true;
  std::string detail;
  for (int nr : {49, 121}) {
    std::string why;
    const bool a = monotone(err[nr], why);
    if (!a) detail += "N_R=" + std::to_string(nr) + " error: " + why + "; ";
    const bool b = monotone(mse[nr], why);
    if (!b) detail += "N_R=" + std::to_string(nr) + " joint MSE: " + why + "; ";
    pass = pass && a && b;
  }
  for (size_t i = 0; i < 4; ++i) {
    if (err[121][i] > err[49][i] || mse[121][i] > mse[49][i]) {
      pass = false;
      detail += "N_R=121 not below N_R=49 at " + fmt(spec.tx_powers_dbm[i]) + " dBm; ";
    }
  }
  auto row = [&](const char* name, const std::vector<double>& v) {
    std::string s = std::string(name) + " [";
    for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s + "]";
  };
  detail += "median error 49 " + row("", err[49]) + ", 121 " + row("", err[121]) + "; median joint error 49 " +
            row("", mse[49]) + ", 121 " + row("", mse[121]);
  return {pass, detail};
}

// 5. mu-Jacobian against central differences and FIM invariance in (phi, theta).
Outcome fim_correctness(Context& ctx) {
  const ScenarioConfig cfg = ctx.base.scenario;
  const PilotSequence pilots = PilotSequence::qpsk(cfg.n_subcarriers);
  const int n = cfg.n_subcarriers, nr = cfg.ris.n_elements;
  Rng rng = make_rng(505);
  double worst_fd = 0.0, worst_inv = 0.0;
  const double h = 1e-6;
  const PnCovariance pn = build_pn_covariance(n, cfg.pn_increment_var);
  for (int i = 0; i < 10; ++i) {
    const PolarPosition p = cartesian_to_polar(random_aoi_point(cfg, rng));
    const CVec w = random_unit_modulus(nr, rng);
    const RVec theta = sample_phase_noise(pn, 600 + i).theta;
    const double phi = 0.02 * i - 0.1;
    const MuJacobian jac = mu_jacobian(p, w, phi, theta, pilots, cfg);
    const CMat st = build_signal_matrix(pilots).s.transpose();
    auto mu = [&](const RVec& l) {
      const PolarPosition q{l[n + 1], l[n + 2], l[n + 3]};
      return received_mean(st * channel_vector(polar_to_cartesian(q), w, cfg).h, l[0], l.segment(1, n),
                           std::sqrt(cfg.tx_power_w));
    };
    RVec l0(n + 4);
    l0 << phi, theta, p.range, p.azimuth, p.elevation;
    for (int c = 0; c < n + 4; ++c) {
      RVec lp = l0, lm = l0;
      lp[c] += h;
      lm[c] -= h;
      const CVec fd = (mu(lp) - mu(lm)) / (2 * h);
      worst_fd = std::max(worst_fd, rel_err_mat(CVec(jac.j.col(c)), fd));
    }
    const RMat f0 = fim(mu_jacobian(p, w, 0.0, RVec::Zero(n), pilots, cfg), cfg.noise_power_w);
    const RMat f1 = fim(jac, cfg.noise_power_w);
    worst_inv = std::max(worst_inv, rel_err_mat(f0, f1));
  }
  return {worst_fd < 1e-4 && worst_inv < 1e-10,
          "max Jacobian rel. error " + fmt(worst_fd) + " (< 1e-4), max FIM (phi, theta) rel. change " +
              fmt(worst_inv) + " (< 1e-10), 10 AOI points, N_R=" + std::to_string(nr)};
}

// 6. W-linear FIM reconstruction against the direct FIM.
Outcome w_linear(Context& ctx) {
  const ScenarioConfig cfg = ctx.base.scenario;
  const PilotSequence pilots = PilotSequence::qpsk(cfg.n_subcarriers);
  const int n = cfg.n_subcarriers, nr = cfg.ris.n_elements;
  Rng rng = make_rng(606);
  const PolarPosition p = cartesian_to_polar(*ctx.base.test_position);
  const WLinearFim lin(p, pilots, cfg);
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    const CVec w = random_unit_modulus(nr, rng);
    const RMat direct = fim(mu_jacobian(p, w, 0.0, RVec::Zero(n), pilots, cfg), cfg.noise_power_w);
    const CVec wc = w.conjugate();
    const RMat rec = lin.evaluate(wc * wc.adjoint());
    worst = std::max(worst, (rec - direct).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff());
  }
  return {worst < 1e-10, "max rel. error " + fmt(worst) + " over 5 unit-modulus w (< 1e-10)"};
}

// 7. SDR against the exhaustive 16-phase grid at N_R = 4, N = 4, U = 1.
Outcome brute_force(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioConfig cfg = small_scenario(4, 4, -10.0);
  const PilotSequence pilots = PilotSequence::qpsk(4);
  const auto samples = sample_aoi(cfg, 1, derive_seed(ctx.base.seed, {0xB01}));
  const PebEvaluator ev(samples, pilots, cfg);
  SdrOptions opts;
  opts.randomization_candidates = ctx.base.randomization_candidates;
  opts.randomization_seed = derive_seed(ctx.base.seed, {0xB03});
  const SdrSolution sol = solve_sdr(assemble_sdr(samples, pilots, cfg), pilots, cfg, opts);
  double best = std::numeric_limits<double>::infinity();
  CVec w(4);
  for (int k = 0; k < 65536; ++k) {
    for (int i = 0, c = k; i < 4; ++i, c /= 16) w[i] = std::polar(1.0, 2 * kPi * (c % 16) / 16.0);
    best = std::min(best, ev.average_peb(w));
  }
  const double got = ev.average_peb(sol.w);
  const double elapsed = seconds_since(t0);
  return {sol.report.status == sdp::SolverStatus::optimal && got <= 1.2 * best && elapsed <= 300.0,
          "SDR PEB " + fmt(got) + " m vs exhaustive " + fmt(best) + " m, ratio " + fmt(got / best) +
              " (<= 1.2), " + fmt(elapsed) + " s"};
}

// 8. Ambiguity family leaves the likelihood term and the joint error metric unchanged.
Outcome ambiguity(Context& ctx) {
  const ScenarioConfig cfg = point_scenario(ctx.base.scenario, 81, -10.0, 1e-3);
  const int n = cfg.n_subcarriers;
  const PilotSequence pilots = PilotSequence::qpsk(n);
  Rng rng = make_rng(808);
  const CVec w = random_unit_modulus(81, rng);
  const RVec theta = sample_phase_noise(build_pn_covariance(n, cfg.pn_increment_var), 809).theta;
  const ReceivedSignal rx = synthesize_received(*ctx.base.test_position, w, 0.04, {theta}, pilots, cfg, 810);
  const EstimationProblem prob(rx.y, w, pilots, cfg);
  const PolarPosition pos = cartesian_to_polar({1.6, 2.1, 0.3});
  const RVec th_hat = 0.7 * theta;
  const double base = likelihood_term(prob, 0.03, th_hat, pos);
  double worst_l = 0.0, worst_m = 0.0;
  for (double eps : {-0.1, -0.05, 0.05, 0.1}) {
    RVec shift = RVec::Zero(n);
    for (int k = 0; k < n; ++k) shift[k] = 2 * kPi * k * eps / n;
    worst_l = std::max(worst_l, rel_err(likelihood_term(prob, 0.03 - eps, th_hat + shift, pos), base));
    worst_m = std::max(worst_m, std::abs(joint_cfo_pn_mse(0.04, theta, 0.04 - eps, theta + shift)));
  }
  return {worst_l <= 1e-12 && worst_m <= 1e-20,
          "max likelihood rel. change " + fmt(worst_l) + " (<= 1e-12), max joint error of shifted exact estimates " +
              fmt(worst_m)};
}

// 9. Closed-form updates: eta gradient vanishes, CFO update stationary on consistent input.
Outcome closed_forms(Context& ctx) {
  const ScenarioConfig cfg = point_scenario(ctx.base.scenario, 81, -10.0, 1e-3);
  const int n = cfg.n_subcarriers;
  const PilotSequence pilots = PilotSequence::qpsk(n);
  Rng rng = make_rng(909);
  const CVec w = random_unit_modulus(81, rng);
  const RVec theta = sample_phase_noise(build_pn_covariance(n, cfg.pn_increment_var), 910).theta;
  const ReceivedSignal rx = synthesize_received(*ctx.base.test_position, w, 0.05, {theta}, pilots, cfg, 911);
  const EstimationProblem prob(rx.y, w, pilots, cfg);
  double worst_grad = 0.0;
  for (int i = 0; i < 5; ++i) {
    EstimatorConfig ec;
    ec.init_position = random_aoi_point(cfg, rng);
    ec.init_phi = 0.02 * i;
    const EstimatorState s = initial_state(prob, ec);
    const RVec eta = update_eta(prob, s);
    // gradient of the linearized objective is (2 / sigma^2) times the normal-equation residual
    const RVec resid = eta_normal_residual(prob, s, eta);
    const RVec rhs = -eta_normal_residual(prob, s, RVec::Zero(eta.size()));
    worst_grad = std::max(worst_grad, resid.norm() / rhs.norm());
  }
  const CMat st = build_signal_matrix(pilots).s.transpose();
  const CVec clean = received_mean(st * channel_vector(*ctx.base.test_position, w, cfg).h, 0.05, RVec::Zero(n),
                                   std::sqrt(cfg.tx_power_w));
  const EstimationProblem cp(clean, w, pilots, cfg);
  EstimatorConfig ec;
  ec.init_position = *ctx.base.test_position;
  ec.init_phi = 0.05;
  const double step = std::abs(update_cfo(cp, initial_state(cp, ec)) - 0.05);
  return {worst_grad < 1e-8 && step < 1e-12, "eta gradient residual " + fmt(worst_grad) +
                                                  " relative to the gradient at zero (< 1e-8); CFO update on "
                                                  "consistent noise-free input moves by " +
                                                  fmt(step) + " (< 1e-12)"};
}

// 10. Solver KKT residuals on the minimum-eigenvalue program and one phase-design instance at N_R = 16.
Outcome solver_contract(Context& ctx) {
  sdp::ConeProgram p;
  const int b = p.add_block("X", 2, sdp::BlockKind::symmetric);
  CMat c = CMat::Zero(2, 2);
  c(0, 0) = 1.0;
  c(1, 1) = 2.0;
  p.objective.add(b, c);
  p.equalities.push_back({sdp::LinearFunctional().add(b, CMat::Identity(2, 2)), 1.0});
  p.psd.push_back(sdp::PsdConstraint::variable(b));
  const sdp::Solution s = sdp::solve(p);
  const sdp::KktResiduals k1 = sdp::kkt_residuals(p, s.x);

  const ScenarioConfig cfg = point_scenario(ctx.base.scenario, 16, -10.0, 1e-3);
  const PilotSequence pilots = PilotSequence::qpsk(cfg.n_subcarriers);
  const SdrProblem prob = assemble_sdr(sample_aoi(cfg, ctx.base.sdr_samples, derive_seed(ctx.base.seed, {0xB01})),
                                       pilots, cfg);
  const SdrSolution sol = solve_sdr(prob, pilots, cfg);
  const sdp::KktResiduals& k2 = sol.kkt;
  const double m1 = std::max({k1.primal, k1.dual, k1.gap}), m2 = std::max({k2.primal, k2.dual, k2.gap});
  return {s.report.status == sdp::SolverStatus::optimal && sol.report.status == sdp::SolverStatus::optimal &&
              m1 <= 1e-7 && m2 <= 1e-7,
          "min-eig program max residual " + fmt(m1) + ", phase design (N_R=16, U=" +
              std::to_string(ctx.base.sdr_samples) + ") primal " + fmt(k2.primal) + " dual " + fmt(k2.dual) +
              " gap " + fmt(k2.gap) + " (<= 1e-7), " + std::to_string(sol.report.iterations) + " iterations"};
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::stoi(argv[i]));
  fs::create_directories(ctx.out);
  ctx.base.scenario = default_scenario(81);
  ctx.base.estimator.init_position = ctx.base.scenario.aoi_center;
  ctx.base.phase_source = PhaseSource::optimized;
  ctx.optimized = make_phase_provider(ctx.base);

  const std::vector<std::pair<const char*, std::function<Outcome(Context&)>>> criteria = {
      {"RIS optimization gain", ris_gain},
      {"positioning accuracy", accuracy},
      {"convergence envelope", convergence},
      {"monotone trends", trends},
      {"FIM correctness", fim_correctness},
      {"W-linear FIM oracle", w_linear},
      {"SDR vs brute force", brute_force},
      {"ambiguity suite", ambiguity},
      {"closed-form optimality", closed_forms},
      {"SDP solver contract", solver_contract},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
