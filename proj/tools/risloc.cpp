// SPDX-License-Identifier: Apache-2.0
// Command-line front end: phase optimization, single estimation, Monte Carlo sweeps,
// PEB maps, CDFs and convergence traces. Every output is a versioned CSV.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "risloc/config.hpp"
#include "risloc/experiment.hpp"
#include "risloc/random.hpp"

namespace fs = std::filesystem;
using namespace risloc;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  bool seed_set = false;
};

ExperimentSpec base_spec(const Common& c) {
  ExperimentSpec spec = c.config.empty() ? ExperimentSpec{} : load_experiment(c.config);
  if (c.config.empty()) {
    spec.scenario = default_scenario();
    spec.estimator.init_position = spec.scenario.aoi_center;
  }
  if (c.seed_set) spec.seed = c.seed;
  return spec;
}

Position3 parse_position(const std::string& text) {
  const std::vector<double> v = parse_number_list(text);
  if (v.size() != 3) throw std::invalid_argument("position needs three comma-separated numbers: " + text);
  return {v[0], v[1], v[2]};
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "INI file with scenario, [experiment] and [estimator] keys");
  app->add_option_function<std::uint64_t>(
      "--seed", [&c](const std::uint64_t& s) { c.seed = s, c.seed_set = true; }, "Master seed");
}

// Sweep-point scenario from the spec's first axis values, with optional overrides.
ScenarioConfig single_point(const ExperimentSpec& spec, int nr, double power, double pn_var) {
  return point_scenario(spec.scenario, nr > 0 ? nr : spec.n_ris.front(),
                        std::isnan(power) ? spec.tx_powers_dbm.front() : power,
                        pn_var > 0 ? pn_var : spec.pn_vars.front());
}

PhaseShiftVector phases_for(ExperimentSpec& spec, const std::string& source, const std::string& file,
                            const ScenarioConfig& cfg) {
  if (!source.empty()) spec.phase_source = parse_phase_source(source);
  if (!file.empty()) {
    spec.phase_file = file;
    if (source.empty()) spec.phase_source = PhaseSource::file;
  }
  spec.validate();
  return make_phase_provider(spec)(cfg);
}

std::string fmt(double v) { return csv::format_double(v); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS-assisted near-field OFDM localization under CFO and phase noise"};
  app.require_subcommand(1);
  Common common;
  const double unset = std::nan("");

  // optimize-ris
  auto* opt = app.add_subcommand("optimize-ris", "Solve the relaxed phase design and write the phase vector");
  add_common(opt, common);
  int opt_nr = 0, opt_samples = -1, opt_candidates = -1, opt_max_iter = 200;
  double opt_power = unset, opt_pn = 0.0, opt_tol = 1e-7;
  std::string opt_out = "phase.csv", opt_dump;
  bool opt_verbose = false;
  opt->add_option("--nr", opt_nr, "RIS elements (default: first experiment.n_ris)");
  opt->add_option("--power", opt_power, "Transmit power in dBm");
  opt->add_option("--pn-var", opt_pn, "PN increment variance in rad^2");
  opt->add_option("--samples", opt_samples, "AOI sample points U");
  opt->add_option("--candidates", opt_candidates, "Gaussian randomization candidates (0: eigenvector only)");
  opt->add_option("--tol", opt_tol, "Solver tolerance");
  opt->add_option("--max-iter", opt_max_iter, "Solver iteration limit");
  opt->add_option("-o,--out", opt_out, "Phase CSV (risloc-phase v1)");
  opt->add_option("--dump-conic", opt_dump, "Also write the program in the risloc-conic format");
  opt->add_flag("-v,--verbose", opt_verbose, "Print solver iterations");

  // estimate
  auto* est = app.add_subcommand("estimate", "Run the joint estimator on one received signal");
  add_common(est, common);
  int est_nr = 0;
  double est_power = unset, est_pn = 0.0, est_phi = 0.0;
  std::string est_signal, est_phase, est_source, est_position, est_signal_out, est_trace;
  est->add_option("--nr", est_nr, "RIS elements");
  est->add_option("--power", est_power, "Transmit power in dBm");
  est->add_option("--pn-var", est_pn, "PN increment variance in rad^2");
  est->add_option("--signal", est_signal, "Received signal CSV (risloc-signal v1)");
  est->add_option("--phase", est_phase, "Phase CSV used by the RIS");
  est->add_option("--phase-source", est_source, "optimized | file | random | ones");
  est->add_option("--synthesize", est_position, "Synthesize the signal for a UE at x,y,z instead of reading one");
  est->add_option("--phi", est_phi, "True CFO for --synthesize");
  est->add_option("--signal-out", est_signal_out, "Write the synthesized signal here");
  est->add_option("--trace-out", est_trace, "Write the convergence trace (risloc-trace v1)");

  // monte-carlo
  auto* mc = app.add_subcommand("monte-carlo", "Monte Carlo sweep over power, N_R and PN variance");
  add_common(mc, common);
  std::string mc_powers, mc_nr, mc_pn, mc_source, mc_file, mc_position, mc_out = "results", mc_id;
  int mc_trials = 0, mc_threads = -1;
  bool mc_random_positions = false;
  mc->add_option("--powers", mc_powers, "Comma-separated transmit powers in dBm");
  mc->add_option("--nr", mc_nr, "Comma-separated RIS sizes");
  mc->add_option("--pn-vars", mc_pn, "Comma-separated PN increment variances");
  mc->add_option("--trials", mc_trials, "Trials per sweep point M_e");
  mc->add_option("--phase-source", mc_source, "optimized | file | random | ones");
  mc->add_option("--phase-file", mc_file, "Phase CSV; {nr} is replaced by N_R");
  mc->add_option("--test-position", mc_position, "Fixed UE position x,y,z");
  mc->add_flag("--random-positions", mc_random_positions, "Draw the UE uniformly in the AOI per trial");
  mc->add_option("--threads", mc_threads, "Worker threads (0: hardware)");
  mc->add_option("--id", mc_id, "Experiment id written to every row");
  mc->add_option("-o,--out-dir", mc_out, "Output directory");

  // peb-map
  auto* map = app.add_subcommand("peb-map", "PEB over an xy-plane grid covering the AOI");
  add_common(map, common);
  int map_nr = 0, map_res = 9;
  double map_power = unset, map_pn = 0.0, map_margin = 0.0, map_z = unset;
  std::string map_source, map_file, map_out = "peb_map.csv";
  map->add_option("--nr", map_nr, "RIS elements");
  map->add_option("--power", map_power, "Transmit power in dBm");
  map->add_option("--pn-var", map_pn, "PN increment variance");
  map->add_option("--phase-source", map_source, "optimized | file | random | ones");
  map->add_option("--phase-file", map_file, "Phase CSV");
  map->add_option("--resolution", map_res, "Grid points per axis");
  map->add_option("--margin", map_margin, "Extra metres around the AOI on every side");
  map->add_option("--z", map_z, "Plane height (default: AOI centre)");
  map->add_option("-o,--out", map_out, "Output CSV (risloc-peb-grid v1)");

  // cdf
  auto* cdf = app.add_subcommand("cdf", "Empirical CDF of a trials column per sweep point");
  std::string cdf_in, cdf_metric = "position_error", cdf_out = "cdf.csv";
  cdf->add_option("-i,--input", cdf_in, "Trials CSV (risloc-mc v1)")->required();
  cdf->add_option("-m,--metric", cdf_metric, "Column, e.g. position_error, peb, cfo_pn_sq_error");
  cdf->add_option("-o,--out", cdf_out, "Output CSV (risloc-cdf v1)");

  // trace
  auto* tr = app.add_subcommand("trace", "Convergence trace of one trial");
  add_common(tr, common);
  int tr_nr = 0, tr_trial = 0;
  double tr_power = unset, tr_pn = 0.0;
  std::string tr_source, tr_file, tr_position, tr_out = "trace.csv";
  tr->add_option("--nr", tr_nr, "RIS elements");
  tr->add_option("--power", tr_power, "Transmit power in dBm");
  tr->add_option("--pn-var", tr_pn, "PN increment variance");
  tr->add_option("--phase-source", tr_source, "optimized | file | random | ones");
  tr->add_option("--phase-file", tr_file, "Phase CSV");
  tr->add_option("--position", tr_position, "UE position x,y,z");
  tr->add_option("--trial", tr_trial, "Trial index (selects the random draws)");
  tr->add_option("-o,--out", tr_out, "Output CSV (risloc-trace v1)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*opt) {
      ExperimentSpec spec = base_spec(common);
      const ScenarioConfig cfg = single_point(spec, opt_nr, opt_power, opt_pn);
      const int u = opt_samples > 0 ? opt_samples : spec.sdr_samples;
      SdrOptions o;
      o.solver.tol = opt_tol;
      o.solver.max_iter = opt_max_iter;
      o.solver.verbose = opt_verbose;
      o.randomization_candidates = opt_candidates >= 0 ? opt_candidates : spec.randomization_candidates;
      o.randomization_seed = derive_seed(spec.seed, {0xB03});
      const PilotSequence pilots = PilotSequence::qpsk(cfg.n_subcarriers);
      const SdrProblem prob = assemble_sdr(sample_aoi(cfg, u, derive_seed(spec.seed, {0xB01})), pilots, cfg);
      if (!opt_dump.empty()) {
        std::ofstream out(opt_dump);
        if (!out) throw std::runtime_error("cannot write " + opt_dump);
        sdp::write_conic(out, sdp::lower(prob.program));
      }
      const SdrSolution sol = solve_sdr(prob, pilots, cfg, o);
      std::cout << "status " << sdp::status_name(sol.report.status) << "\niterations " << sol.report.iterations
                << "\nseconds " << fmt(sol.report.seconds) << "\nrelaxed_objective " << fmt(sol.objective)
                << "\nrealized_mean_peb_sq " << fmt(sol.realized_mean_peb_sq) << "\nrealized_mean_peb "
                << fmt(sol.realized_mean_peb) << "\nkkt " << fmt(sol.kkt.primal) << ' ' << fmt(sol.kkt.dual) << ' '
                << fmt(sol.kkt.gap) << '\n';
      write_phase_csv(opt_out, sol.w);
      if (sol.report.status != sdp::SolverStatus::optimal) return 2;
    } else if (*est) {
      ExperimentSpec spec = base_spec(common);
      const ScenarioConfig cfg = single_point(spec, est_nr, est_power, est_pn);
      const PilotSequence pilots = PilotSequence::qpsk(cfg.n_subcarriers);
      const PhaseShiftVector w = phases_for(spec, est_source, est_phase, cfg);
      CVec y;
      std::optional<Position3> truth;
      if (!est_position.empty()) {
        truth = parse_position(est_position);
        const PnCovariance pn = build_pn_covariance(cfg.n_subcarriers, cfg.pn_increment_var);
        const PhaseNoisePath theta = sample_phase_noise(pn, derive_seed(spec.seed, {0xD01}));
        y = synthesize_received(*truth, w, est_phi, theta, pilots, cfg, derive_seed(spec.seed, {0xD02})).y;
        if (!est_signal_out.empty()) write_signal_csv(est_signal_out, y);
      } else if (!est_signal.empty()) {
        y = read_signal_csv(est_signal);
      } else {
        throw std::invalid_argument("estimate needs --signal or --synthesize");
      }
      EstimatorConfig ec = spec.estimator;
      ec.init_position = cfg.aoi_center;
      std::vector<TracePoint> trace;
      const EstimatorState s = run_joint_estimation(EstimationProblem(y, w, pilots, cfg), ec, &trace);
      const Position3 p = polar_to_cartesian(s.position_hat);
      std::cout << "position " << fmt(p.x) << ' ' << fmt(p.y) << ' ' << fmt(p.z) << "\nphi " << fmt(s.phi_hat)
                << "\nobjective " << fmt(s.objective) << "\nouter_iters " << s.outer_iters << "\ninner_iters "
                << s.inner_iters << "\nconverged " << (s.converged ? 1 : 0) << '\n';
      if (truth)
        std::cout << "position_error " << fmt(distance(p, *truth)) << "\npeb "
                  << fmt(position_error_bound(*truth, w, pilots, cfg)) << '\n';
      if (!est_trace.empty()) {
        std::vector<TraceRow> rows;
        for (const TracePoint& t : trace)
          rows.push_back({t.outer, t.inner, t.inner_total, t.inner == 0, t.objective, t.phi_hat,
                          truth ? distance(polar_to_cartesian(t.position), *truth) : std::nan("")});
        write_trace_csv(est_trace, rows);
      }
    } else if (*mc) {
      ExperimentSpec spec = base_spec(common);
      if (!mc_powers.empty()) spec.tx_powers_dbm = parse_number_list(mc_powers);
      if (!mc_pn.empty()) spec.pn_vars = parse_number_list(mc_pn);
      if (!mc_nr.empty()) {
        spec.n_ris.clear();
        for (double d : parse_number_list(mc_nr)) spec.n_ris.push_back(static_cast<int>(d));
      }
      if (mc_trials > 0) spec.trials = mc_trials;
      if (mc_threads >= 0) spec.threads = mc_threads;
      if (!mc_id.empty()) spec.id = mc_id;
      if (!mc_source.empty()) spec.phase_source = parse_phase_source(mc_source);
      if (!mc_file.empty()) {
        spec.phase_file = mc_file;
        if (mc_source.empty()) spec.phase_source = PhaseSource::file;
      }
      if (!mc_position.empty()) spec.test_position = parse_position(mc_position);
      if (mc_random_positions) spec.test_position.reset();
      fs::create_directories(mc_out);
      const MonteCarloResult res = run_monte_carlo(spec);
      const fs::path dir(mc_out);
      write_trials_csv((dir / "trials.csv").string(), res.trials);
      write_timing_csv((dir / "timing.csv").string(), res.trials);
      const std::vector<SweepSummary> summary = summarize(res.trials);
      write_summary_csv((dir / "summary.csv").string(), summary);
      for (const PointPhase& p : res.phases)
        write_phase_csv((dir / ("phase_nr" + std::to_string(p.n_ris) + "_p" + fmt(p.tx_power_dbm) + "_pn" +
                                fmt(p.pn_var) + ".csv"))
                            .string(),
                        p.w);
      for (const SweepSummary& s : summary)
        std::cout << "nr " << s.n_ris << " power " << fmt(s.tx_power_dbm) << " pn " << fmt(s.pn_var) << " rmse "
                  << fmt(s.rmse) << " median_error " << fmt(s.median_position_error) << " joint_mse "
                  << fmt(s.joint_mse) << " mean_peb " << fmt(s.mean_peb) << " converged " << s.converged << '/'
                  << s.trials << '\n';
    } else if (*map) {
      ExperimentSpec spec = base_spec(common);
      const ScenarioConfig cfg = single_point(spec, map_nr, map_power, map_pn);
      const PhaseShiftVector w = phases_for(spec, map_source, map_file, cfg);
      PlaneSpec plane;
      plane.resolution = map_res;
      plane.margin = map_margin;
      plane.z = std::isnan(map_z) ? cfg.aoi_center.z : map_z;
      const std::vector<HeatmapCell> cells = peb_heatmap(cfg, w, plane);
      write_heatmap_csv(map_out, cells);
      std::cout << "cells " << cells.size() << "\nmean_peb " << fmt(mean_finite_peb(cells)) << '\n';
    } else if (*cdf) {
      const csv::Table t = csv::read(cdf_in);
      const std::vector<CdfPoint> pts = cdf_curves(t, cdf_metric);
      write_cdf_csv(cdf_out, cdf_metric, pts);
      std::cout << "points " << pts.size() << '\n';
    } else if (*tr) {
      ExperimentSpec spec = base_spec(common);
      const ScenarioConfig cfg = single_point(spec, tr_nr, tr_power, tr_pn);
      const PhaseShiftVector w = phases_for(spec, tr_source, tr_file, cfg);
      if (!tr_position.empty()) spec.test_position = parse_position(tr_position);
      TrialRecord rec;
      const std::vector<TraceRow> rows = convergence_trace(cfg, w, spec, tr_trial, &rec);
      write_trace_csv(tr_out, rows);
      std::cout << "outer_iters " << rec.outer_iters << "\ninner_iters " << rec.inner_iters << "\nmax_inner_loop "
                << rec.max_inner_loop << "\nconverged " << (rec.converged ? 1 : 0) << "\nposition_error "
                << fmt(rec.position_error) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "risloc: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
