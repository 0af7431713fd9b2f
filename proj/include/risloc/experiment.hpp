// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "risloc/csv.hpp"
#include "risloc/estimator.hpp"
#include "risloc/ris_optimizer.hpp"

namespace risloc {

enum class PhaseSource { optimized, file, random, ones };
PhaseSource parse_phase_source(const std::string& name);
const char* phase_source_name(PhaseSource s);

struct ExperimentSpec {
  std::string id = "mc";
  ScenarioConfig scenario;  // N_R, transmit power and PN variance are set per sweep point
  std::vector<double> tx_powers_dbm{-10.0};
  std::vector<int> n_ris{81};
  std::vector<double> pn_vars{1e-3};
  int trials = 100;
  std::optional<Position3> test_position = Position3{1.50, 2.15, 0.45};  // unset: uniform AOI draw per trial
  std::uint64_t seed = 1;
  double cfo_range = 0.15;  // phi ~ U[-cfo_range, cfo_range]
  PhaseSource phase_source = PhaseSource::optimized;
  std::string phase_file;  // "{nr}" is replaced by N_R
  int sdr_samples = 10;
  int randomization_candidates = 200;
  int threads = 0;  // 0: one per hardware thread
  EstimatorConfig estimator;  // init_position is reset to the AOI centre

  void validate() const;
};

// Scenario keys plus the [experiment] and [estimator] sections (see README); unspecified keys keep defaults.
ExperimentSpec parse_experiment(const std::string& text);
ExperimentSpec load_experiment(const std::string& path);
std::vector<double> parse_number_list(const std::string& text);

// Scenario of one sweep point.
ScenarioConfig point_scenario(const ScenarioConfig& base, int n_ris, double tx_power_dbm, double pn_var);

using PhaseProvider = std::function<PhaseShiftVector(const ScenarioConfig&)>;
// Phase vectors per the spec's source; optimized vectors are cached per (N_R, power, PN variance).
PhaseProvider make_phase_provider(const ExperimentSpec& spec);

struct TrialRecord {
  std::string experiment;
  std::uint64_t seed = 0;
  int n_ris = 0;
  double tx_power_dbm = 0.0;
  double pn_var = 0.0;
  int trial = 0;
  Position3 truth;
  double true_phi = 0.0;
  Position3 estimate;
  double est_phi = 0.0;
  double position_error = 0.0;
  double cfo_pn_sq_error = 0.0;
  double peb = 0.0;
  double hcrlb_cfo_pn = 0.0;
  int outer_iters = 0;
  int inner_iters = 0;
  int max_inner_loop = 0;
  bool converged = false;
  bool range_clamped = false;
  std::string status;  // "ok", "not_converged" or "failed: <reason>"
  double wall_seconds = 0.0;
};

struct PointPhase {
  int n_ris = 0;
  double tx_power_dbm = 0.0;
  double pn_var = 0.0;
  PhaseShiftVector w;
};

struct MonteCarloResult {
  std::vector<TrialRecord> trials;  // sweep order, then trial index
  std::vector<PointPhase> phases;
};

// Seed of one trial; depends only on the master seed and the trial's coordinates.
std::uint64_t trial_seed(std::uint64_t master, int n_ris, double tx_power_dbm, double pn_var, int trial);

TrialRecord run_trial(const ScenarioConfig& cfg, const PhaseShiftVector& w, const ExperimentSpec& spec, int trial,
                      std::vector<TracePoint>* trace = nullptr);
MonteCarloResult run_monte_carlo(const ExperimentSpec& spec, const PhaseProvider& phases = {});

// "risloc-mc" v1, one row per trial; wall time goes to the separate "risloc-mc-timing" v1
// file so that reruns are byte-identical.
void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& trials);
void write_timing_csv(const std::string& path, const std::vector<TrialRecord>& trials);

struct SweepSummary {
  std::string experiment;
  int n_ris = 0;
  double tx_power_dbm = 0.0;
  double pn_var = 0.0;
  int trials = 0;
  int converged = 0;
  int failed = 0;
  double rmse = 0.0;
  double median_position_error = 0.0;
  double joint_mse = 0.0;
  double median_joint_sq_error = 0.0;
  double mean_peb = 0.0;
  double mean_hcrlb_cfo_pn = 0.0;
};

// Aggregates per sweep point, in first-appearance order; failed trials count as infinite error.
std::vector<SweepSummary> summarize(const std::vector<TrialRecord>& trials);
std::vector<SweepSummary> summarize(const csv::Table& trials);
void write_summary_csv(const std::string& path, const std::vector<SweepSummary>& rows);

struct PlaneSpec {
  double z = 0.0;
  double margin = 0.0;  // added on every side of the AOI square
  int resolution = 9;
};

struct HeatmapCell {
  int ix = 0, iy = 0;
  Position3 p;
  double peb = 0.0;  // NaN where the bound is singular
};

std::vector<HeatmapCell> peb_heatmap(const ScenarioConfig& cfg, const PhaseShiftVector& w, const PlaneSpec& plane);
// "risloc-peb-grid" v1.
void write_heatmap_csv(const std::string& path, const std::vector<HeatmapCell>& cells);
double mean_finite_peb(const std::vector<HeatmapCell>& cells);

struct CdfPoint {
  std::string group;
  int n_ris = 0;
  double tx_power_dbm = 0.0;
  double pn_var = 0.0;
  int rank = 0;
  double value = 0.0;
  double cdf = 0.0;
};

// Empirical CDF of one column of a trials table per (N_R, power, PN variance) group;
// NaN values sort last as +inf so every trial is represented.
std::vector<CdfPoint> cdf_curves(const csv::Table& trials, const std::string& metric);
// "risloc-cdf" v1.
void write_cdf_csv(const std::string& path, const std::string& metric, const std::vector<CdfPoint>& points);

struct TraceRow {
  int outer = 0;
  int inner = 0;
  int inner_total = 0;
  bool outer_boundary = false;
  double objective = 0.0;
  double phi_hat = 0.0;
  double position_error = 0.0;
};

// One trial (index `trial` of the spec's first sweep point) with the estimator trace recorded.
std::vector<TraceRow> convergence_trace(const ScenarioConfig& cfg, const PhaseShiftVector& w,
                                        const ExperimentSpec& spec, int trial, TrialRecord* record = nullptr);
// "risloc-trace" v1.
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);

}  // namespace risloc
