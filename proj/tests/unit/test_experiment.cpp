// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>
#include <set>

#include "oracles.hpp"
#include "risloc/experiment.hpp"

using namespace risloc;
using namespace risloc::testing;
using Catch::Approx;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.scenario = default_scenario(16);
  spec.n_ris = {16};
  spec.tx_powers_dbm = {-10.0, 0.0};
  spec.pn_vars = {1e-3};
  spec.trials = 4;
  spec.seed = 17;
  spec.phase_source = PhaseSource::random;
  spec.threads = 2;
  spec.estimator.init_position = spec.scenario.aoi_center;
  return spec;
}

}  // namespace

TEST_CASE("experiment INI parsing", "[harness][config]") {
  const std::string text =
      "[ris]\nelements = 49\n"
      "[experiment]\nid = sweep\ntx_powers_dbm = -30, -20,-10\nn_ris = 49,121\npn_vars = 1e-3, 1e-4\n"
      "trials = 7\nseed = 99\ntest_position = random\nphase_source = file\nphase_file = w{nr}.csv\n"
      "[estimator]\nmax_outer = 12\njoint_cfo_pn = false\n";
  const ExperimentSpec s = parse_experiment(text);
  CHECK(s.id == "sweep");
  CHECK(s.tx_powers_dbm == std::vector<double>{-30, -20, -10});
  CHECK(s.n_ris == std::vector<int>{49, 121});
  CHECK(s.pn_vars == std::vector<double>{1e-3, 1e-4});
  CHECK(s.trials == 7);
  CHECK(s.seed == 99);
  CHECK_FALSE(s.test_position.has_value());
  CHECK(s.phase_source == PhaseSource::file);
  CHECK(s.phase_file == "w{nr}.csv");
  CHECK(s.estimator.max_outer == 12);
  CHECK_FALSE(s.estimator.joint_cfo_pn);
  CHECK(s.estimator.init_position == s.scenario.aoi_center);

  const ExperimentSpec d = parse_experiment("[ris]\nelements = 81\n");
  CHECK(d.n_ris == std::vector<int>{81});
  REQUIRE(d.test_position.has_value());
  CHECK(*d.test_position == Position3{1.50, 2.15, 0.45});
  CHECK(d.trials == 100);

  CHECK_THROWS(parse_experiment("[experiment]\ntrials = 0\n"));
  CHECK_THROWS(parse_experiment("[experiment]\nn_ris = 50\n"));
  CHECK_THROWS(parse_experiment("[experiment]\nphase_source = magic\n"));
  CHECK_THROWS(parse_experiment("[experiment]\ntest_position = 1,2\n"));
  CHECK_THROWS(parse_number_list("1, two, 3"));
  CHECK(parse_number_list(" 1e-3 ,2") == std::vector<double>{1e-3, 2});
}

TEST_CASE("Monte Carlo rows, determinism and offline recomputation", "[harness]") {
  const ExperimentSpec spec = small_spec();
  const MonteCarloResult a = run_monte_carlo(spec);
  REQUIRE(a.trials.size() == spec.n_ris.size() * spec.tx_powers_dbm.size() * spec.pn_vars.size() * spec.trials);
  std::set<std::uint64_t> seeds;
  for (const TrialRecord& r : a.trials) seeds.insert(r.seed);
  CHECK(seeds.size() == a.trials.size());

  const auto dir = scratch_dir("mc");
  write_trials_csv((dir / "a.csv").string(), a.trials);
  ExperimentSpec single = spec;
  single.threads = 1;
  const MonteCarloResult b = run_monte_carlo(single);
  write_trials_csv((dir / "b.csv").string(), b.trials);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

  // one trial, rerun: byte-identical
  ExperimentSpec one = spec;
  one.trials = 1;
  write_trials_csv((dir / "c1.csv").string(), run_monte_carlo(one).trials);
  write_trials_csv((dir / "c2.csv").string(), run_monte_carlo(one).trials);
  CHECK(slurp(dir / "c1.csv") == slurp(dir / "c2.csv"));

  // the summary is recomputable from raw rows
  const csv::Table t = csv::read((dir / "a.csv").string());
  CHECK(t.schema == "risloc-mc");
  CHECK(t.version == 1);
  REQUIRE(t.rows.size() == a.trials.size());
  const std::vector<SweepSummary> from_rows = summarize(t), direct = summarize(a.trials);
  REQUIRE(from_rows.size() == 2);
  for (size_t g = 0; g < 2; ++g) {
    std::vector<Position3> est;
    Position3 truth;
    for (size_t i = 0; i < t.rows.size(); ++i) {
      if (t.number(i, "tx_power_dbm") != direct[g].tx_power_dbm) continue;
      est.push_back({t.number(i, "est_x"), t.number(i, "est_y"), t.number(i, "est_z")});
      truth = {t.number(i, "true_x"), t.number(i, "true_y"), t.number(i, "true_z")};
    }
    REQUIRE(est.size() == 4);
    CHECK(rel_err(rmse_position(est, truth), direct[g].rmse) < 1e-12);
    CHECK(rel_err(from_rows[g].rmse, direct[g].rmse) < 1e-12);
    CHECK(from_rows[g].trials == 4);
  }
  write_summary_csv((dir / "s.csv").string(), direct);
  CHECK(csv::read((dir / "s.csv").string()).rows.size() == 2);
  write_timing_csv((dir / "t.csv").string(), a.trials);
  CHECK(csv::read((dir / "t.csv").string()).rows.size() == a.trials.size());
}

TEST_CASE("trial seeds depend only on coordinates", "[harness]") {
  CHECK(trial_seed(1, 81, -10, 1e-3, 5) == trial_seed(1, 81, -10, 1e-3, 5));
  CHECK(trial_seed(1, 81, -10, 1e-3, 5) != trial_seed(1, 81, -10, 1e-3, 6));
  CHECK(trial_seed(1, 81, -10, 1e-3, 5) != trial_seed(1, 121, -10, 1e-3, 5));
  CHECK(trial_seed(1, 81, -10, 1e-3, 5) != trial_seed(1, 81, -20, 1e-3, 5));
  CHECK(trial_seed(1, 81, -10, 1e-3, 5) != trial_seed(1, 81, -10, 1e-4, 5));
  CHECK(trial_seed(1, 81, -10, 1e-3, 5) != trial_seed(2, 81, -10, 1e-3, 5));
}

TEST_CASE("PEB heatmap", "[harness]") {
  const ScenarioConfig cfg = default_scenario(16);
  const CVec w = random_phase_shifts(16, 2);
  PlaneSpec plane;
  plane.resolution = 5;
  plane.z = 0.1;
  const auto a = peb_heatmap(cfg, w, plane);
  REQUIRE(a.size() == 25);
  const auto b = peb_heatmap(cfg, w, plane);
  for (size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].peb == b[i].peb);
  CHECK(a.front().p.x == Approx(cfg.aoi_center.x - 0.5));
  CHECK(a.back().p.y == Approx(cfg.aoi_center.y + 0.5));
  for (const HeatmapCell& c : a) REQUIRE(c.p.z == 0.1);
  double mean = 0.0;
  for (const HeatmapCell& c : a) mean += c.peb / 25;
  CHECK(rel_err(mean_finite_peb(a), mean) < 1e-12);
  const auto dir = scratch_dir("heat");
  write_heatmap_csv((dir / "h.csv").string(), a);
  const csv::Table t = csv::read((dir / "h.csv").string());
  CHECK(t.schema == "risloc-peb-grid");
  CHECK(t.rows.size() == 25);
}

TEST_CASE("empirical CDF", "[harness]") {
  const auto dir = scratch_dir("cdf");
  {
    csv::Writer w((dir / "one.csv").string(), "risloc-mc", 1, {"position_error"});
    w << 0.25;
    w.end_row();
  }
  const auto single = cdf_curves(csv::read((dir / "one.csv").string()), "position_error");
  REQUIRE(single.size() == 1);
  CHECK(single[0].value == 0.25);
  CHECK(single[0].cdf == 1.0);

  const MonteCarloResult r = run_monte_carlo(small_spec());
  write_trials_csv((dir / "mc.csv").string(), r.trials);
  const csv::Table t = csv::read((dir / "mc.csv").string());
  const auto pts = cdf_curves(t, "position_error");
  REQUIRE(pts.size() == r.trials.size());
  std::map<std::string, std::vector<CdfPoint>> by_group;
  for (const CdfPoint& p : pts) by_group[p.group].push_back(p);
  CHECK(by_group.size() == 2);
  for (auto& [name, g] : by_group) {
    for (size_t i = 1; i < g.size(); ++i) {
      REQUIRE(g[i].value >= g[i - 1].value);
      REQUIRE(g[i].cdf >= g[i - 1].cdf);
    }
    CHECK(g.back().cdf == 1.0);
    // median read off the CDF equals the direct median
    std::vector<double> v;
    for (const TrialRecord& tr : r.trials)
      if (std::abs(tr.tx_power_dbm - g[0].tx_power_dbm) == 0.0) v.push_back(tr.position_error);
    std::sort(v.begin(), v.end());
    const double direct = 0.5 * (v[1] + v[2]);
    const double from_cdf = 0.5 * (g[1].value + g[2].value);
    CHECK(from_cdf == Approx(direct));
  }
  write_cdf_csv((dir / "cdf.csv").string(), "position_error", pts);
  CHECK(csv::read((dir / "cdf.csv").string()).schema == "risloc-cdf");
  CHECK_THROWS(cdf_curves(t, "no_such_column"));
}

TEST_CASE("convergence trace", "[harness]") {
  ExperimentSpec spec = small_spec();
  spec.scenario = default_scenario(49);
  const ScenarioConfig cfg = point_scenario(spec.scenario, 49, -10, 1e-3);
  const CVec w = random_phase_shifts(49, 8);
  TrialRecord rec;
  const auto rows = convergence_trace(cfg, w, spec, 0, &rec);
  CHECK(rows.size() == static_cast<size_t>(1 + rec.outer_iters + rec.inner_iters));
  for (size_t i = 1; i < rows.size(); ++i) REQUIRE(rows[i].objective <= rows[i - 1].objective * (1 + 1e-12));
  int boundaries = 0, inner_seen = 0;
  for (const TraceRow& r : rows) {
    if (r.outer_boundary) {
      REQUIRE(r.inner == 0);
      REQUIRE(r.inner_total == inner_seen);
      ++boundaries;
    } else {
      ++inner_seen;
      REQUIRE(r.inner_total == inner_seen);
    }
  }
  CHECK(boundaries == rec.outer_iters + 1);
  // the trial itself matches the harness row
  CHECK(run_trial(cfg, w, spec, 0).position_error == rec.position_error);
  const auto dir = scratch_dir("trace");
  write_trace_csv((dir / "t.csv").string(), rows);
  CHECK(csv::read((dir / "t.csv").string()).rows.size() == rows.size());
}

TEST_CASE("phase providers", "[harness]") {
  ExperimentSpec spec = small_spec();
  const ScenarioConfig cfg = point_scenario(spec.scenario, 16, -10, 1e-3);
  spec.phase_source = PhaseSource::ones;
  CHECK(make_phase_provider(spec)(cfg) == CVec::Ones(16));
  spec.phase_source = PhaseSource::random;
  const CVec r = make_phase_provider(spec)(cfg);
  CHECK(r == make_phase_provider(spec)(cfg));
  const auto dir = scratch_dir("provider");
  write_phase_csv((dir / "w16.csv").string(), r);
  spec.phase_source = PhaseSource::file;
  spec.phase_file = (dir / "w{nr}.csv").string();
  CHECK((make_phase_provider(spec)(cfg) - r).norm() < 1e-14);
  CHECK(parse_phase_source("optimized") == PhaseSource::optimized);
  CHECK(std::string(phase_source_name(PhaseSource::file)) == "file");
}
