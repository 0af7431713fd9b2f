// SPDX-License-Identifier: Apache-2.0
#include "risloc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <sstream>

#include "risloc/random.hpp"

namespace risloc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t double_bits(double v) {
  std::uint64_t b;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  return 0.5 * (*std::max_element(v.begin(), v.begin() + static_cast<long>(mid)) + hi);
}

template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, std::max(count, 1));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

PhaseSource parse_phase_source(const std::string& name) {
  if (name == "optimized") return PhaseSource::optimized;
  if (name == "file") return PhaseSource::file;
  if (name == "random") return PhaseSource::random;
  if (name == "ones") return PhaseSource::ones;
  throw std::invalid_argument("unknown phase source: " + name + " (optimized, file, random, ones)");
}

const char* phase_source_name(PhaseSource s) {
  switch (s) {
    case PhaseSource::optimized: return "optimized";
    case PhaseSource::file: return "file";
    case PhaseSource::random: return "random";
    case PhaseSource::ones: return "ones";
  }
  return "?";
}

void ExperimentSpec::validate() const {
  if (trials < 1) throw std::invalid_argument("experiment: trials must be at least 1");
  if (tx_powers_dbm.empty() || n_ris.empty() || pn_vars.empty())
    throw std::invalid_argument("experiment: sweep axes must be non-empty");
  for (int n : n_ris)
    if (n < 1 || static_cast<int>(std::lround(std::sqrt(n)) * std::lround(std::sqrt(n))) != n)
      throw std::invalid_argument("experiment: N_R must be a positive perfect square");
  for (double v : pn_vars)
    if (!(v > 0.0)) throw std::invalid_argument("experiment: PN increment variance must be positive");
  if (!(cfo_range >= 0.0)) throw std::invalid_argument("experiment: CFO range must be non-negative");
  if (phase_source == PhaseSource::file && phase_file.empty())
    throw std::invalid_argument("experiment: phase source 'file' needs a phase file");
  if (sdr_samples < 1) throw std::invalid_argument("experiment: SDR sample count must be at least 1");
  if (test_position && !test_position->finite()) throw std::invalid_argument("experiment: test position not finite");
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::string cell;
  std::istringstream ss(text);
  while (std::getline(ss, cell, ',')) {
    const size_t a = cell.find_first_not_of(" \t"), b = cell.find_last_not_of(" \t");
    if (a == std::string::npos) throw std::invalid_argument("empty entry in number list: '" + text + "'");
    size_t used = 0;
    const std::string t = cell.substr(a, b - a + 1);
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size()) throw std::invalid_argument("not a number: '" + t + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty number list");
  return out;
}

ExperimentSpec parse_experiment(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("experiment file: ") + e.what());
  }
  ExperimentSpec spec;
  spec.scenario = parse_scenario(text);
  spec.n_ris = {spec.scenario.ris.n_elements};
  spec.tx_powers_dbm = {spec.scenario.tx_power_dbm};
  spec.pn_vars = {spec.scenario.pn_increment_var};
  try {
    if (auto v = tree.get_optional<std::string>("experiment.id")) spec.id = *v;
    if (auto v = tree.get_optional<std::string>("experiment.tx_powers_dbm")) spec.tx_powers_dbm = parse_number_list(*v);
    if (auto v = tree.get_optional<std::string>("experiment.pn_vars")) spec.pn_vars = parse_number_list(*v);
    if (auto v = tree.get_optional<std::string>("experiment.n_ris")) {
      spec.n_ris.clear();
      for (double d : parse_number_list(*v)) {
        if (d != std::floor(d)) throw std::invalid_argument("experiment.n_ris entries must be integers");
        spec.n_ris.push_back(static_cast<int>(d));
      }
    }
    spec.trials = tree.get<int>("experiment.trials", spec.trials);
    spec.seed = tree.get<std::uint64_t>("experiment.seed", spec.seed);
    spec.cfo_range = tree.get<double>("experiment.cfo_range", spec.cfo_range);
    if (auto v = tree.get_optional<std::string>("experiment.test_position")) {
      if (*v == "random") {
        spec.test_position.reset();
      } else {
        const std::vector<double> p = parse_number_list(*v);
        if (p.size() != 3) throw std::invalid_argument("experiment.test_position needs x, y, z or 'random'");
        spec.test_position = Position3{p[0], p[1], p[2]};
      }
    }
    if (auto v = tree.get_optional<std::string>("experiment.phase_source")) spec.phase_source = parse_phase_source(*v);
    spec.phase_file = tree.get<std::string>("experiment.phase_file", spec.phase_file);
    spec.sdr_samples = tree.get<int>("experiment.sdr_samples", spec.sdr_samples);
    spec.randomization_candidates = tree.get<int>("experiment.randomization", spec.randomization_candidates);
    spec.threads = tree.get<int>("experiment.threads", spec.threads);
    EstimatorConfig& e = spec.estimator;
    e.step_length = tree.get<double>("estimator.step_length", e.step_length);
    e.eps_inner = tree.get<double>("estimator.eps_inner", e.eps_inner);
    e.eps_outer = tree.get<double>("estimator.eps_outer", e.eps_outer);
    e.max_inner = tree.get<int>("estimator.max_inner", e.max_inner);
    e.max_outer = tree.get<int>("estimator.max_outer", e.max_outer);
    e.backtracking = tree.get<bool>("estimator.backtracking", e.backtracking);
    e.joint_cfo_pn = tree.get<bool>("estimator.joint_cfo_pn", e.joint_cfo_pn);
    e.joint_position = tree.get<bool>("estimator.joint_position", e.joint_position);
    e.range_floor = tree.get<double>("estimator.range_floor", e.range_floor);
  } catch (const pt::ptree_bad_data& err) {
    throw std::invalid_argument(std::string("experiment file: ") + err.what());
  }
  spec.estimator.init_position = spec.scenario.aoi_center;
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open experiment file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment(ss.str());
}

ScenarioConfig point_scenario(const ScenarioConfig& base, int n_ris, double tx_power_dbm, double pn_var) {
  ScenarioConfig cfg = base;
  if (cfg.ris.n_elements != n_ris) {
    const double spacing = cfg.ris.spacing > 0.0 ? cfg.ris.spacing : 0.5 * cfg.center_wavelength();
    cfg.ris = RisGeometry::uniform_planar(n_ris, spacing);
  }
  cfg.pn_increment_var = pn_var;
  cfg.set_tx_power_dbm(tx_power_dbm);
  cfg.finalize();
  return cfg;
}

PhaseProvider make_phase_provider(const ExperimentSpec& spec) {
  struct Cache {
    std::mutex mu;
    std::map<std::tuple<int, double, double>, PhaseShiftVector> items;
  };
  auto cache = std::make_shared<Cache>();
  return [spec, cache](const ScenarioConfig& cfg) -> PhaseShiftVector {
    const int nr = cfg.ris.n_elements;
    switch (spec.phase_source) {
      case PhaseSource::ones:
        return PhaseShiftVector::Ones(nr);
      case PhaseSource::random:
        return random_phase_shifts(nr, derive_seed(spec.seed, {0xB02, static_cast<std::uint64_t>(nr)}));
      case PhaseSource::file: {
        const std::string path = replace_all(spec.phase_file, "{nr}", std::to_string(nr));
        PhaseShiftVector w = read_phase_csv(path);
        if (w.size() != nr)
          throw std::runtime_error(path + ": " + std::to_string(w.size()) + " phases for an RIS with " +
                                   std::to_string(nr) + " elements");
        return w;
      }
      case PhaseSource::optimized: {
        const auto key = std::make_tuple(nr, cfg.tx_power_dbm, cfg.pn_increment_var);
        std::lock_guard<std::mutex> lock(cache->mu);
        auto it = cache->items.find(key);
        if (it != cache->items.end()) return it->second;
        SdrOptions opts;
        opts.randomization_candidates = spec.randomization_candidates;
        opts.randomization_seed = derive_seed(spec.seed, {0xB03});
        const SdrSolution sol = optimize_phase_shifts(cfg, spec.sdr_samples, derive_seed(spec.seed, {0xB01}), opts);
        cache->items.emplace(key, sol.w);
        return sol.w;
      }
    }
    throw std::logic_error("unhandled phase source");
  };
}

std::uint64_t trial_seed(std::uint64_t master, int n_ris, double tx_power_dbm, double pn_var, int trial) {
  return derive_seed(master, {0xC01, static_cast<std::uint64_t>(n_ris), double_bits(tx_power_dbm), double_bits(pn_var),
                              static_cast<std::uint64_t>(trial)});
}

TrialRecord run_trial(const ScenarioConfig& cfg, const PhaseShiftVector& w, const ExperimentSpec& spec, int trial,
                      std::vector<TracePoint>* trace) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialRecord r;
  r.experiment = spec.id;
  r.n_ris = cfg.ris.n_elements;
  r.tx_power_dbm = cfg.tx_power_dbm;
  r.pn_var = cfg.pn_increment_var;
  r.trial = trial;
  r.seed = trial_seed(spec.seed, r.n_ris, r.tx_power_dbm, r.pn_var, trial);

  Rng rng = make_rng(derive_seed(r.seed, {1}));
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  if (spec.test_position) {
    r.truth = *spec.test_position;
  } else {
    const double dx = unit(rng), dy = unit(rng), dz = unit(rng);
    r.truth = {cfg.aoi_center.x + cfg.aoi_edge * dx, cfg.aoi_center.y + cfg.aoi_edge * dy,
               cfg.aoi_center.z + cfg.aoi_edge * dz};
  }
  r.true_phi = spec.cfo_range * 2.0 * unit(rng);
  const PnCovariance pn = build_pn_covariance(cfg.n_subcarriers, cfg.pn_increment_var);
  const PhaseNoisePath theta = sample_phase_noise(pn, derive_seed(r.seed, {2}));
  const PilotSequence pilots = PilotSequence::qpsk(cfg.n_subcarriers);

  try {
    const HcrlbResult bound = PebEvaluator({r.truth}, pilots, cfg).bound_at(0, w);
    r.peb = bound.peb;
    r.hcrlb_cfo_pn = bound.cfo_pn_bound;
  } catch (const SingularMatrix&) {
    r.peb = kNaN;
    r.hcrlb_cfo_pn = kNaN;
  }

  try {
    const ReceivedSignal rx = synthesize_received(r.truth, w, r.true_phi, theta, pilots, cfg, derive_seed(r.seed, {3}));
    EstimatorConfig est = spec.estimator;
    est.init_position = cfg.aoi_center;
    est.record_trace = trace != nullptr;
    const EstimatorState s = run_joint_estimation(rx, w, pilots, cfg, est, trace);
    r.estimate = polar_to_cartesian(s.position_hat);
    r.est_phi = s.phi_hat;
    r.position_error = distance(r.estimate, r.truth);
    r.cfo_pn_sq_error = joint_cfo_pn_mse(r.true_phi, theta.theta, s.phi_hat, s.theta_hat);
    r.outer_iters = s.outer_iters;
    r.inner_iters = s.inner_iters;
    r.max_inner_loop = s.max_inner_loop;
    r.converged = s.converged;
    r.range_clamped = s.range_clamped;
    r.status = s.converged ? "ok" : "not_converged";
  } catch (const std::exception& e) {
    r.estimate = {kNaN, kNaN, kNaN};
    r.est_phi = kNaN;
    r.position_error = kNaN;
    r.cfo_pn_sq_error = kNaN;
    r.status = std::string("failed: ") + e.what();
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

MonteCarloResult run_monte_carlo(const ExperimentSpec& spec, const PhaseProvider& phases) {
  spec.validate();
  const PhaseProvider provider = phases ? phases : make_phase_provider(spec);
  MonteCarloResult out;
  struct Point {
    ScenarioConfig cfg;
    size_t phase;
  };
  std::vector<Point> points;
  for (int nr : spec.n_ris)
    for (double p : spec.tx_powers_dbm)
      for (double v : spec.pn_vars) {
        Point pt{point_scenario(spec.scenario, nr, p, v), out.phases.size()};
        out.phases.push_back({nr, p, v, provider(pt.cfg)});
        points.push_back(std::move(pt));
      }
  const int per = spec.trials;
  out.trials.resize(points.size() * static_cast<size_t>(per));
  parallel_for(static_cast<int>(out.trials.size()), spec.threads, [&](int i) {
    const Point& pt = points[static_cast<size_t>(i / per)];
    out.trials[static_cast<size_t>(i)] = run_trial(pt.cfg, out.phases[pt.phase].w, spec, i % per);
  });
  return out;
}

namespace {

std::string seed_text(std::uint64_t s) { return std::to_string(s); }

}  // namespace

void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& trials) {
  csv::Writer out(path, "risloc-mc", 1,
                  {"experiment", "seed", "n_ris", "tx_power_dbm", "pn_var", "trial", "true_x", "true_y", "true_z",
                   "true_phi", "est_x", "est_y", "est_z", "est_phi", "position_error", "sq_position_error",
                   "cfo_pn_sq_error", "peb", "hcrlb_cfo_pn", "outer_iters", "inner_iters", "max_inner_loop",
                   "converged", "range_clamped", "status"});
  for (const TrialRecord& r : trials) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    out << r.experiment << seed_text(r.seed) << r.n_ris << r.tx_power_dbm << r.pn_var << r.trial << r.truth.x
        << r.truth.y << r.truth.z << r.true_phi << r.estimate.x << r.estimate.y << r.estimate.z << r.est_phi
        << r.position_error << r.position_error * r.position_error << r.cfo_pn_sq_error << r.peb << r.hcrlb_cfo_pn
        << r.outer_iters << r.inner_iters << r.max_inner_loop << static_cast<int>(r.converged)
        << static_cast<int>(r.range_clamped) << status;
    out.end_row();
  }
}

void write_timing_csv(const std::string& path, const std::vector<TrialRecord>& trials) {
  csv::Writer out(path, "risloc-mc-timing", 1, {"experiment", "n_ris", "tx_power_dbm", "pn_var", "trial", "wall_seconds"});
  for (const TrialRecord& r : trials) {
    out << r.experiment << r.n_ris << r.tx_power_dbm << r.pn_var << r.trial << r.wall_seconds;
    out.end_row();
  }
}

namespace {

struct Sample {
  std::string experiment;
  int n_ris;
  double power, pn_var;
  double error, joint, peb, bound;
  bool converged, failed;
};

std::vector<SweepSummary> summarize_samples(const std::vector<Sample>& samples) {
  std::vector<SweepSummary> out;
  std::vector<std::vector<const Sample*>> groups;
  for (const Sample& s : samples) {
    size_t g = 0;
    for (; g < out.size(); ++g)
      if (out[g].experiment == s.experiment && out[g].n_ris == s.n_ris && out[g].tx_power_dbm == s.power &&
          out[g].pn_var == s.pn_var)
        break;
    if (g == out.size()) {
      SweepSummary row;
      row.experiment = s.experiment;
      row.n_ris = s.n_ris;
      row.tx_power_dbm = s.power;
      row.pn_var = s.pn_var;
      out.push_back(row);
      groups.emplace_back();
    }
    groups[g].push_back(&s);
  }
  const double inf = std::numeric_limits<double>::infinity();
  for (size_t g = 0; g < out.size(); ++g) {
    SweepSummary& row = out[g];
    std::vector<double> err, joint;
    double sq = 0.0, jsum = 0.0, peb = 0.0, bound = 0.0;
    int finite_bounds = 0;
    for (const Sample* s : groups[g]) {
      ++row.trials;
      row.converged += s->converged ? 1 : 0;
      row.failed += s->failed ? 1 : 0;
      const double e = std::isfinite(s->error) ? s->error : inf;
      const double j = std::isfinite(s->joint) ? s->joint : inf;
      err.push_back(e);
      joint.push_back(j);
      sq += e * e;
      jsum += j;
      if (std::isfinite(s->peb) && std::isfinite(s->bound)) {
        peb += s->peb;
        bound += s->bound;
        ++finite_bounds;
      }
    }
    row.rmse = std::sqrt(sq / row.trials);
    row.joint_mse = jsum / row.trials;
    row.median_position_error = median(err);
    row.median_joint_sq_error = median(joint);
    row.mean_peb = finite_bounds > 0 ? peb / finite_bounds : kNaN;
    row.mean_hcrlb_cfo_pn = finite_bounds > 0 ? bound / finite_bounds : kNaN;
  }
  return out;
}

}  // namespace

std::vector<SweepSummary> summarize(const std::vector<TrialRecord>& trials) {
  std::vector<Sample> s;
  for (const TrialRecord& r : trials)
    s.push_back({r.experiment, r.n_ris, r.tx_power_dbm, r.pn_var, r.position_error, r.cfo_pn_sq_error, r.peb,
                 r.hcrlb_cfo_pn, r.converged, r.status.rfind("failed", 0) == 0});
  return summarize_samples(s);
}

std::vector<SweepSummary> summarize(const csv::Table& t) {
  if (t.schema != "risloc-mc" || t.version != 1) throw std::runtime_error("expected schema risloc-mc v1");
  const int exp = t.column("experiment"), status = t.column("status");
  std::vector<Sample> s;
  for (size_t i = 0; i < t.rows.size(); ++i)
    s.push_back({t.rows[i][exp], static_cast<int>(t.number(i, "n_ris")), t.number(i, "tx_power_dbm"),
                 t.number(i, "pn_var"), t.number(i, "position_error"), t.number(i, "cfo_pn_sq_error"),
                 t.number(i, "peb"), t.number(i, "hcrlb_cfo_pn"), t.number(i, "converged") != 0.0,
                 t.rows[i][status].rfind("failed", 0) == 0});
  return summarize_samples(s);
}

void write_summary_csv(const std::string& path, const std::vector<SweepSummary>& rows) {
  csv::Writer out(path, "risloc-mc-summary", 1,
                  {"experiment", "n_ris", "tx_power_dbm", "pn_var", "trials", "converged", "failed", "rmse",
                   "median_position_error", "joint_mse", "median_joint_sq_error", "mean_peb", "mean_hcrlb_cfo_pn"});
  for (const SweepSummary& r : rows) {
    out << r.experiment << r.n_ris << r.tx_power_dbm << r.pn_var << r.trials << r.converged << r.failed << r.rmse
        << r.median_position_error << r.joint_mse << r.median_joint_sq_error << r.mean_peb << r.mean_hcrlb_cfo_pn;
    out.end_row();
  }
}

std::vector<HeatmapCell> peb_heatmap(const ScenarioConfig& cfg, const PhaseShiftVector& w, const PlaneSpec& plane) {
  if (plane.resolution < 1) throw std::invalid_argument("peb_heatmap: resolution must be at least 1");
  if (!(plane.margin >= 0.0) || !std::isfinite(plane.z)) throw std::invalid_argument("peb_heatmap: invalid plane");
  if (w.size() != cfg.ris.n_elements) throw std::invalid_argument("peb_heatmap: phase vector length differs from N_R");
  const double half = 0.5 * cfg.aoi_edge + plane.margin;
  const int r = plane.resolution;
  auto coord = [&](double c, int i) { return r == 1 ? c : c - half + 2.0 * half * i / (r - 1); };
  std::vector<HeatmapCell> cells;
  for (int iy = 0; iy < r; ++iy)
    for (int ix = 0; ix < r; ++ix)
      cells.push_back({ix, iy, {coord(cfg.aoi_center.x, ix), coord(cfg.aoi_center.y, iy), plane.z}, kNaN});
  const PilotSequence pilots = PilotSequence::qpsk(cfg.n_subcarriers);
  const PnCovariance pn = build_pn_covariance(cfg.n_subcarriers, cfg.pn_increment_var);
  for (HeatmapCell& c : cells) {
    try {
      const PolarPosition pp = cartesian_to_polar(c.p);
      const WLinearFim f(pp, pilots, cfg);
      c.peb = hcrlb(bim(f.evaluate_rank1(w), pn), transition_matrix(pp, cfg.n_subcarriers)).peb;
    } catch (const SingularMatrix&) {
      c.peb = kNaN;
    } catch (const DegenerateGeometry&) {
      c.peb = kNaN;
    }
  }
  return cells;
}

void write_heatmap_csv(const std::string& path, const std::vector<HeatmapCell>& cells) {
  csv::Writer out(path, "risloc-peb-grid", 1, {"ix", "iy", "x", "y", "z", "peb"});
  for (const HeatmapCell& c : cells) {
    out << c.ix << c.iy << c.p.x << c.p.y << c.p.z << c.peb;
    out.end_row();
  }
}

double mean_finite_peb(const std::vector<HeatmapCell>& cells) {
  double acc = 0.0;
  int n = 0;
  for (const HeatmapCell& c : cells)
    if (std::isfinite(c.peb)) {
      acc += c.peb;
      ++n;
    }
  return n > 0 ? acc / n : kNaN;
}

std::vector<CdfPoint> cdf_curves(const csv::Table& t, const std::string& metric) {
  if (t.rows.empty()) throw std::invalid_argument("cdf_curves: empty dataset");
  const int col = t.column(metric);
  const bool grouped = std::find(t.columns.begin(), t.columns.end(), "n_ris") != t.columns.end();
  struct Group {
    std::string name;
    int n_ris;
    double power, pn_var;
    std::vector<double> values;
  };
  std::vector<Group> groups;
  const double inf = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < t.rows.size(); ++i) {
    const int nr = grouped ? static_cast<int>(t.number(i, "n_ris")) : 0;
    const double p = grouped ? t.number(i, "tx_power_dbm") : 0.0;
    const double v = grouped ? t.number(i, "pn_var") : 0.0;
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.n_ris == nr && g.power == p && g.pn_var == v; });
    if (it == groups.end()) {
      const std::string name = grouped ? "nr" + std::to_string(nr) + "_p" + csv::format_double(p) + "_pn" +
                                             csv::format_double(v)
                                       : "all";
      groups.push_back({name, nr, p, v, {}});
      it = groups.end() - 1;
    }
    const std::string& cell = t.rows[i][static_cast<size_t>(col)];
    const double x = (cell.empty() || cell == "nan") ? inf : std::stod(cell);
    it->values.push_back(std::isnan(x) ? inf : x);
  }
  std::vector<CdfPoint> out;
  for (Group& g : groups) {
    std::sort(g.values.begin(), g.values.end());
    const int n = static_cast<int>(g.values.size());
    for (int k = 0; k < n; ++k)
      out.push_back({g.name, g.n_ris, g.power, g.pn_var, k + 1, g.values[static_cast<size_t>(k)],
                     static_cast<double>(k + 1) / n});
  }
  return out;
}

void write_cdf_csv(const std::string& path, const std::string& metric, const std::vector<CdfPoint>& points) {
  csv::Writer out(path, "risloc-cdf", 1, {"metric", "group", "n_ris", "tx_power_dbm", "pn_var", "rank", "value", "cdf"});
  for (const CdfPoint& p : points) {
    out << metric << p.group << p.n_ris << p.tx_power_dbm << p.pn_var << p.rank << p.value << p.cdf;
    out.end_row();
  }
}

std::vector<TraceRow> convergence_trace(const ScenarioConfig& cfg, const PhaseShiftVector& w,
                                        const ExperimentSpec& spec, int trial, TrialRecord* record) {
  std::vector<TracePoint> trace;
  const TrialRecord r = run_trial(cfg, w, spec, trial, &trace);
  if (r.status.rfind("failed", 0) == 0) throw std::runtime_error("convergence_trace: trial " + r.status);
  std::vector<TraceRow> rows;
  for (const TracePoint& t : trace)
    rows.push_back({t.outer, t.inner, t.inner_total, t.inner == 0, t.objective, t.phi_hat,
                    distance(polar_to_cartesian(t.position), r.truth)});
  if (record) *record = r;
  return rows;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  csv::Writer out(path, "risloc-trace", 1,
                  {"outer", "inner", "inner_total", "outer_boundary", "objective", "phi_hat", "position_error"});
  for (const TraceRow& r : rows) {
    out << r.outer << r.inner << r.inner_total << static_cast<int>(r.outer_boundary) << r.objective << r.phi_hat
        << r.position_error;
    out.end_row();
  }
}

}  // namespace risloc
