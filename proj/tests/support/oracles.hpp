// SPDX-License-Identifier: Apache-2.0
// Independent helpers shared by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "risloc/config.hpp"
#include "risloc/random.hpp"
#include "risloc/signal_model.hpp"

namespace risloc::testing {

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

template <class A, class B>
double rel_err_mat(const A& a, const B& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale > 0.0 ? (a - b).norm() / scale : 0.0;
}

// Central difference of a vector-valued function along one scalar argument.
template <class F>
auto central_diff(const F& f, double x, double h) {
  return ((f(x + h) - f(x - h)) / (2.0 * h)).eval();
}

inline Position3 random_aoi_point(const ScenarioConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double e = cfg.aoi_edge;
  return {cfg.aoi_center.x + e * u(rng), cfg.aoi_center.y + e * u(rng), cfg.aoi_center.z + e * u(rng)};
}

inline CVec random_unit_modulus(int n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
  CVec w(n);
  for (int i = 0; i < n; ++i) w[i] = std::polar(1.0, u(rng));
  return w;
}

inline CVec random_complex(int n, Rng& rng) {
  std::normal_distribution<double> g;
  CVec v(n);
  for (int i = 0; i < n; ++i) v[i] = {g(rng), g(rng)};
  return v;
}

// Scenario with a smaller OFDM grid for fast tests.
inline ScenarioConfig small_scenario(int n_ris, int n_sub, double tx_dbm = -10.0) {
  ScenarioConfig cfg = default_scenario(n_ris);
  cfg.n_subcarriers = n_sub;
  cfg.pn_subspace_dim = std::min(cfg.pn_subspace_dim, n_sub);
  cfg.set_tx_power_dbm(tx_dbm);
  cfg.finalize();
  return cfg;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Scratch directory unique to the calling test.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("risloc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace risloc::testing
