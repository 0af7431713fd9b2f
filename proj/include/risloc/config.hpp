// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "risloc/geometry.hpp"

namespace risloc {

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

struct ScenarioConfig {
  Position3 anchor{2.0, -2.0, 1.0};
  RisGeometry ris;
  int n_subcarriers = 32;
  double carrier_freq_hz = 2.8e9;
  double bandwidth_hz = 100e6;
  double noise_power_dbm = -109.0;
  double pn_increment_var = 1e-3;
  int pn_subspace_dim = 16;
  double tx_power_dbm = -10.0;
  double antenna_gain_tx = 1.0;
  double antenna_gain_rx = 1.0;
  double light_speed = 3e8;
  Position3 aoi_center{2.0, 2.0, 0.0};
  double aoi_edge = 1.0;

  // Linear powers, refreshed by finalize().
  double noise_power_w = 0.0;
  double tx_power_w = 0.0;

  double center_wavelength() const { return light_speed / carrier_freq_hz; }
  void set_tx_power_dbm(double dbm);
  // Recomputes linear powers and checks invariants; throws std::invalid_argument.
  void finalize();
};

// Scenario of the experiments section with an N_R-element half-wavelength RIS.
ScenarioConfig default_scenario(int n_ris = 81);

// Flat INI file; every key optional, unspecified keys keep the defaults.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& text);
std::string format_scenario(const ScenarioConfig& cfg);

}  // namespace risloc
