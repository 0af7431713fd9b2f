// SPDX-License-Identifier: Apache-2.0
#include "risloc/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace risloc {

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

void ScenarioConfig::set_tx_power_dbm(double dbm) {
  tx_power_dbm = dbm;
  tx_power_w = dbm_to_watts(dbm);
}

void ScenarioConfig::finalize() {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("scenario: ") + what);
  };
  require(n_subcarriers >= 1 && (n_subcarriers & (n_subcarriers - 1)) == 0, "subcarrier count must be a power of two");
  require(pn_subspace_dim >= 1 && pn_subspace_dim <= n_subcarriers, "PN subspace dimension must lie in [1, N]");
  require(carrier_freq_hz > 0 && bandwidth_hz > 0 && light_speed > 0, "frequencies and light speed must be positive");
  require(bandwidth_hz < 2 * carrier_freq_hz, "bandwidth must leave every subcarrier frequency positive");
  require(pn_increment_var > 0, "PN increment variance must be positive");
  require(antenna_gain_tx > 0 && antenna_gain_rx > 0, "antenna gains must be positive");
  require(aoi_edge >= 0, "AOI edge must be non-negative");
  require(anchor.finite() && aoi_center.finite(), "positions must be finite");
  require(std::isfinite(noise_power_dbm) && std::isfinite(tx_power_dbm), "powers must be finite");
  require(ris.n_elements >= 1 && static_cast<int>(ris.element_positions.size()) == ris.n_elements,
          "RIS geometry not built");
  noise_power_w = dbm_to_watts(noise_power_dbm);
  tx_power_w = dbm_to_watts(tx_power_dbm);
}

ScenarioConfig default_scenario(int n_ris) {
  ScenarioConfig cfg;
  cfg.ris = RisGeometry::uniform_planar(n_ris, 0.5 * cfg.center_wavelength());
  cfg.finalize();
  return cfg;
}

ScenarioConfig parse_scenario(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("scenario file: ") + e.what());
  }
  ScenarioConfig cfg;
  auto get = [&](const char* key, double fallback) { return tree.get<double>(key, fallback); };
  cfg.anchor = {get("anchor.x", cfg.anchor.x), get("anchor.y", cfg.anchor.y), get("anchor.z", cfg.anchor.z)};
  cfg.n_subcarriers = tree.get<int>("ofdm.subcarriers", cfg.n_subcarriers);
  cfg.carrier_freq_hz = get("ofdm.carrier_hz", cfg.carrier_freq_hz);
  cfg.bandwidth_hz = get("ofdm.bandwidth_hz", cfg.bandwidth_hz);
  cfg.light_speed = get("ofdm.light_speed", cfg.light_speed);
  cfg.tx_power_dbm = get("power.tx_dbm", cfg.tx_power_dbm);
  cfg.noise_power_dbm = get("power.noise_dbm", cfg.noise_power_dbm);
  cfg.antenna_gain_tx = get("power.gain_tx", cfg.antenna_gain_tx);
  cfg.antenna_gain_rx = get("power.gain_rx", cfg.antenna_gain_rx);
  cfg.pn_increment_var = get("phase_noise.increment_var", cfg.pn_increment_var);
  cfg.pn_subspace_dim = tree.get<int>("phase_noise.subspace_dim", cfg.pn_subspace_dim);
  cfg.aoi_center = {get("aoi.center_x", cfg.aoi_center.x), get("aoi.center_y", cfg.aoi_center.y),
                    get("aoi.center_z", cfg.aoi_center.z)};
  cfg.aoi_edge = get("aoi.edge", cfg.aoi_edge);
  const int n_ris = tree.get<int>("ris.elements", 81);
  double spacing = get("ris.spacing", 0.0);
  if (spacing <= 0.0) spacing = 0.5 * cfg.center_wavelength();
  cfg.ris = RisGeometry::uniform_planar(n_ris, spacing);
  cfg.finalize();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string format_scenario(const ScenarioConfig& c) {
  std::ostringstream o;
  o << std::setprecision(17);
  o << "[anchor]\nx = " << c.anchor.x << "\ny = " << c.anchor.y << "\nz = " << c.anchor.z << "\n\n";
  o << "[ris]\nelements = " << c.ris.n_elements << "\nspacing = " << c.ris.spacing << "\n\n";
  o << "[ofdm]\nsubcarriers = " << c.n_subcarriers << "\ncarrier_hz = " << c.carrier_freq_hz
    << "\nbandwidth_hz = " << c.bandwidth_hz << "\nlight_speed = " << c.light_speed << "\n\n";
  o << "[power]\ntx_dbm = " << c.tx_power_dbm << "\nnoise_dbm = " << c.noise_power_dbm
    << "\ngain_tx = " << c.antenna_gain_tx << "\ngain_rx = " << c.antenna_gain_rx << "\n\n";
  o << "[phase_noise]\nincrement_var = " << c.pn_increment_var << "\nsubspace_dim = " << c.pn_subspace_dim << "\n\n";
  o << "[aoi]\ncenter_x = " << c.aoi_center.x << "\ncenter_y = " << c.aoi_center.y << "\ncenter_z = "
    << c.aoi_center.z << "\nedge = " << c.aoi_edge << "\n";
  return o.str();
}

}  // namespace risloc
