// SPDX-License-Identifier: Apache-2.0
#include "risloc/signal_model.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "risloc/csv.hpp"
#include "risloc/kernels.hpp"
#include "risloc/random.hpp"

namespace risloc {

PilotSequence PilotSequence::qpsk(int n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<int> quadrant(0, 3);
  PilotSequence p;
  p.symbols.resize(n);
  for (int k = 0; k < n; ++k) p.symbols[k] = std::polar(1.0, kPi / 4 + kPi / 2 * quadrant(rng));
  return p;
}

PilotSequence PilotSequence::ones(int n) { return {CVec::Ones(n)}; }

PnCovariance build_pn_covariance(int n, double sigma_delta_sq) {
  if (n < 1) throw std::invalid_argument("PN covariance: N must be positive");
  if (!(sigma_delta_sq > 0.0)) throw std::invalid_argument("PN covariance: increment variance must be positive");
  PnCovariance c;
  c.increment_var = sigma_delta_sq;
  c.psi.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.psi(i, j) = sigma_delta_sq * (std::min(i, j) + 1);
  return c;
}

PhaseNoisePath sample_phase_noise(const PnCovariance& cov, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> step(0.0, std::sqrt(cov.increment_var));
  const int n = static_cast<int>(cov.psi.rows());
  PhaseNoisePath p;
  p.theta.resize(n);
  double acc = 0.0;
  for (int k = 0; k < n; ++k) p.theta[k] = (acc += step(rng));
  return p;
}

SignalMatrix build_signal_matrix(const PilotSequence& pilots) {
  const int n = static_cast<int>(pilots.symbols.size());
  for (int k = 0; k < n; ++k)
    if (std::abs(pilots.symbols[k]) == 0.0) throw std::invalid_argument("pilot symbol is zero");
  SignalMatrix m;
  m.s.resize(n, n);
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < n; ++col)
      m.s(row, col) = std::polar(1.0, 2.0 * kPi * ((static_cast<long>(row) * col) % n) / n) * pilots.symbols[col];
  return m;
}

double subcarrier_wavelength(int n, const ScenarioConfig& cfg) {
  if (n < 0 || n >= cfg.n_subcarriers) throw std::out_of_range("subcarrier index out of range");
  const double f = cfg.carrier_freq_hz + (static_cast<double>(n) / cfg.n_subcarriers - 0.5) * cfg.bandwidth_hz;
  return cfg.light_speed / f;
}

ChannelModel::ChannelModel(const ScenarioConfig& cfg)
    : n_elements_(cfg.ris.n_elements),
      n_subcarriers_(cfg.n_subcarriers),
      bandwidth_(cfg.bandwidth_hz),
      light_speed_(cfg.light_speed),
      gain_(std::sqrt(cfg.antenna_gain_tx * cfg.antenna_gain_rx)),
      elements_(cfg.ris.element_positions) {
  d_ar_.resize(n_elements_);
  for (int r = 0; r < n_elements_; ++r) {
    d_ar_[r] = distance(cfg.anchor, elements_[r]);
    if (!(d_ar_[r] > 0.0)) throw DegenerateGeometry("anchor coincides with an RIS element");
  }
  lambda_sq_.resize(n_subcarriers_);
  for (int n = 0; n < n_subcarriers_; ++n) {
    const double l = subcarrier_wavelength(n, cfg);
    lambda_sq_[n] = l * l;
  }
}

ChannelModel::ElementTerms ChannelModel::element_terms(const PolarPosition& ue, bool with_gradient) const {
  const Position3 p = polar_to_cartesian(ue);
  Eigen::Matrix3d jac;
  if (with_gradient) {
    if (!(ue.range > 0.0) || std::abs(std::sin(ue.elevation)) < 1e-12)
      throw DegenerateGeometry("polar gradient undefined: zero range or sin(elevation) = 0");
    jac = polar_jacobian(ue);
  }
  ElementTerms t;
  t.amp.resize(n_elements_);
  t.d_ru.resize(n_elements_);
  t.tau.resize(n_elements_);
  if (with_gradient) t.dd.resize(3, n_elements_);
  const double scale = gain_ / (16.0 * kPi * kPi);
  for (int r = 0; r < n_elements_; ++r) {
    const Position3 diff = p - elements_[r];
    const double d = diff.norm();
    if (!(d > 0.0)) throw DegenerateGeometry("UE coincides with an RIS element");
    t.d_ru[r] = d;
    t.amp[r] = scale / (d_ar_[r] * d);
    t.tau[r] = (d_ar_[r] + d) / light_speed_;
    if (with_gradient) {
      const Eigen::Vector3d u(diff.x / d, diff.y / d, diff.z / d);
      t.dd.col(r) = jac.transpose() * u;
    }
  }
  return t;
}

namespace {

struct KernelBuffers {
  std::vector<double> cre, cim, zre, zim, weights, ore, oim;
};

}  // namespace

CVec ChannelModel::channel(const PolarPosition& ue, const CVec& w) const {
  if (w.size() != n_elements_) throw std::invalid_argument("phase-shift vector length mismatch");
  const ElementTerms t = element_terms(ue, false);
  const int R = n_elements_, N = n_subcarriers_;
  KernelBuffers b{std::vector<double>(R), std::vector<double>(R), std::vector<double>(R), std::vector<double>(R),
                  {}, std::vector<double>(N), std::vector<double>(N)};
  const double omega = -2.0 * kPi * bandwidth_ / N;
  for (int r = 0; r < R; ++r) {
    const cd c = w[r] * t.amp[r];
    b.cre[r] = c.real();
    b.cim[r] = c.imag();
    b.zre[r] = std::cos(omega * t.tau[r]);
    b.zim[r] = std::sin(omega * t.tau[r]);
  }
  kernels::PhasorSumInput in{R, N, 0, b.cre.data(), b.cim.data(), b.zre.data(), b.zim.data(), nullptr,
                             b.ore.data(), b.oim.data()};
  kernels::phasor_sums(in);
  CVec h(N);
  for (int n = 0; n < N; ++n) h[n] = lambda_sq_[n] * cd(b.ore[n], b.oim[n]);
  return h;
}

void ChannelModel::channel_and_gradient(const PolarPosition& ue, const CVec& w, CVec& h,
                                        std::array<CVec, 3>& dh) const {
  if (w.size() != n_elements_) throw std::invalid_argument("phase-shift vector length mismatch");
  const ElementTerms t = element_terms(ue, true);
  const int R = n_elements_, N = n_subcarriers_;
  KernelBuffers b{std::vector<double>(R),     std::vector<double>(R),     std::vector<double>(R),
                  std::vector<double>(R),     std::vector<double>(6 * R), std::vector<double>(7 * N),
                  std::vector<double>(7 * N)};
  const double omega = -2.0 * kPi * bandwidth_ / N;
  for (int r = 0; r < R; ++r) {
    const cd c = w[r] * t.amp[r];
    b.cre[r] = c.real();
    b.cim[r] = c.imag();
    b.zre[r] = std::cos(omega * t.tau[r]);
    b.zim[r] = std::sin(omega * t.tau[r]);
    for (int k = 0; k < 3; ++k) {
      b.weights[k * R + r] = t.dd(k, r) / t.d_ru[r];
      b.weights[(3 + k) * R + r] = t.dd(k, r);
    }
  }
  kernels::PhasorSumInput in{R, N, 6, b.cre.data(), b.cim.data(), b.zre.data(), b.zim.data(), b.weights.data(),
                             b.ore.data(), b.oim.data()};
  kernels::phasor_sums(in);
  h.resize(N);
  for (int k = 0; k < 3; ++k) dh[k].resize(N);
  const double kdelay = 2.0 * kPi * bandwidth_ / (N * light_speed_);
  for (int n = 0; n < N; ++n) {
    h[n] = lambda_sq_[n] * cd(b.ore[n], b.oim[n]);
    for (int k = 0; k < 3; ++k) {
      const cd amp_term(b.ore[(1 + k) * N + n], b.oim[(1 + k) * N + n]);
      const cd delay_term(b.ore[(4 + k) * N + n], b.oim[(4 + k) * N + n]);
      dh[k][n] = -lambda_sq_[n] * (amp_term + kJ * (kdelay * n) * delay_term);
    }
  }
}

GMatrix ChannelModel::g_matrix(const PolarPosition& ue) const {
  const ElementTerms t = element_terms(ue, false);
  const int R = n_elements_, N = n_subcarriers_;
  GMatrix g;
  g.g.resize(R, N);
  for (int r = 0; r < R; ++r)
    for (int n = 0; n < N; ++n)
      g.g(r, n) = lambda_sq_[n] * t.amp[r] * std::polar(1.0, -2.0 * kPi * (n * bandwidth_ / N) * t.tau[r]);
  return g;
}

std::array<CMat, 3> ChannelModel::g_gradient(const PolarPosition& ue) const {
  const ElementTerms t = element_terms(ue, true);
  const int R = n_elements_, N = n_subcarriers_;
  std::array<CMat, 3> out;
  for (auto& m : out) m.resize(R, N);
  for (int r = 0; r < R; ++r)
    for (int n = 0; n < N; ++n) {
      const cd base = lambda_sq_[n] * t.amp[r] * std::polar(1.0, -2.0 * kPi * (n * bandwidth_ / N) * t.tau[r]);
      const cd factor = 1.0 / t.d_ru[r] + kJ * (2.0 * kPi * n * bandwidth_ / (N * light_speed_));
      for (int k = 0; k < 3; ++k) out[k](r, n) = -base * factor * t.dd(k, r);
    }
  return out;
}

namespace {

void warn_outside_fresnel(const Position3& ue, const ScenarioConfig& cfg) {
  static std::atomic<bool> warned{false};
  if (cfg.ris.n_elements < 4) return;
  if (fresnel_region_check(ue.norm(), cfg.ris, cfg.center_wavelength())) return;
  if (!warned.exchange(true))
    std::cerr << "warning: UE at distance " << ue.norm() << " m lies outside the RIS near-field region\n";
}

}  // namespace

ChannelVector channel_vector(const Position3& ue, const CVec& w, const ScenarioConfig& cfg) {
  warn_outside_fresnel(ue, cfg);
  return {ChannelModel(cfg).channel(cartesian_to_polar(ue), w)};
}

GMatrix g_matrix(const Position3& ue, const ScenarioConfig& cfg) {
  warn_outside_fresnel(ue, cfg);
  return ChannelModel(cfg).g_matrix(cartesian_to_polar(ue));
}

CVec channel_position_gradient(const PolarPosition& ue, const CVec& w, const ScenarioConfig& cfg, PolarAxis which) {
  CVec h;
  std::array<CVec, 3> dh;
  ChannelModel(cfg).channel_and_gradient(ue, w, h, dh);
  return dh[static_cast<int>(which)];
}

CVec received_mean(const CVec& s_t_h, double phi, const RVec& theta, double sqrt_power) {
  const int n = static_cast<int>(s_t_h.size());
  CVec mu(n);
  for (int k = 0; k < n; ++k) mu[k] = sqrt_power * std::polar(1.0, 2.0 * kPi * k * phi / n + theta[k]) * s_t_h[k];
  return mu;
}

void add_noise(CVec& y, double noise_power_w, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(noise_power_w / 2.0));
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    const double re = g(rng);
    const double im = g(rng);
    y[k] += cd(re, im);
  }
}

ReceivedSignal synthesize_received(const Position3& ue, const CVec& w, double phi, const PhaseNoisePath& theta,
                                   const PilotSequence& pilots, const ScenarioConfig& cfg, std::uint64_t seed) {
  const CVec h = channel_vector(ue, w, cfg).h;
  const SignalMatrix s = build_signal_matrix(pilots);
  ReceivedSignal out;
  out.y = received_mean(s.s.transpose() * h, phi, theta.theta, std::sqrt(cfg.tx_power_w));
  add_noise(out.y, cfg.noise_power_w, seed);
  out.true_phi = phi;
  out.true_theta = theta;
  return out;
}

double receive_snr_db(const Position3& ue, const CVec& w, const PilotSequence& pilots, const ScenarioConfig& cfg) {
  const CVec sth = build_signal_matrix(pilots).s.transpose() * channel_vector(ue, w, cfg).h;
  return 10.0 * std::log10(cfg.tx_power_w * sth.squaredNorm() / (cfg.n_subcarriers * cfg.noise_power_w));
}

void write_signal_csv(const std::string& path, const CVec& y) {
  csv::Writer out(path, "risloc-signal", 1, {"index", "re", "im"});
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    out << static_cast<long long>(k) << y[k].real() << y[k].imag();
    out.end_row();
  }
}

CVec read_signal_csv(const std::string& path) {
  const csv::Table t = csv::read(path);
  CVec y(t.rows.size());
  for (size_t i = 0; i < t.rows.size(); ++i) y[i] = cd(t.number(i, "re"), t.number(i, "im"));
  return y;
}

}  // namespace risloc
