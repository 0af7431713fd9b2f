// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "risloc/config.hpp"
#include "risloc/types.hpp"

namespace risloc {

inline constexpr std::uint64_t kDefaultPilotSeed = 0x5EED;

struct PilotSequence {
  CVec symbols;
  static PilotSequence qpsk(int n, std::uint64_t seed = kDefaultPilotSeed);
  static PilotSequence ones(int n);
};

struct SignalMatrix {
  CMat s;  // sqrt(N) F^H Diag(s)
};

struct PnCovariance {
  RMat psi;
  double increment_var = 0.0;
};

struct PhaseNoisePath {
  RVec theta;
};

struct ChannelVector {
  CVec h;
};

struct GMatrix {
  CMat g;  // N_R x N, h = G^T w
};

struct ReceivedSignal {
  CVec y;
  double true_phi = 0.0;
  PhaseNoisePath true_theta;
};

enum class PolarAxis { range = 0, azimuth = 1, elevation = 2 };

PnCovariance build_pn_covariance(int n, double sigma_delta_sq);
PhaseNoisePath sample_phase_noise(const PnCovariance& cov, std::uint64_t seed);
SignalMatrix build_signal_matrix(const PilotSequence& pilots);
double subcarrier_wavelength(int n, const ScenarioConfig& cfg);

// Per-scenario cache of anchor-side geometry; evaluates the cascaded channel,
// its phase-shift-free factor G, and derivatives with respect to the polar UE position.
class ChannelModel {
 public:
  explicit ChannelModel(const ScenarioConfig& cfg);

  int n_elements() const { return n_elements_; }
  int n_subcarriers() const { return n_subcarriers_; }

  CVec channel(const PolarPosition& ue, const CVec& w) const;
  // h and dh/d(range, azimuth, elevation) in one pass.
  void channel_and_gradient(const PolarPosition& ue, const CVec& w, CVec& h, std::array<CVec, 3>& dh) const;
  GMatrix g_matrix(const PolarPosition& ue) const;
  std::array<CMat, 3> g_gradient(const PolarPosition& ue) const;

 private:
  struct ElementTerms {
    RVec amp, d_ru, tau;
    RMat dd;  // 3 x N_R: d(d_ru)/d(range, az, el)
  };
  ElementTerms element_terms(const PolarPosition& ue, bool with_gradient) const;

  int n_elements_;
  int n_subcarriers_;
  double bandwidth_;
  double light_speed_;
  double gain_;
  std::vector<Position3> elements_;
  RVec d_ar_;
  RVec lambda_sq_;
};

ChannelVector channel_vector(const Position3& ue, const CVec& w, const ScenarioConfig& cfg);
GMatrix g_matrix(const Position3& ue, const ScenarioConfig& cfg);
CVec channel_position_gradient(const PolarPosition& ue, const CVec& w, const ScenarioConfig& cfg, PolarAxis which);

// sqrt(P) Lambda_phi Lambda_theta S^T h
CVec received_mean(const CVec& s_t_h, double phi, const RVec& theta, double sqrt_power);
void add_noise(CVec& y, double noise_power_w, std::uint64_t seed);

ReceivedSignal synthesize_received(const Position3& ue, const CVec& w, double phi, const PhaseNoisePath& theta,
                                   const PilotSequence& pilots, const ScenarioConfig& cfg, std::uint64_t seed);

// P ||S^T h||^2 / (N sigma^2) in dB.
double receive_snr_db(const Position3& ue, const CVec& w, const PilotSequence& pilots, const ScenarioConfig& cfg);

// CSV schema "risloc-signal v1": index,re,im
void write_signal_csv(const std::string& path, const CVec& y);
CVec read_signal_csv(const std::string& path);

}  // namespace risloc
