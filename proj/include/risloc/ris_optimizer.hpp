// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "risloc/hcrlb.hpp"
#include "risloc/sdp.hpp"

namespace risloc {

// Unit-modulus RIS phase shifts w (the channel uses w, the relaxation W = conj(w) w^T).
using PhaseShiftVector = CVec;

// U points uniform in the AOI cube.
std::vector<Position3> sample_aoi(const ScenarioConfig& cfg, int u, std::uint64_t seed);

// Relaxed phase design: min (1/U) sum_u tr Z_u subject to, for each sample u,
// [[Z_u, Xi_u], [Xi_u^T, B_u(W)]] PSD, W PSD, diag(W) = 1.
// Each LMI is stored after the congruence diag(sqrt(s) I, D_u) with D_u = diag(B_u(I))^-1/2
// and Z_u rescaled by s, so the program's objective is s times the reported one.
struct SdrProblem {
  std::vector<Position3> samples;
  sdp::ConeProgram program;
  int w_block = 0;
  std::vector<int> z_blocks;
  double objective_scale = 1.0;  // s
  std::vector<RVec> lmi_scaling;  // D_u diagonals
};

SdrProblem assemble_sdr(const std::vector<Position3>& samples, const PilotSequence& pilots, const ScenarioConfig& cfg);

struct Rank1Extraction {
  PhaseShiftVector w;
  std::vector<int> zero_entries;  // indices replaced by phase 0
};

// Principal eigenvector scaled by sqrt(lambda_max), projected element-wise to unit modulus,
// returned as w (the conjugate). The global phase puts the first entry at phase 0.
Rank1Extraction extract_rank1(const CMat& w_matrix);

// Phase-projected draws from CN(0, W) plus the eigenvector candidate; returns the candidate
// of smallest average PEB over the evaluator's positions.
PhaseShiftVector gaussian_randomization(const CMat& w_matrix, int n_candidates, std::uint64_t seed,
                                        const PebEvaluator& evaluator);

PhaseShiftVector random_phase_shifts(int n_elements, std::uint64_t seed);

struct SdrOptions {
  sdp::SolverOptions solver;
  int randomization_candidates = 0;
  std::uint64_t randomization_seed = 1;
};

struct SdrSolution {
  std::vector<Position3> samples;
  CMat w_matrix;
  std::vector<RMat> z;   // unscaled Z_u
  double objective = 0.0;  // (1/U) sum tr Z_u, a lower bound on the mean PEB^2 over the samples
  PhaseShiftVector w;
  std::vector<int> zero_entries;
  double realized_mean_peb = 0.0;     // of w over the samples
  double realized_mean_peb_sq = 0.0;  // comparable with objective
  sdp::SolverReport report;
  sdp::KktResiduals kkt;  // of the scaled program
};

SdrSolution solve_sdr(const SdrProblem& problem, const PilotSequence& pilots, const ScenarioConfig& cfg,
                      const SdrOptions& opts = {});
// sample_aoi + assemble_sdr + solve_sdr; throws std::runtime_error unless the solver reports optimal.
SdrSolution optimize_phase_shifts(const ScenarioConfig& cfg, int u, std::uint64_t seed, const SdrOptions& opts = {});

// CSV schema "risloc-phase" v1: index, phase (radians).
void write_phase_csv(const std::string& path, const PhaseShiftVector& w);
PhaseShiftVector read_phase_csv(const std::string& path);

}  // namespace risloc
