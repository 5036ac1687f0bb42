// Copyright 2026 The cnodsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cnod/device.hpp"
#include "cnod/gates.hpp"
#include "cnod/hilbert.hpp"
#include "cnod/pulse.hpp"

namespace cnod {

enum class HamiltonianLevel { Dispersive1, Dispersive2, Full };

HamiltonianLevel parse_hamiltonian_level(const std::string &name);
std::string hamiltonian_level_name(HamiltonianLevel level);

// Rotating-frame drift: detuning terms, -chi |e><e| n per mode and (full) transmon-induced Kerr.
Operator build_drift_hamiltonian(const DeviceParams &device, const HilbertSpace &space, HamiltonianLevel level);

struct DriveTerm {
    Operator op;  // applied as eps(t) op^dag + eps*(t) op
    PulseShape envelope;
    double frame_detuning_hz = 0.0;  // extra factor exp(-i 2 pi f t)
    double start_s = 0.0;

    cx value(double t) const;
};

struct CollapseOp {
    Operator op;
    double rate = 0.0;  // 1/s, jump operator sqrt(rate) op
};

std::vector<CollapseOp> standard_collapse_ops(const DeviceParams &device, const HilbertSpace &space,
                                              bool mode_loss = true, bool ancilla_noise = true);

struct EvolutionConfig {
    double dt_s = 1e-9;
    int method_order = 2;  // 2: midpoint exponential, 4: commutator-free Magnus
    bool lindblad = false;
    bool check_convergence = false;
    double convergence_tol = 1e-6;
    double truncation_threshold = 1e-4;

    void validate() const;
};

// Propagates kets (columns) under the drift plus drives from t0 to t0 + T.
CMat propagate_columns(const CMat &kets, const HilbertSpace &space, const Operator &drift,
                       const std::vector<DriveTerm> &drives, const EvolutionConfig &config, double T,
                       double t0 = 0.0);

State propagate(const State &state, const Operator &drift, const std::vector<DriveTerm> &drives,
                const std::vector<CollapseOp> &collapse, const EvolutionConfig &config, double T, double t0 = 0.0);

// Largest population found in the top two Fock levels of any mode.
double top_fock_population(const State &state);

struct CnodSimConfig {
    double tau_s = 0.0;  // per pulse, 0 = device default
    HamiltonianLevel level = HamiltonianLevel::Dispersive2;
    PulseOptions pulse;
    std::optional<CnodPulsePlan> plan;  // overrides the plan derived from the device
    int substeps = 1;                   // integration steps per pulse sample
    int fock_cutoff = 4;                // subspace n_k < cutoff for the gate fidelity
    double fidelity_floor = 0.0;
    bool check_convergence = false;
    double convergence_tol = 1e-6;
};

struct CnodProcess {
    std::vector<int> basis;  // subspace indices in the full space
    CMat outputs;            // simulated images of the subspace basis
    CMat ideal;              // ideal CNOD images
    double average_gate_fidelity = 0.0;
    double z_corrected_fidelity = 0.0;  // after the best ancilla Z rotation
    double z_phase = 0.0;
    double leakage = 0.0;  // largest norm loss of a basis image
    // Classical end displacement of a state starting in g (resp. e), per mode.
    std::vector<cx> end_alpha_g, end_alpha_e;
};

// Pulse-level CNOD: each ancilla branch is propagated in its own classically displaced frame.
CnodProcess simulate_cnod(const DeviceParams &device, const HilbertSpace &space, const std::vector<cx> &alpha,
                          const CnodSimConfig &config = {});
// Same sequence propagated directly in the rotating frame (needs a truncation covering the transient).
CnodProcess simulate_cnod_lab(const DeviceParams &device, const HilbertSpace &space, const std::vector<cx> &alpha,
                              const CnodSimConfig &config = {});
// Pulse-level CNOD applied to a pure state.
State simulate_cnod_state(const DeviceParams &device, const State &state, const std::vector<cx> &alpha,
                          const CnodSimConfig &config = {});

// (Tr(M M^dag) + |Tr M|^2) / (d (d + 1)) with M = ideal^dag actual.
double average_gate_fidelity(const CMat &ideal, const CMat &actual);

struct LossOptions {
    int slices_per_pulse = 8;
    bool mode_loss = true;
    bool ancilla_noise = true;
    bool physical_cnod = true;  // drive scale and frame error act on CNODs
};

// Gate-level open-system model: CNOD ramps of the ground-branch displacement in slices around a
// finite pi pulse, rotations of finite duration; Kraus loss applied symmetrically per slice.
State simulate_sequence_lossy(const State &state, const GateSequence &seq, const DeviceParams &device,
                              const LossOptions &options = {});

// Noise of duration dt on a density matrix (mode amplitude damping and ancilla T1 / dephasing).
void apply_idle_noise(CMat &rho, const HilbertSpace &space, const DeviceParams &device, double dt,
                      const LossOptions &options = {});

struct PurityConfig {
    double tau_s = 0.0;
    bool with_loss = false;
    LossOptions loss;
    int threads = 0;
};

// Ancilla purity after CNOD(gamma), R_y(pi), CNOD(-gamma), normalized by the value at zero displacement.
RMat purity_map(const DeviceParams &device, const HilbertSpace &space, const std::vector<cx> &gamma_a,
                const std::vector<cx> &gamma_b, const PurityConfig &config = {});

}  // namespace cnod
