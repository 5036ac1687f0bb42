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

#include <cstdint>
#include <string>
#include <vector>

#include "cnod/device.hpp"
#include "cnod/gates.hpp"
#include "cnod/hilbert.hpp"
#include "cnod/tomography.hpp"

namespace cnod {

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2; throws validation_error on non-PSD input.
double fidelity(const CMat &rho, const CMat &sigma);
double trace_distance(const CMat &rho, const CMat &sigma);

// Mode-only density matrix (ancilla traced out), ordered like the mode block of the space.
CMat mode_density(const State &state, const std::vector<int> &keep_modes);

struct MleConfig {
    int max_iterations = 4000;      // total inner optimizer iterations
    double tolerance = 1e-8;        // relative likelihood change per outer iteration
    int inner_iterations = 100;     // per reweighted quadratic surrogate
    double delta_floor = 1e-6;  // std error floor for exact data
    int memory = 12;            // L-BFGS history
    int warm_start_iterations = 500;  // smooth least-squares warm start before the L1 likelihood
    int linear_inversion_max_dim = 40;  // linear-inversion initial guess up to this dimension
    bool record_history = true;
};

struct ReconstructionResult {
    CMat rho;
    std::vector<int> dims;
    double final_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
    std::vector<double> history;  // likelihood after each outer iteration (non-increasing)
};

// Sum over points of |Tr[D(lambda) rho] - measured| / std_error.
double mle_likelihood(const CharFuncGrid &data, const std::vector<int> &dims, const CMat &rho,
                      double delta_floor = 1e-6);
// rho = T^dag T / Tr(T^dag T), T lower triangular; least-squares warm start, then majorize-minimize
// (iteratively reweighted least squares with L-BFGS inner solves) on the L1 likelihood.
ReconstructionResult mle_reconstruct(const CharFuncGrid &data, const std::vector<int> &dims,
                                     const MleConfig &config = {});
// Drops the other modes of a grid whose points only displace `mode`.
CharFuncGrid marginal_grid(const CharFuncGrid &grid, int mode);
std::string reconstruction_json(const ReconstructionResult &r, double fidelity_to_target = -1.0);

struct WitnessResult {
    double ii = 1.0;
    double zz = 0.0;
    double xx = 0.0;  // XX and YY are only measured as XX - YY; split symmetrically
    double yy = 0.0;
    double xx_minus_yy = 0.0;
    double f = 0.0;
    double std_error = 0.0;
    double sz_zz = 0.0;  // raw sigma_z of the II + ZZ sequence
    double sz_xy = 0.0;  // raw sigma_z of the XX - YY sequence
};

struct WitnessOptions {
    MeasureMode mode = MeasureMode::Ideal;
    int shots = 0;
    std::uint64_t seed = 1;
    double tau_s = 0.0;
    int threads = 0;
};

// alpha_a / alpha_b are cat amplitudes. Warns when pi / (4 alpha) >= 0.5.
WitnessResult witness_protocol(const State &state, double alpha_a, double alpha_b, const DeviceParams &device,
                               const WitnessOptions &options = {});
WitnessResult witness_protocol(const State &initial, const GateSequence &seq, double alpha_a, double alpha_b,
                               const DeviceParams &device, const WitnessOptions &options = {});

// The four joint points: +-(i pi / 4 alpha_A, -i pi / 4 alpha_B) and +-(2 alpha_A, 2 alpha_B).
std::vector<std::vector<cx>> dfe_points(double alpha_a, double alpha_b);
double direct_fidelity_estimation(const CharFuncGrid &samples, double alpha_a, double alpha_b);

enum class TargetKind { PureCat, MixedLogical };

struct TargetParams {
    double alpha = 1.7;
    cx delta = 0.0;
    double theta_ph = 0.0;
    double phi_rot = 0.0;
};

// PureCat: N D(delta)(|e^{i theta} alpha> + e^{i phi} |-e^{i theta} alpha>);
// MixedLogical: D(delta)(|e^{i theta} alpha><.| + |-e^{i theta} alpha><.|) D(delta)^dag / 2.
CMat target_density(int dim, TargetKind kind, const TargetParams &p);

struct TableEntry {
    std::string mode;
    std::string state_type;
    TargetKind kind = TargetKind::PureCat;
    double fidelity = 0.0;
    double fidelity_nominal = 0.0;  // before the parameter optimization
    TargetParams params;
    double reference_fidelity = 0.0;
    bool converged = false;
};

struct TableInput {
    std::string mode;
    std::string state_type;
    CMat rho;  // single-mode density matrix
    TargetKind kind = TargetKind::PureCat;
    TargetParams initial;
    double reference_fidelity = 0.0;
};

// Maximizes the fidelity over alpha, delta, theta_ph (and phi_rot for pure targets) with a simplex search.
TableEntry fit_target(const TableInput &input);
std::vector<TableEntry> table_fidelities(const std::vector<TableInput> &inputs);
std::string table_json(const std::vector<TableEntry> &entries);

}  // namespace cnod
