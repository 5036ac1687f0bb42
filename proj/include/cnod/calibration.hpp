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

#include <map>
#include <string>
#include <vector>

#include "cnod/device.hpp"
#include "cnod/tomography.hpp"

namespace cnod {

struct FitValue {
    double value = 0.0;
    double uncertainty = 0.0;  // one standard deviation, >= 0
};

struct CalibrationReport {
    std::string procedure;
    std::map<std::string, FitValue> params;
    double residual_norm = 0.0;  // reduced chi^2 of the final fit
    std::map<std::string, double> ground_truth;
    std::vector<std::string> flags;
    std::uint64_t seed = 0;
    int shots = 0;
    std::string config_hash;

    double value(const std::string &name) const;
    std::string to_json() const;
};

struct CalibrationOptions {
    int shots = 4000;
    std::uint64_t seed = 1;
    bool lossy = true;  // run the sweep through the lossy gate-level simulator
    int threads = 0;
};

// ---- amplitude: 1D cut of a vacuum characteristic function ----

struct AmplitudeOptions {
    int mode = 0;
    double axis_length = 2.5;  // sweep t in [-L, L] along exp(i axis_angle)
    double axis_angle = 0.0;
    int points = 101;
    double thermal_nbar = 0.0;      // > 0 starts from a thermal state instead of vacuum
    double expected_scale = 1.0;    // reference for the narrowness flag
    double max_residual = 10.0;     // reduced chi^2 above this is a fit failure
};

struct AmplitudeResult {
    CalibrationReport report;
    double scale = 0.0;
    double scale_error = 0.0;
    bool narrower_than_vacuum = false;
    CharFuncGrid data;
};

AmplitudeResult calibrate_amplitude(const DeviceParams &device, const AmplitudeOptions &amp = {},
                                    const CalibrationOptions &options = {});

// ---- geometric phase of the CNOD(g) CNOD(g) echo ----

struct GeometricPhaseResult {
    CalibrationReport report;
    std::vector<double> gamma;
    std::vector<double> phase;        // atan2(<sy>, <sx>) per sweep point
    std::vector<double> phase_error;
    std::vector<double> phase_fit;    // smoothed: k2 g^2 + k4 g^4
    std::vector<double> tracker;      // analytic tracker on the same sequence
    double k2 = 0.0, k4 = 0.0;
    double loglog_slope = 0.0;
    double max_tracker_deviation = 0.0;
    // Frame-rotation error implied by the quadratic coefficient.
    double frame_error = 0.0, frame_error_uncertainty = 0.0;
    // Cubic spline through the smoothed table; the even polynomial outside the sweep.
    double phase_at(double g) const;
};

GeometricPhaseResult calibrate_geometric_phase(const DeviceParams &device, const std::vector<double> &gamma_sweep,
                                               int mode = 0, const CalibrationOptions &options = {});

// ---- disentangling amplitude beta ----

struct BetaResult {
    CalibrationReport report;
    std::vector<double> beta;
    std::vector<double> coherence;    // |<sigma>| of the ancilla after the sequence
    std::vector<double> normalized;   // coherence * exp(beta^2 / 2)
    std::vector<double> coherence_error;
    double beta_coarse = 0.0;
    double beta_star = 0.0;
    double asymmetry_coarse = 0.0;
    double asymmetry_star = 0.0;
};

// alpha is the CNOD argument of the large displacement, so the ideal answer is pi / (2 alpha).
BetaResult calibrate_disentangling_beta(const DeviceParams &device, double alpha, const std::vector<double> &beta_sweep,
                                        int mode = 0, const CalibrationOptions &options = {});

// ---- Ramsey-style mode fit ----

struct RamseyOptions {
    int mode = 0;
    cx gamma = 1.0;
    double delta_omega = 0.0;  // artificial detuning (rad/s)
    std::vector<double> times;
    char ancilla = 'g';
    bool ancilla_noise = false;  // ancilla decay during the wait
    int truncation = 20;
    int starts = 9;
};

struct RamseyResult {
    CalibrationReport report;
    double t1_s = 0.0, t1_error = 0.0;
    double omega = 0.0, omega_error = 0.0;         // delta_omega + mode detuning (rad/s)
    double detuning = 0.0, detuning_error = 0.0;   // mode detuning (rad/s)
    double amplitude = 0.0, offset_scale = 0.0;    // A and overall scale
    std::vector<double> times, signal, signal_error;
};

// Fit of y = B cos(A exp(-t / 2 T1) sin(w t)) to the measured Re C(exp(i dw t) gamma).
RamseyResult ramsey_mode_fit(const DeviceParams &device, const RamseyOptions &ramsey,
                             const CalibrationOptions &options = {});

struct ChiResult {
    CalibrationReport report;
    RamseyResult ground, excited;
    double chi_hz = 0.0, chi_error_hz = 0.0;
};

// chi from the detuning difference of ancilla-ground and ancilla-excited runs.
ChiResult ramsey_chi(const DeviceParams &device, const RamseyOptions &ramsey, const CalibrationOptions &options = {});

// Fits the Ramsey model to arbitrary data (exposed for tests and the CLI).
RamseyResult fit_ramsey(const std::vector<double> &times, const std::vector<double> &y, const std::vector<double> &err,
                        double delta_omega, int starts = 9);

}  // namespace cnod
