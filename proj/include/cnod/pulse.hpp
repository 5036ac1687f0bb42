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

#include <string>
#include <vector>

#include "cnod/common.hpp"

namespace cnod {

// Baseband envelope. Sample k covers [k dt, (k+1) dt) and the drive seen in the
// simulation frame is eps(t) = s_k exp(-i 2 pi carrier_detuning t), t measured from
// the start of the pulse.
struct PulseShape {
    std::vector<cx> samples;
    double dt = 1e-9;
    double carrier_detuning_hz = 0.0;

    double duration() const { return dt * static_cast<double>(samples.size()); }
    // Drive value in the simulation frame at time t (piecewise-constant envelope).
    cx drive_at(double t) const;
    PulseShape scaled(cx factor) const;
    void validate() const;
};

struct AntiSymmetricSpec {
    double sigma_s = 72e-9;
    double duration_s = 144e-9;
    cx amplitude = 1.0;           // rad/s
    double null_offset_hz = 0.0;  // modulation frequency; <= 0 selects 0.5 / duration
    double target_null_hz = 0.0;  // becomes the carrier detuning
    double dt_s = 1e-9;

    double effective_null_offset() const;
    void validate() const;
};

// amplitude * g(t) * sin(2 pi Delta (t - t0)), g a Gaussian centred at t0 = duration / 2.
PulseShape make_antisymmetric(const AntiSymmetricSpec &spec);
// Same envelope written as two opposite-phase Gaussians detuned by +-Delta.
PulseShape make_two_gaussian(const AntiSymmetricSpec &spec);
// Plain Gaussian (no null), for comparisons.
PulseShape make_gaussian(const AntiSymmetricSpec &spec);
// Echoed-displacement reference: Gaussian displacements of opposite sign (sigma, length each)
// at the start and end of `duration`, idle in between.
PulseShape make_ecd_pulse(double duration_s, double sigma_s, double length_s, double dt_s,
                          double carrier_detuning_hz);

struct Spectrum {
    std::vector<double> freq_hz;  // absolute frequency in the simulation frame
    std::vector<cx> values;
    double resolution_hz = 0.0;
    int padding_factor = 0;
};

// S(f) = int eps(t) exp(i 2 pi f (t - t0)) dt with t0 the pulse centre, on a zero-padded grid.
Spectrum spectrum(const PulseShape &pulse, int padding_factor = 8);
// Direct evaluation of S at one frequency.
cx spectrum_at(const PulseShape &pulse, double freq_hz);
double null_depth(const PulseShape &pulse, double freq_hz);

// alpha = -i int eps(t) exp(i 2 pi delta t) dt for the piecewise-constant envelope.
cx semiclassical_displacement(const PulseShape &pulse, double detuning_hz);

// Exact one-sample update of alpha' = -i (omega alpha + eps(t)).
cx branch_step(cx alpha, const PulseShape &pulse, std::size_t k, double omega);
// Same update after only u seconds into sample k (0 <= u <= dt).
cx branch_partial(cx alpha, const PulseShape &pulse, std::size_t k, double omega, double u);
// int Re(eps(t) alpha(t)^*) dt over sample k, starting from alpha at the sample start.
double branch_energy(cx alpha, const PulseShape &pulse, std::size_t k, double omega);
// alpha at every sample boundary (size samples + 1) for a branch rotating at omega (rad/s).
std::vector<cx> branch_trajectory(const PulseShape &pulse, double omega, cx alpha0 = 0.0);

// Scales amplitude so that the ground-branch displacement (branch frequency 0) equals target.
PulseShape size_for_displacement(const PulseShape &pulse, cx target);

// 20 log10(peak|ecd| / peak|cnod|) after normalizing both to unit |alpha| at
// carrier + offset. Durations and carriers must agree.
double compare_peak_amplitude(const PulseShape &cnod_pulse, const PulseShape &ecd_pulse, double offset_hz);

void write_pulse_csv(const PulseShape &pulse, const std::string &path, const std::vector<std::string> &meta = {});
PulseShape read_pulse_csv(const std::string &path);

}  // namespace cnod
