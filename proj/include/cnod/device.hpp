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

#include "cnod/common.hpp"

namespace cnod {

struct ModeParams {
    std::string name;
    double freq_hz = 0.0;
    double chi_hz = 0.0;  // dispersive shift, drift term -chi |e><e| a^dag a
    double t1_s = 0.0;
    double detuning_hz = 0.0;  // mode frequency minus rotating-frame frequency
};

struct DeviceParams {
    std::vector<ModeParams> modes;
    double ancilla_freq_hz = 5.37e9;
    double ancilla_t1_s = 13.5e-6;
    double ancilla_t2e_s = 13e-6;
    double anharmonicity_hz = 194e6;
    // Explicit Kerr values (Hz) keyed by (i, j) with i <= j.
    std::map<std::pair<int, int>, double> kerr_overrides;

    int truncation = 40;
    double dt_s = 1e-9;
    // Ratio between commanded and realized drive amplitude (1 = ideal transfer).
    double drive_scale = 1.0;
    // Duration of one anti-symmetric pulse inside a CNOD.
    double pulse_tau_s = 144e-9;
    double pi_pulse_s = 22e-9;
    double half_pi_pulse_s = 16e-9;
    // Miscalibration added to every digital frame rotation inside a CNOD (rad).
    double frame_error_rad = 0.0;
    // Symmetric readout assignment-error probability.
    double readout_error = 0.0;

    int num_modes() const { return static_cast<int>(modes.size()); }
    int mode_index(const std::string &name) const;
    double chi_angular(int mode) const;
    // Kerr coefficient K_ij in Hz (self-Kerr for i == j).
    double kerr_hz(int i, int j) const;
    double kerr_angular(int i, int j) const { return kTwoPi * kerr_hz(i, j); }
    // 1/T_phi = 1/T2E - 1/(2 T1); zero when the ancilla is T1-limited.
    double ancilla_dephasing_rate() const;
    void validate() const;
};

// Alice / Bob / ancilla values from the device parameter table (range midpoints).
DeviceParams default_device();

// Parses `section.key = value` lines on top of default_device().
DeviceParams load_device(const std::string &config_text);
DeviceParams load_device_file(const std::string &path);
std::string device_to_config(const DeviceParams &device);
// Stable hash of the canonical config text, hex encoded.
std::string config_hash(const DeviceParams &device);

// Ratio of the 3 pi / chi reference time to the generation time.
// Device restricted to (and reordered as) the listed modes; Kerr values are preserved.
DeviceParams select_modes(const DeviceParams &device, const std::vector<int> &modes);

double speedup_ratio(double generation_time_s, double chi_hz);

}  // namespace cnod
