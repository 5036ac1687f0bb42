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
#include <functional>
#include <string>
#include <vector>

#include "cnod/device.hpp"
#include "cnod/gates.hpp"
#include "cnod/hilbert.hpp"

namespace cnod {

struct GridAxis {
    std::string label;
    int mode = 0;
    cx direction = 1.0;
    std::vector<double> samples;
};

// Characteristic-function samples; one row per point with gamma per mode.
struct CharFuncGrid {
    int num_modes = 1;
    std::vector<GridAxis> axes;  // empty for point sets; first axis varies slowest
    std::vector<std::vector<cx>> points;
    std::vector<cx> values;
    std::vector<double> std_errors;
    int shots = 0;  // 0 = exact values
    std::string protocol = "exact";
    std::uint64_t seed = 0;
    std::string config_hash;
    bool phase_corrected = false;
    bool shift_corrected = false;
    std::vector<double> shift;
    double contrast = 1.0;  // divisor applied to the raw estimates

    std::size_t size() const { return points.size(); }
    int rows() const;
    int cols() const;
    void validate() const;
};

std::vector<double> linspace(double lo, double hi, int n);
CharFuncGrid make_axis_grid(int num_modes, const std::vector<GridAxis> &axes);
CharFuncGrid make_point_set(const std::vector<std::vector<cx>> &points);
// Named planar cuts: "re-re", "im-im", "re-im" (joint), "a" / "b" (single-mode complex plane), "a-re", "b-re".
CharFuncGrid plane_grid(const std::string &plane, int n, double extent, int num_modes);

cx char_func_exact(const State &state, const std::vector<cx> &gamma);
cx char_func_exact(const State &state, cx gamma_a, cx gamma_b);
// Fills values (std_error 0) in parallel.
CharFuncGrid evaluate_exact(const State &state, CharFuncGrid grid, int threads = 0);

enum class MeasureMode { Ideal, PulseLevel, Lossy };
MeasureMode parse_measure_mode(const std::string &name);
std::string measure_mode_name(MeasureMode mode);

enum class AncillaPrep { Auto, None, FromPlusI };

// Two-mode points: one CNOD on both modes, or CNOD(gamma_A) then CNOD(-gamma_B).
// Auto picks the sequential form when any point displaces both modes.
enum class CnodLayout { Auto, Simultaneous, Sequential };

struct MeasureOptions {
    MeasureMode mode = MeasureMode::Ideal;
    int shots = 4000;  // per quadrature, split over the +/- interleave; 0 = expectation values
    std::uint64_t seed = 1;
    double tau_s = 0.0;  // tomography CNOD pulse duration; 0 = twice the device default
    int slices_per_pulse = 8;
    AncillaPrep prep = AncillaPrep::Auto;
    bool interleave = true;
    CnodLayout layout = CnodLayout::Auto;
    // Divide by the protocol's own contrast (its noise-free estimate at gamma = 0), as done with
    // measured data; applied in lossy mode only.
    bool normalize_contrast = true;
    int threads = 0;
};

// Simulated R_y(pi/2) -> CNOD(gamma_A) -> CNOD(gamma_B) -> R_y/R_x(pi/2) -> sigma_z experiment per point.
CharFuncGrid measure_char_func(const State &state, CharFuncGrid grid, const DeviceParams &device,
                               const MeasureOptions &options = {});
// Runs the preparation sequence in the same mode, then measures.
State prepare_state(const State &initial, const GateSequence &seq, const DeviceParams &device, MeasureMode mode);
CharFuncGrid measure_char_func(const State &initial, const GateSequence &seq, CharFuncGrid grid,
                               const DeviceParams &device, const MeasureOptions &options = {});

using PhaseFunction = std::function<double(const std::vector<cx> &)>;

// Geometric phase the physical measurement sequence imprints on the estimate at each point,
// relative to the ideal protocol; joint selects the two-CNOD sequence. Feed to postprocess.
PhaseFunction tomography_phase_correction(const DeviceParams &device, const MeasureOptions &options, bool joint);

// Multiplies values by exp(-i phase(gamma)) and relabels gamma_k -> gamma_k - shift_k.
CharFuncGrid postprocess(const CharFuncGrid &grid, const PhaseFunction &phase, const std::vector<double> &shift);

struct ShiftModel {
    double imperfect = 0.0;  // real part measured after imperfect disentanglement
    double exact = 0.0;      // characteristic function of the ideal cat
    double difference = 0.0;
};

// alpha is the CNOD argument of the cat (cat amplitude alpha / 2); requires alpha beta = pi / 2.
ShiftModel disentanglement_shift_model(double alpha, double beta, cx gamma);
// Real-axis position of the maximum of the imperfect signal (the apparent shift).
double predicted_shift(double alpha, double beta);

void write_dataset_csv(const CharFuncGrid &grid, const std::string &path, const std::vector<std::string> &meta = {});
CharFuncGrid read_dataset_csv(const std::string &path);

}  // namespace cnod
