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

#include "cnod/device.hpp"
#include "cnod/hilbert.hpp"
#include "cnod/pulse.hpp"

namespace cnod {

struct Gate {
    enum class Kind { Rotation, Cnod, Displace, DigitalRotation, Wait };

    Kind kind = Kind::Wait;
    double axis[3] = {0.0, 0.0, 1.0};  // Rotation
    double angle = 0.0;                // Rotation, DigitalRotation
    std::vector<cx> alpha;             // Cnod: one amplitude per mode
    int mode = 0;                      // Displace, DigitalRotation
    cx displacement = 0.0;             // Displace
    double duration_s = 0.0;           // Wait
    double tau_s = 0.0;                // Cnod: per-pulse duration, 0 = device default

    static Gate rotation(const double axis[3], double angle);
    static Gate rotation(char axis, double angle);
    static Gate cnod(std::vector<cx> alpha, double tau_s = 0.0);
    static Gate displace(int mode, cx alpha);
    static Gate digital_rotation(int mode, double angle);
    static Gate wait(double duration_s);

    bool operator==(const Gate &other) const;
};

struct GateSequence {
    std::vector<Gate> gates;
    std::string label;
    double nominal_duration_s = 0.0;

    bool operator==(const GateSequence &other) const;
};

// Line-oriented text form: `ROT y 1.5707963`, `CNOD 3.4+0i 0+0i`, `DISP 0 1+0i`,
// `FRAME 1 0.25`, `WAIT 1e-06`. Optional `tau=` on CNOD lines, `# label=` and
// `# duration_s=` header lines.
// Keeps only the listed device modes (renumbered in order); dropped modes must be idle.
GateSequence restrict_sequence(const GateSequence &seq, const std::vector<int> &modes);

std::string serialize_sequence(const GateSequence &seq);
GateSequence parse_sequence(const std::string &text);

Operator ideal_cnod(const HilbertSpace &space, const std::vector<cx> &alpha);
Operator rotation(const HilbertSpace &space, const double axis[3], double angle);
Operator rotation(const HilbertSpace &space, char axis, double angle);
Operator unconditional_displacement(const HilbertSpace &space, int mode, cx alpha);

// Ideal (unitary) application to kets or density matrices.
void apply_gate(CMat &x, const HilbertSpace &space, const Gate &gate, bool density);
State apply_sequence(const State &state, const GateSequence &seq);

// Physical durations used by the lossy model.
double gate_duration(const Gate &gate, const DeviceParams &device);
double sequence_duration(const GateSequence &seq, const DeviceParams &device);

enum class CatTarget { SingleA, SingleB, Product, Bell };
CatTarget parse_cat_target(const std::string &name);
std::string cat_target_name(CatTarget t);

struct CatOptions {
    // Initial rotation R_n(theta), n = (cos phi, sin phi, 0). Defaults give even cats.
    double theta = -kPi / 2.0;
    double phi = 0.0;
    // Solve per-pulse durations so totals match the reported generation times
    // (476 ns, 620 ns, 1312 ns); otherwise use device.pulse_tau_s.
    bool match_reported_timing = true;
};

// Generation times of the single-Alice, single-Bob and Bell sequences.
double reported_generation_time(CatTarget t);

// alpha holds cat amplitudes per mode (the CNOD argument is 2 alpha). The disentangling
// step CNOD(i beta) satisfies sum_i (2 alpha_i) beta_i = pi / 2 with beta_i proportional to 1 / alpha_i.
GateSequence compile_cat_sequence(CatTarget target, const std::vector<cx> &alpha, const DeviceParams &device,
                                  const CatOptions &options = {});

// Ideal target state of a compiled sequence: the cat (or Bell-cat) with ancilla |+i>.
State cat_target_state(CatTarget target, const std::vector<cx> &alpha, const HilbertSpace &space,
                       double theta = -kPi / 2.0, double phi = 0.0);

struct QcMapResult {
    State state;          // exact sequence output
    State approximate;    // |+i> (cos(theta/2)|a/2> - sin(theta/2) e^{i phi}|-a/2>)
    double overlap = 0.0; // |<approximate|state>|^2
};

// R_n(theta) -> CNOD(alpha) -> R_y(pi/2) -> CNOD(i beta) on |g, vacuum>.
// alpha are CNOD arguments; sum alpha_i beta_i must equal pi / 2.
QcMapResult qc_map(double theta, double phi, const std::vector<cx> &alpha, const std::vector<double> &beta,
                   const HilbertSpace &space);

// Pulses realizing one CNOD: per mode, first and second anti-symmetric pulse and the digital
// frame angle applied between them.
struct CnodPulsePlan {
    double tau_s = 0.0;
    std::vector<PulseShape> first;
    std::vector<PulseShape> second;
    std::vector<double> frame_angle;
};

struct PulseOptions {
    double sigma_fraction = 0.5;  // sigma = fraction * tau
    double null_offset_hz = 0.0;  // <= 0: 0.5 / tau
    double dt_s = 0.0;            // <= 0: device.dt_s
};

CnodPulsePlan plan_cnod_pulses(const DeviceParams &device, const std::vector<cx> &alpha, double tau_s,
                               const PulseOptions &options = {});

// Relative ancilla-branch phase (phase of |e> minus phase of |g>) accumulated by the
// displacement geometry of a sequence started from (|g> + |e>)/sqrt(2). Plain displacements
// contribute the composition phase Im(beta alpha_prev^*); CNOD gates contribute the
// phase-space area swept by the semiclassical pulse trajectories of each branch.
double geometric_phase_of(const GateSequence &seq, const DeviceParams &device, const PulseOptions &options = {});

}  // namespace cnod
