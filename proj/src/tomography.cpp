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

#include "cnod/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "cnod/dynamics.hpp"
#include "cnod/kernels.hpp"

namespace cnod {

int CharFuncGrid::rows() const {
    return axes.empty() ? static_cast<int>(points.size()) : static_cast<int>(axes[0].samples.size());
}

int CharFuncGrid::cols() const {
    return axes.size() < 2 ? 1 : static_cast<int>(axes[1].samples.size());
}

void CharFuncGrid::validate() const {
    if (values.size() != points.size() || std_errors.size() != points.size()) {
        throw Error("validation_error", "grid values and points differ in length");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (static_cast<int>(points[i].size()) != num_modes) {
            throw Error("validation_error", "grid point with wrong number of modes");
        }
        bool origin = std::all_of(points[i].begin(), points[i].end(), [](cx g) { return g == cx(0.0); });
        if (origin && std::abs(values[i] - 1.0) > 1e-6 + 3.0 * std_errors[i]) {
            throw Error("validation_error", "characteristic function at the origin differs from 1");
        }
        double bound = 1.0 + 1e-9 + 3.0 * std_errors[i];
        if (!std::isfinite(std::abs(values[i])) || std::abs(values[i]) > bound) {
            throw Error("validation_error", "characteristic function value exceeds 1 at point " + std::to_string(i));
        }
    }
}

std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) {
        throw Error("validation_error", "linspace needs at least one sample");
    }
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) {
        v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    }
    return v;
}

CharFuncGrid make_axis_grid(int num_modes, const std::vector<GridAxis> &axes) {
    if (axes.empty() || axes.size() > 2) {
        throw Error("validation_error", "grid needs one or two axes");
    }
    CharFuncGrid g;
    g.num_modes = num_modes;
    g.axes = axes;
    for (const auto &a : axes) {
        if (a.mode < 0 || a.mode >= num_modes || a.samples.empty()) {
            throw Error("validation_error", "bad grid axis '" + a.label + "'");
        }
    }
    const auto &a0 = axes[0];
    std::vector<double> s1 = axes.size() > 1 ? axes[1].samples : std::vector<double>{0.0};
    for (double x : a0.samples) {
        for (double y : s1) {
            std::vector<cx> p(num_modes, 0.0);
            p[a0.mode] += x * a0.direction;
            if (axes.size() > 1) {
                p[axes[1].mode] += y * axes[1].direction;
            }
            g.points.push_back(p);
        }
    }
    g.values.assign(g.points.size(), 0.0);
    g.std_errors.assign(g.points.size(), 0.0);
    return g;
}

CharFuncGrid make_point_set(const std::vector<std::vector<cx>> &points) {
    if (points.empty()) {
        throw Error("validation_error", "empty point set");
    }
    CharFuncGrid g;
    g.num_modes = static_cast<int>(points[0].size());
    g.points = points;
    g.values.assign(points.size(), 0.0);
    g.std_errors.assign(points.size(), 0.0);
    for (const auto &p : points) {
        if (static_cast<int>(p.size()) != g.num_modes) {
            throw Error("validation_error", "point set with mixed mode counts");
        }
    }
    return g;
}

CharFuncGrid plane_grid(const std::string &plane, int n, double extent, int num_modes) {
    auto s = linspace(-extent, extent, n);
    auto two = [&] {
        if (num_modes < 2) {
            throw Error("validation_error", "plane '" + plane + "' needs two modes");
        }
    };
    if (plane == "re-re") {
        two();
        return make_axis_grid(num_modes, {{"Re gamma_A", 0, 1.0, s}, {"Re gamma_B", 1, 1.0, s}});
    }
    if (plane == "im-im") {
        two();
        return make_axis_grid(num_modes, {{"Im gamma_A", 0, kI, s}, {"Im gamma_B", 1, kI, s}});
    }
    if (plane == "re-im") {
        two();
        return make_axis_grid(num_modes, {{"Re gamma_A", 0, 1.0, s}, {"Im gamma_B", 1, kI, s}});
    }
    if (plane == "a" || plane == "b") {
        int m = plane == "a" ? 0 : 1;
        if (m >= num_modes) {
            throw Error("validation_error", "plane '" + plane + "' needs two modes");
        }
        std::string nm = plane == "a" ? "A" : "B";
        return make_axis_grid(num_modes, {{"Re gamma_" + nm, m, 1.0, s}, {"Im gamma_" + nm, m, kI, s}});
    }
    if (plane == "a-re" || plane == "b-re") {
        int m = plane == "a-re" ? 0 : 1;
        if (m >= num_modes) {
            throw Error("validation_error", "plane '" + plane + "' needs two modes");
        }
        return make_axis_grid(num_modes, {{m == 0 ? "Re gamma_A" : "Re gamma_B", m, 1.0, s}});
    }
    throw Error("validation_error", "unknown plane '" + plane + "'");
}

namespace {

// Digits of every block index, per mode.
std::vector<std::vector<int>> block_digits(const HilbertSpace &space) {
    int m = space.mode_block();
    std::vector<std::vector<int>> d(space.num_modes(), std::vector<int>(m));
    for (int k = 0; k < space.num_modes(); ++k) {
        int s = space.stride(k);
        int n = space.mode_dim(k);
        for (int i = 0; i < m; ++i) {
            d[k][i] = (i / s) % n;
        }
    }
    return d;
}

std::vector<CMat> mode_displacements(const HilbertSpace &space, const std::vector<cx> &mu) {
    std::vector<CMat> d(space.num_modes());
    for (int k = 0; k < space.num_modes(); ++k) {
        d[k] = displacement_elements(space.mode_dim(k), mu[k]);
    }
    return d;
}

// Tr[X D(mu)] for a block operand given as a matrix.
cx block_trace(const CMat &x, const HilbertSpace &space, const std::vector<std::vector<int>> &digits,
               const std::vector<cx> &mu) {
    auto d = mode_displacements(space, mu);
    int m = space.mode_block();
    int nm = space.num_modes();
    cx acc = 0.0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            cx f = x(i, j);
            if (f == cx(0.0)) {
                continue;
            }
            for (int k = 0; k < nm && f != cx(0.0); ++k) {
                f *= d[k](digits[k][j], digits[k][i]);
            }
            acc += f;
        }
    }
    return acc;
}

// v^dag D(mu) u for block vectors.
cx block_sandwich(const CVec &v, const CVec &u, const HilbertSpace &space, const std::vector<cx> &mu) {
    CMat w = u;
    for (int k = 0; k < space.num_modes(); ++k) {
        if (mu[k] != cx(0.0)) {
            apply_block_mode_left(w, space, k, displacement_elements(space.mode_dim(k), mu[k]));
        }
    }
    return v.dot(w.col(0));
}

void require_modes(const HilbertSpace &space, std::size_t n) {
    if (static_cast<int>(n) != space.num_modes()) {
        throw Error("dimension_error", "gamma needs one entry per mode");
    }
}

}  // namespace

cx char_func_exact(const State &state, const std::vector<cx> &gamma) {
    const HilbertSpace &space = state.space();
    require_modes(space, gamma.size());
    int m = space.mode_block();
    if (state.is_pure()) {
        const CVec &psi = state.ket();
        CVec g = psi.head(m);
        CVec e = psi.tail(m);
        return block_sandwich(g, g, space, gamma) + block_sandwich(e, e, space, gamma);
    }
    const CMat &rho = state.rho();
    CMat x = rho.topLeftCorner(m, m) + rho.bottomRightCorner(m, m);
    return block_trace(x, space, block_digits(space), gamma);
}

cx char_func_exact(const State &state, cx gamma_a, cx gamma_b) {
    return char_func_exact(state, std::vector<cx>{gamma_a, gamma_b});
}

CharFuncGrid evaluate_exact(const State &state, CharFuncGrid grid, int threads) {
    require_modes(state.space(), static_cast<std::size_t>(grid.num_modes));
    parallel_for(grid.size(), threads, [&](std::size_t i) {
        grid.values[i] = char_func_exact(state, grid.points[i]);
        grid.std_errors[i] = 0.0;
    });
    grid.shots = 0;
    grid.protocol = "exact";
    return grid;
}

MeasureMode parse_measure_mode(const std::string &name) {
    if (name == "ideal") {
        return MeasureMode::Ideal;
    }
    if (name == "pulse_level" || name == "pulse-level" || name == "pulse") {
        return MeasureMode::PulseLevel;
    }
    if (name == "lossy") {
        return MeasureMode::Lossy;
    }
    throw Error("validation_error", "unknown measurement mode '" + name + "'");
}

std::string measure_mode_name(MeasureMode mode) {
    switch (mode) {
        case MeasureMode::Ideal:
            return "ideal";
        case MeasureMode::PulseLevel:
            return "pulse_level";
        case MeasureMode::Lossy:
            return "lossy";
    }
    return "ideal";
}

namespace {

// Heisenberg-picture operations on the coherence X_ge; the tracked quantity is c * Tr[X_label D(mu)].
struct WalkOp {
    enum class Kind { Slice, Damp, Ancilla, Swap, Rotate };
    Kind kind = Kind::Swap;
    std::vector<cx> a_g, a_e;  // Slice: displacement on each branch
    std::vector<double> eta;   // Damp
    double keep = 1.0;         // Ancilla
    std::vector<double> angle; // Rotate: e^{i angle n}
};

struct WalkContext {
    const DeviceParams *device = nullptr;
    int num_modes = 1;
    bool physical = false;
    bool lossy = false;
    double tau_s = 0.0;
    int slices = 8;
};

void push_noise(std::vector<WalkOp> &ops, const WalkContext &ctx, double dt) {
    if (!ctx.lossy || dt <= 0.0) {
        return;
    }
    WalkOp d;
    d.kind = WalkOp::Kind::Damp;
    for (int k = 0; k < ctx.num_modes; ++k) {
        d.eta.push_back(std::exp(-dt / ctx.device->modes[k].t1_s));
    }
    ops.push_back(d);
    WalkOp a;
    a.kind = WalkOp::Kind::Ancilla;
    double p = 1.0 - std::exp(-dt / ctx.device->ancilla_t1_s);
    a.keep = std::sqrt(1.0 - p) * std::exp(-dt * ctx.device->ancilla_dephasing_rate());
    ops.push_back(a);
}

void push_cnod(std::vector<WalkOp> &ops, const WalkContext &ctx, const std::vector<cx> &alpha) {
    int nm = ctx.num_modes;
    std::vector<cx> zero(nm, 0.0);
    auto slice = [&](const std::vector<cx> &ag) {
        WalkOp s;
        s.kind = WalkOp::Kind::Slice;
        s.a_g = ag;
        s.a_e = zero;
        ops.push_back(s);
    };
    WalkOp swap;
    swap.kind = WalkOp::Kind::Swap;
    if (!ctx.physical) {
        std::vector<cx> h(nm), mh(nm);
        for (int k = 0; k < nm; ++k) {
            h[k] = alpha[k] / 2.0;
            mh[k] = -alpha[k] / 2.0;
        }
        slice(h);
        ops.push_back(swap);
        slice(mh);
        return;
    }
    const DeviceParams &dev = *ctx.device;
    int K = std::max(1, ctx.slices);
    double h = ctx.tau_s / K;
    auto ramp = [&](double sign) {
        std::vector<cx> step(nm);
        for (int k = 0; k < nm; ++k) {
            step[k] = sign * dev.drive_scale * alpha[k] / (2.0 * K);
        }
        for (int s = 0; s < K; ++s) {
            push_noise(ops, ctx, 0.5 * h);
            slice(step);
            push_noise(ops, ctx, 0.5 * h);
        }
    };
    ramp(1.0);
    push_noise(ops, ctx, 0.5 * dev.pi_pulse_s);
    ops.push_back(swap);
    push_noise(ops, ctx, 0.5 * dev.pi_pulse_s);
    if (dev.frame_error_rad != 0.0) {
        WalkOp r;
        r.kind = WalkOp::Kind::Rotate;
        r.angle.assign(nm, dev.frame_error_rad);
        ops.push_back(r);
    }
    ramp(-1.0);
}

struct WalkResult {
    cx c = 1.0;
    std::vector<cx> mu;
    bool eg = false;  // final operand is X_eg rather than X_ge
};

WalkResult walk_back(const std::vector<WalkOp> &ops, int nm) {
    WalkResult w;
    w.mu.assign(nm, 0.0);
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        const WalkOp &op = *it;
        switch (op.kind) {
            case WalkOp::Kind::Slice: {
                const auto &ax = w.eg ? op.a_e : op.a_g;
                const auto &ay = w.eg ? op.a_g : op.a_e;
                double ph = 0.0;
                for (int k = 0; k < nm; ++k) {
                    ph += std::imag(-ay[k] * std::conj(w.mu[k])) + std::imag((w.mu[k] - ay[k]) * std::conj(ax[k]));
                    w.mu[k] = w.mu[k] - ay[k] + ax[k];
                }
                w.c *= std::exp(kI * ph);
                break;
            }
            case WalkOp::Kind::Damp:
                for (int k = 0; k < nm; ++k) {
                    w.c *= std::exp(-(1.0 - op.eta[k]) * std::norm(w.mu[k]) / 2.0);
                    w.mu[k] *= std::sqrt(op.eta[k]);
                }
                break;
            case WalkOp::Kind::Ancilla:
                w.c *= op.keep;
                break;
            case WalkOp::Kind::Swap:
                w.eg = !w.eg;
                w.c = -w.c;
                break;
            case WalkOp::Kind::Rotate:
                for (int k = 0; k < nm; ++k) {
                    w.mu[k] *= std::exp(-kI * op.angle[k]);
                }
                break;
        }
    }
    return w;
}

bool grid_is_joint(const CharFuncGrid &grid) {
    if (grid.num_modes != 2) {
        return false;
    }
    for (const auto &p : grid.points) {
        if (p[0] != cx(0.0) && p[1] != cx(0.0)) {
            return true;
        }
    }
    return false;
}

// Ancilla preparation: optional R_x(pi/2) (maps |+i> to |g>), then R_y(pi/2).
GateSequence prep_sequence(bool from_plus_i) {
    GateSequence s;
    if (from_plus_i) {
        s.gates.push_back(Gate::rotation('x', kPi / 2.0));
    }
    s.gates.push_back(Gate::rotation('y', kPi / 2.0));
    return s;
}

double ancilla_sigma_y(const State &state) {
    int m = state.space().mode_block();
    cx ge;
    if (state.is_pure()) {
        ge = state.ket().head(m).dot(state.ket().tail(m));
        ge = std::conj(ge);  // <g|rho|e> = sum g e^*
    } else {
        ge = state.rho().topRightCorner(m, m).trace();
    }
    // sigma_y expectation = 2 Im(rho_eg) = -2 Im(rho_ge).
    return -2.0 * std::imag(ge);
}

}  // namespace

State prepare_state(const State &initial, const GateSequence &seq, const DeviceParams &device, MeasureMode mode) {
    if (mode == MeasureMode::Ideal) {
        return apply_sequence(initial, seq);
    }
    LossOptions lo;
    if (mode == MeasureMode::PulseLevel) {
        lo.mode_loss = false;
        lo.ancilla_noise = false;
        if (initial.is_pure()) {
            // Lossless gate-level model keeps kets pure; run on the density and recover the ket.
            State rho = simulate_sequence_lossy(initial, seq, device, lo);
            Eigen::SelfAdjointEigenSolver<CMat> es(rho.rho());
            int top = static_cast<int>(es.eigenvalues().size()) - 1;
            return State::from_ket(es.eigenvectors().col(top), initial.space());
        }
    }
    return simulate_sequence_lossy(initial, seq, device, lo);
}

CharFuncGrid measure_char_func(const State &state, CharFuncGrid grid, const DeviceParams &device,
                               const MeasureOptions &options) {
    const HilbertSpace &space = state.space();
    require_modes(space, static_cast<std::size_t>(grid.num_modes));
    if (options.shots < 0 || (options.interleave && options.shots % 2 != 0)) {
        throw Error("validation_error", "shots must be non-negative (and even when interleaved)");
    }
    int nm = space.num_modes();
    bool lossy = options.mode == MeasureMode::Lossy;
    if (device.num_modes() != nm && options.mode != MeasureMode::Ideal) {
        throw Error("dimension_error", "device and Hilbert space differ in mode count");
    }

    bool plus_i = options.prep == AncillaPrep::FromPlusI ||
                  (options.prep == AncillaPrep::Auto && ancilla_sigma_y(state) > 0.5);
    GateSequence prep = prep_sequence(plus_i);
    State prepared;
    if (lossy) {
        prepared = simulate_sequence_lossy(state, prep, device);
    } else {
        prepared = apply_sequence(state, prep);
    }

    int m = space.mode_block();
    CVec u_g, u_e;
    CMat x_ge, x_eg;
    std::vector<std::vector<int>> digits;
    if (prepared.is_pure()) {
        u_g = prepared.ket().head(m);
        u_e = prepared.ket().tail(m);
    } else {
        x_ge = prepared.rho().topRightCorner(m, m);
        x_eg = prepared.rho().bottomLeftCorner(m, m);
        digits = block_digits(space);
    }
    auto coherence_cf = [&](bool eg, const std::vector<cx> &mu) -> cx {
        if (prepared.is_pure()) {
            // X_ge = u_g u_e^dag, Tr[X_ge D] = u_e^dag D u_g.
            return eg ? block_sandwich(u_g, u_e, space, mu) : block_sandwich(u_e, u_g, space, mu);
        }
        return block_trace(eg ? x_eg : x_ge, space, digits, mu);
    };

    WalkContext ctx;
    ctx.device = &device;
    ctx.num_modes = nm;
    ctx.physical = options.mode != MeasureMode::Ideal;
    ctx.lossy = lossy;
    ctx.tau_s = options.tau_s > 0.0 ? options.tau_s : 2.0 * device.pulse_tau_s;
    ctx.slices = options.slices_per_pulse;
    bool joint = nm >= 2 && (options.layout == CnodLayout::Sequential ||
                             (options.layout == CnodLayout::Auto && grid_is_joint(grid)));
    double sign_re = joint ? -1.0 : 1.0;

    // Final rotations: O = R^dag sigma_z R; only the off-diagonal element enters.
    double ax_y[3] = {0.0, 1.0, 0.0};
    double ax_x[3] = {1.0, 0.0, 0.0};
    auto o_eg = [](const Eigen::Matrix2cd &r) {
        Eigen::Matrix2cd z = Eigen::Matrix2cd::Zero();
        z(0, 0) = 1.0;
        z(1, 1) = -1.0;
        Eigen::Matrix2cd o = r.adjoint() * z * r;
        return o(1, 0);
    };
    const cx o_settings[4] = {o_eg(ancilla_rotation(ax_y, kPi / 2.0)), o_eg(ancilla_rotation(ax_y, -kPi / 2.0)),
                              o_eg(ancilla_rotation(ax_x, kPi / 2.0)), o_eg(ancilla_rotation(ax_x, -kPi / 2.0))};
    // Ancilla decay during the second half of the final rotation biases towards g.
    double p_final = lossy ? 1.0 - std::exp(-0.5 * device.half_pi_pulse_s / device.ancilla_t1_s) : 0.0;
    double r_err = device.readout_error;

    auto expectations = [&](const std::vector<cx> &gamma, double *expect) {
        std::vector<WalkOp> ops;
        if (joint) {
            std::vector<cx> a(nm, 0.0), b(nm, 0.0);
            a[0] = gamma[0];
            b[1] = -gamma[1];
            push_cnod(ops, ctx, a);
            push_cnod(ops, ctx, b);
        } else {
            push_cnod(ops, ctx, gamma);
        }
        push_noise(ops, ctx, 0.5 * device.half_pi_pulse_s);
        WalkResult w = walk_back(ops, nm);
        cx t_ge = w.c * coherence_cf(w.eg, w.mu);

        for (int s = 0; s < 4; ++s) {
            double mz = 2.0 * std::real(o_settings[s] * t_ge);
            mz = (1.0 - p_final) * mz + p_final;
            expect[s] = (1.0 - 2.0 * r_err) * mz;
        }
    };
    double contrast = 1.0;
    if (lossy && options.normalize_contrast) {
        double e0[4];
        expectations(std::vector<cx>(nm, 0.0), e0);
        contrast = sign_re * 0.5 * (e0[0] - e0[1]);
        if (!(contrast > 1e-3)) {
            throw Error("validation_error", "measurement contrast vanished; cannot normalize");
        }
    }

    parallel_for(grid.size(), options.threads, [&](std::size_t idx) {
        double expect[4];
        expectations(grid.points[idx], expect);
        double meas[4];
        double var[4] = {0.0, 0.0, 0.0, 0.0};
        int n_each = options.interleave ? options.shots / 2 : options.shots;
        if (options.shots > 0) {
            std::mt19937_64 rng(derive_seed(options.seed, idx));
            for (int s = 0; s < 4; ++s) {
                if (!options.interleave && s % 2 == 1) {
                    meas[s] = 0.0;
                    continue;
                }
                double p = std::clamp(0.5 * (1.0 + expect[s]), 0.0, 1.0);
                std::binomial_distribution<int> bin(n_each, p);
                double mhat = 2.0 * bin(rng) / n_each - 1.0;
                meas[s] = mhat;
                var[s] = std::max(0.0, 1.0 - mhat * mhat) / n_each;
            }
        } else {
            for (int s = 0; s < 4; ++s) {
                meas[s] = expect[s];
            }
        }
        double re, im, se_re, se_im;
        if (options.interleave) {
            re = sign_re * 0.5 * (meas[0] - meas[1]);
            im = -0.5 * (meas[2] - meas[3]);
            se_re = 0.5 * std::sqrt(var[0] + var[1]);
            se_im = 0.5 * std::sqrt(var[2] + var[3]);
        } else {
            re = sign_re * meas[0];
            im = -meas[2];
            se_re = std::sqrt(var[0]);
            se_im = std::sqrt(var[2]);
        }
        grid.values[idx] = cx(re, im) / contrast;
        grid.std_errors[idx] = std::max(se_re, se_im) / contrast;
    });
    grid.contrast = contrast;
    grid.shots = options.shots;
    grid.seed = options.seed;
    grid.protocol = measure_mode_name(options.mode) + (joint ? "_sequential" : "_single");
    grid.config_hash = config_hash(device);
    return grid;
}

CharFuncGrid measure_char_func(const State &initial, const GateSequence &seq, CharFuncGrid grid,
                               const DeviceParams &device, const MeasureOptions &options) {
    State s = prepare_state(initial, seq, device, options.mode);
    return measure_char_func(s, std::move(grid), device, options);
}

PhaseFunction tomography_phase_correction(const DeviceParams &device, const MeasureOptions &options, bool joint) {
    WalkContext phys;
    phys.device = &device;
    phys.num_modes = device.num_modes();
    phys.physical = options.mode != MeasureMode::Ideal;
    phys.tau_s = options.tau_s > 0.0 ? options.tau_s : 2.0 * device.pulse_tau_s;
    phys.slices = options.slices_per_pulse;
    WalkContext ideal = phys;
    ideal.physical = false;
    return [phys, ideal, joint, dev = device](const std::vector<cx> &gamma) {
        int nm = static_cast<int>(gamma.size());
        WalkContext p = phys, q = ideal;
        p.device = q.device = &dev;
        p.num_modes = q.num_modes = nm;
        auto walk = [&](const WalkContext &ctx) {
            std::vector<WalkOp> ops;
            if (joint && nm >= 2) {
                std::vector<cx> a(nm, 0.0), b(nm, 0.0);
                a[0] = gamma[0];
                b[1] = -gamma[1];
                push_cnod(ops, ctx, a);
                push_cnod(ops, ctx, b);
            } else {
                push_cnod(ops, ctx, gamma);
            }
            return walk_back(ops, nm).c;
        };
        double delta = std::arg(walk(p) / walk(q));
        // The single-CNOD estimator conjugates the coherence.
        return joint && nm >= 2 ? delta : -delta;
    };
}

CharFuncGrid postprocess(const CharFuncGrid &grid, const PhaseFunction &phase, const std::vector<double> &shift) {
    bool has_shift = std::any_of(shift.begin(), shift.end(), [](double s) { return s != 0.0; });
    if ((phase && grid.phase_corrected) || (has_shift && grid.shift_corrected)) {
        throw Error("validation_error", "correction already applied to this dataset");
    }
    if (has_shift && static_cast<int>(shift.size()) != grid.num_modes) {
        throw Error("dimension_error", "shift needs one entry per mode");
    }
    CharFuncGrid out = grid;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (phase) {
            out.values[i] *= std::exp(-kI * phase(grid.points[i]));
        }
        if (has_shift) {
            for (int k = 0; k < out.num_modes; ++k) {
                out.points[i][k] -= shift[k];
            }
        }
    }
    if (has_shift) {
        for (auto &a : out.axes) {
            double proj = std::real(std::conj(a.direction) * shift[a.mode]);
            for (auto &s : a.samples) {
                s -= proj;
            }
        }
        out.shift = shift;
        out.shift_corrected = true;
    }
    if (phase) {
        out.phase_corrected = true;
    }
    return out;
}

namespace {

cx coherent_overlap(cx x, cx z) {
    return std::exp(-std::norm(x) / 2.0 - std::norm(z) / 2.0 + std::conj(x) * z);
}

// <x|D(mu)|y>.
cx displaced_element(cx x, cx mu, cx y) {
    return std::exp(kI * std::imag(mu * std::conj(y))) * coherent_overlap(x, y + mu);
}

using Superposition = std::vector<std::pair<cx, cx>>;  // (weight, coherent amplitude)

cx sandwich(const Superposition &a, cx mu, const Superposition &b) {
    cx acc = 0.0;
    for (const auto &[wa, xa] : a) {
        for (const auto &[wb, xb] : b) {
            acc += std::conj(wa) * wb * displaced_element(xa, mu, xb);
        }
    }
    return acc;
}

}  // namespace

ShiftModel disentanglement_shift_model(double alpha, double beta, cx gamma) {
    if (std::abs(alpha * beta - kPi / 2.0) > 1e-9) {
        throw Error("validation_error", "disentangling model requires alpha * beta = pi / 2");
    }
    // Branches after R_n(-pi/2) -> CNOD(alpha) -> R_y(pi/2) -> CNOD(i beta), then the
    // R_x(pi/2) / R_y(pi/2) -> CNOD(gamma) -> R_y(pi/2) measurement.
    double a = alpha / 2.0;
    double b = beta / 2.0;
    double theta = -kPi / 2.0;
    cx c = std::cos(theta / 2.0) / std::sqrt(2.0);
    cx sn = kI * std::sin(theta / 2.0) / std::sqrt(2.0);
    cx ph = std::exp(-kI * (alpha * beta / 2.0));
    Superposition g = {{c * ph, cx(a, -b)}, {sn, cx(-a, -b)}};
    Superposition e = {{c, cx(a, b)}, {-sn * ph, cx(-a, b)}};
    Superposition diff = g, sum = g;
    for (const auto &[w, x] : e) {
        diff.push_back({-w, x});
        sum.push_back({w, x});
    }
    ShiftModel out;
    out.imperfect = std::imag(sandwich(diff, -gamma, sum));
    double n = std::exp(-alpha * alpha / 2.0);
    cx ga = gamma * alpha;
    out.exact = std::exp(-std::norm(gamma) / 2.0) * (std::cos(std::imag(ga)) + n * std::cosh(std::real(ga))) / (1.0 + n);
    out.difference = out.imperfect - out.exact;
    return out;
}

double predicted_shift(double alpha, double beta) {
    // Golden-section search for the real-axis maximum of the imperfect signal.
    double lo = -1.5 * beta - 0.5, hi = 1.5 * beta + 0.5;
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    auto f = [&](double x) { return -disentanglement_shift_model(alpha, beta, x).imperfect; };
    double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    while (hi - lo > 1e-10) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    return 0.5 * (lo + hi);
}

void write_dataset_csv(const CharFuncGrid &grid, const std::string &path, const std::vector<std::string> &meta) {
    std::ofstream f(path);
    if (!f) {
        throw Error("io_error", "cannot write '" + path + "'");
    }
    f << "# seed=" << grid.seed << "\n";
    f << "# shots=" << grid.shots << "\n";
    f << "# protocol=" << grid.protocol << "\n";
    f << "# modes=" << grid.num_modes << "\n";
    if (!grid.config_hash.empty()) {
        f << "# config_hash=" << grid.config_hash << "\n";
    }
    f << "# contrast=" << format_double(grid.contrast) << "\n";
    f << "# phase_corrected=" << (grid.phase_corrected ? 1 : 0) << "\n";
    f << "# shift_corrected=" << (grid.shift_corrected ? 1 : 0) << "\n";
    for (const auto &a : grid.axes) {
        f << "# axis=" << a.label << "|" << a.mode << "|" << format_complex(a.direction) << "|"
          << format_double(a.samples.front()) << "|" << format_double(a.samples.back()) << "|" << a.samples.size()
          << "\n";
    }
    for (const auto &m : meta) {
        f << "# " << m << "\n";
    }
    f << "re_gamma_A,im_gamma_A,re_gamma_B,im_gamma_B,re_value,im_value,std_error\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        cx a = grid.points[i][0];
        cx b = grid.num_modes > 1 ? grid.points[i][1] : cx(0.0);
        f << format_double(a.real()) << "," << format_double(a.imag()) << "," << format_double(b.real()) << ","
          << format_double(b.imag()) << "," << format_double(grid.values[i].real()) << ","
          << format_double(grid.values[i].imag()) << "," << format_double(grid.std_errors[i]) << "\n";
    }
    if (!f) {
        throw Error("io_error", "failed writing '" + path + "'");
    }
}

CharFuncGrid read_dataset_csv(const std::string &path) {
    std::ifstream f(path);
    if (!f) {
        throw Error("io_error", "cannot read '" + path + "'");
    }
    CharFuncGrid g;
    g.num_modes = 2;
    std::string line;
    bool header = false;
    while (std::getline(f, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            std::string body = line.substr(line.find_first_not_of("# "));
            auto eq = body.find('=');
            if (eq == std::string::npos) {
                continue;
            }
            std::string key = body.substr(0, eq), val = body.substr(eq + 1);
            try {
                if (key == "seed") {
                    g.seed = std::stoull(val);
                } else if (key == "shots") {
                    g.shots = std::stoi(val);
                } else if (key == "protocol") {
                    g.protocol = val;
                } else if (key == "modes") {
                    g.num_modes = std::stoi(val);
                } else if (key == "config_hash") {
                    g.config_hash = val;
                } else if (key == "contrast") {
                    g.contrast = std::stod(val);
                } else if (key == "phase_corrected") {
                    g.phase_corrected = val == "1";
                } else if (key == "shift_corrected") {
                    g.shift_corrected = val == "1";
                } else if (key == "axis") {
                    std::vector<std::string> parts;
                    std::stringstream ss(val);
                    std::string p;
                    while (std::getline(ss, p, '|')) {
                        parts.push_back(p);
                    }
                    if (parts.size() != 6) {
                        throw Error("parse_error", "bad axis line in '" + path + "'");
                    }
                    GridAxis a;
                    a.label = parts[0];
                    a.mode = std::stoi(parts[1]);
                    a.direction = parse_complex(parts[2]);
                    a.samples = linspace(std::stod(parts[3]), std::stod(parts[4]), std::stoi(parts[5]));
                    g.axes.push_back(a);
                }
            } catch (const std::logic_error &) {
                throw Error("parse_error", "bad header '" + line + "' in '" + path + "'");
            }
            continue;
        }
        if (!header) {
            if (line.rfind("re_gamma_A", 0) != 0) {
                throw Error("parse_error", "missing column header in '" + path + "'");
            }
            header = true;
            continue;
        }
        std::vector<double> v;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                v.push_back(std::stod(cell));
            } catch (const std::logic_error &) {
                throw Error("parse_error", "bad number '" + cell + "' in '" + path + "'");
            }
        }
        if (v.size() != 7) {
            throw Error("parse_error", "expected 7 columns in '" + path + "'");
        }
        std::vector<cx> p = {cx(v[0], v[1])};
        if (g.num_modes > 1) {
            p.push_back(cx(v[2], v[3]));
        }
        g.points.push_back(p);
        g.values.push_back(cx(v[4], v[5]));
        g.std_errors.push_back(v[6]);
    }
    if (!header) {
        throw Error("parse_error", "no data in '" + path + "'");
    }
    std::size_t expect = 1;
    for (const auto &a : g.axes) {
        expect *= a.samples.size();
    }
    if (!g.axes.empty() && expect != g.points.size()) {
        g.axes.clear();
    }
    return g;
}

}  // namespace cnod
