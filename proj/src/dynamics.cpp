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

#include "cnod/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "cnod/kernels.hpp"

namespace cnod {

HamiltonianLevel parse_hamiltonian_level(const std::string &name) {
    if (name == "dispersive1") {
        return HamiltonianLevel::Dispersive1;
    }
    if (name == "dispersive2") {
        return HamiltonianLevel::Dispersive2;
    }
    if (name == "full") {
        return HamiltonianLevel::Full;
    }
    throw Error("validation_error", "unknown hamiltonian level '" + name + "'");
}

std::string hamiltonian_level_name(HamiltonianLevel level) {
    switch (level) {
        case HamiltonianLevel::Dispersive1:
            return "dispersive1";
        case HamiltonianLevel::Dispersive2:
            return "dispersive2";
        case HamiltonianLevel::Full:
            return "full";
    }
    return "full";
}

namespace {

bool chi_applies(HamiltonianLevel level, int mode) {
    return level != HamiltonianLevel::Dispersive1 || mode == 0;
}

// Branch frequency of mode k (rad/s) in the rotating frame.
double branch_omega(const DeviceParams &device, HamiltonianLevel level, int branch, int k) {
    double w = kTwoPi * device.modes[k].detuning_hz;
    if (branch == 1 && chi_applies(level, k)) {
        w -= device.chi_angular(k);
    }
    return w;
}

void require_matching(const DeviceParams &device, const HilbertSpace &space) {
    if (device.num_modes() != space.num_modes()) {
        throw Error("dimension_error", "space and device mode counts differ");
    }
}

// Fock digit of mode k for every index of an ancilla block.
std::vector<int> block_digits(const HilbertSpace &space, int k) {
    std::vector<int> d(space.mode_block());
    int n = space.mode_dim(k), s = space.stride(k);
    for (int i = 0; i < space.mode_block(); ++i) {
        d[i] = (i / s) % n;
    }
    return d;
}

}  // namespace

Operator build_drift_hamiltonian(const DeviceParams &device, const HilbertSpace &space, HamiltonianLevel level) {
    require_matching(device, space);
    int m = space.mode_block();
    int nm = space.num_modes();
    std::vector<std::vector<int>> digits(nm);
    for (int k = 0; k < nm; ++k) {
        digits[k] = block_digits(space, k);
    }
    CMat h = CMat::Zero(space.dim(), space.dim());
    for (int anc = 0; anc < 2; ++anc) {
        for (int i = 0; i < m; ++i) {
            double e = 0.0;
            for (int k = 0; k < nm; ++k) {
                double n = digits[k][i];
                e += branch_omega(device, level, anc, k) * n;
                if (level == HamiltonianLevel::Full) {
                    e -= 0.5 * device.kerr_angular(k, k) * n * (n - 1.0);
                    for (int j = k + 1; j < nm; ++j) {
                        e -= device.kerr_angular(k, j) * n * digits[j][i];
                    }
                }
            }
            h(anc * m + i, anc * m + i) = e;
        }
    }
    return {h, space};
}

cx DriveTerm::value(double t) const {
    double local = t - start_s;
    if (local < 0.0 || local >= envelope.duration()) {
        return 0.0;
    }
    return envelope.drive_at(local) * std::exp(-kI * (kTwoPi * frame_detuning_hz * t));
}

std::vector<CollapseOp> standard_collapse_ops(const DeviceParams &device, const HilbertSpace &space, bool mode_loss,
                                              bool ancilla_noise) {
    require_matching(device, space);
    std::vector<CollapseOp> out;
    if (mode_loss) {
        for (int k = 0; k < space.num_modes(); ++k) {
            out.push_back({annihilation(space, k), 1.0 / device.modes[k].t1_s});
        }
    }
    if (ancilla_noise) {
        out.push_back({sigma_minus(space), 1.0 / device.ancilla_t1_s});
        double gphi = device.ancilla_dephasing_rate();
        if (gphi > 0.0) {
            out.push_back({sigma_z(space), gphi / 2.0});
        }
    }
    return out;
}

void EvolutionConfig::validate() const {
    if (!(dt_s > 0.0)) {
        throw Error("validation_error", "dt must be positive");
    }
    if (method_order != 2 && method_order != 4) {
        throw Error("validation_error", "method_order must be 2 or 4");
    }
}

namespace {

int step_count(double T, double dt) {
    double r = T / dt;
    long n = std::lround(r);
    if (n < 0 || std::abs(r - static_cast<double>(n)) > 1e-6) {
        throw Error("validation_error", "evolution time must be a multiple of dt");
    }
    return static_cast<int>(n);
}

CMat hamiltonian_at(const Operator &drift, const std::vector<DriveTerm> &drives, double t) {
    CMat h = drift.matrix;
    for (const auto &d : drives) {
        cx e = d.value(t);
        if (e != cx(0.0)) {
            CMat a = d.op.matrix * std::conj(e);
            h += a + a.adjoint();
        }
    }
    return h;
}

CMat lindblad_dissipator(const CMat &rho, const std::vector<CMat> &jumps, const std::vector<CMat> &jdj) {
    CMat out = CMat::Zero(rho.rows(), rho.cols());
    for (std::size_t i = 0; i < jumps.size(); ++i) {
        out += jumps[i] * rho * jumps[i].adjoint();
        out -= 0.5 * (jdj[i] * rho + rho * jdj[i]);
    }
    return out;
}

// Integrates the dissipator alone over dt with classical RK4 substeps.
void dissipate(CMat &rho, const std::vector<CMat> &jumps, const std::vector<CMat> &jdj, double dt, double max_rate) {
    if (jumps.empty() || dt <= 0.0) {
        return;
    }
    int sub = std::max(1, static_cast<int>(std::ceil(dt * max_rate / 0.05)));
    double h = dt / sub;
    for (int s = 0; s < sub; ++s) {
        CMat k1 = lindblad_dissipator(rho, jumps, jdj);
        CMat k2 = lindblad_dissipator(rho + 0.5 * h * k1, jumps, jdj);
        CMat k3 = lindblad_dissipator(rho + 0.5 * h * k2, jumps, jdj);
        CMat k4 = lindblad_dissipator(rho + h * k3, jumps, jdj);
        rho += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    rho = 0.5 * (rho + rho.adjoint());
}

// One step of the unitary part: returns exp(-i H_eff dt) applied to x.
CMat unitary_step(const CMat &x, const Operator &drift, const std::vector<DriveTerm> &drives, double t, double dt,
                  int order) {
    if (order == 2) {
        return expm_multiply(-kI * dt * hamiltonian_at(drift, drives, t + 0.5 * dt), x);
    }
    // Fourth-order commutator-free Magnus with two Gauss points.
    const double c = std::sqrt(3.0) / 6.0;
    const double a1 = (3.0 - 2.0 * std::sqrt(3.0)) / 12.0;
    const double a2 = (3.0 + 2.0 * std::sqrt(3.0)) / 12.0;
    CMat h1 = hamiltonian_at(drift, drives, t + (0.5 - c) * dt);
    CMat h2 = hamiltonian_at(drift, drives, t + (0.5 + c) * dt);
    CMat y = expm_multiply(-kI * dt * (a2 * h1 + a1 * h2), x);
    return expm_multiply(-kI * dt * (a1 * h1 + a2 * h2), y);
}

CMat propagate_columns_raw(const CMat &kets, const Operator &drift, const std::vector<DriveTerm> &drives,
                           const EvolutionConfig &config, double T, double t0) {
    int steps = step_count(T, config.dt_s);
    CMat x = kets;
    if (drives.empty()) {
        // Time-independent generator: one exponential of the whole interval.
        return steps == 0 ? x : expm_multiply(-kI * T * drift.matrix, x);
    }
    for (int s = 0; s < steps; ++s) {
        x = unitary_step(x, drift, drives, t0 + s * config.dt_s, config.dt_s, config.method_order);
    }
    return x;
}

CMat propagate_density_raw(const CMat &rho0, const Operator &drift, const std::vector<DriveTerm> &drives,
                           const std::vector<CollapseOp> &collapse, const EvolutionConfig &config, double T,
                           double t0) {
    int steps = step_count(T, config.dt_s);
    std::vector<CMat> jumps, jdj;
    double max_rate = 0.0;
    for (const auto &c : collapse) {
        if (c.rate < 0.0) {
            throw Error("validation_error", "collapse rate must be non-negative");
        }
        if (c.rate == 0.0) {
            continue;
        }
        jumps.push_back(std::sqrt(c.rate) * c.op.matrix);
        jdj.push_back(jumps.back().adjoint() * jumps.back());
        max_rate = std::max(max_rate, c.rate * std::max(1.0, max_abs(jdj.back()) / c.rate));
    }
    CMat rho = rho0;
    double dt = config.dt_s;
    for (int s = 0; s < steps; ++s) {
        // Strang splitting: half dissipator, unitary, half dissipator.
        dissipate(rho, jumps, jdj, 0.5 * dt, max_rate);
        CMat u_rho = unitary_step(rho, drift, drives, t0 + s * dt, dt, config.method_order);
        CMat t = unitary_step(CMat(u_rho.adjoint()), drift, drives, t0 + s * dt, dt, config.method_order);
        rho = t.adjoint();
        dissipate(rho, jumps, jdj, 0.5 * dt, max_rate);
    }
    return 0.5 * (rho + rho.adjoint());
}

double column_infidelity(const CMat &a, const CMat &b) {
    double worst = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        double na = a.col(c).squaredNorm(), nb = b.col(c).squaredNorm();
        if (na <= 0.0 || nb <= 0.0) {
            continue;
        }
        worst = std::max(worst, 1.0 - std::norm(a.col(c).dot(b.col(c))) / (na * nb));
    }
    return worst;
}

void check_spaces(const HilbertSpace &space, const Operator &drift, const std::vector<DriveTerm> &drives,
                  const std::vector<CollapseOp> &collapse) {
    if (drift.space != space) {
        throw Error("dimension_error", "drift Hamiltonian lives on a different space");
    }
    for (const auto &d : drives) {
        if (d.op.space != space) {
            throw Error("dimension_error", "drive operator lives on a different space");
        }
    }
    for (const auto &c : collapse) {
        if (c.op.space != space) {
            throw Error("dimension_error", "collapse operator lives on a different space");
        }
    }
}

void warn_truncation(const State &s, double threshold) {
    double p = top_fock_population(s);
    if (p > threshold) {
        warn("truncation: top-two Fock population " + format_double(p) + " exceeds " + format_double(threshold));
    }
}

}  // namespace

CMat propagate_columns(const CMat &kets, const HilbertSpace &space, const Operator &drift,
                       const std::vector<DriveTerm> &drives, const EvolutionConfig &config, double T, double t0) {
    config.validate();
    check_spaces(space, drift, drives, {});
    if (kets.rows() != space.dim()) {
        throw Error("dimension_error", "kets do not match space");
    }
    CMat out = propagate_columns_raw(kets, drift, drives, config, T, t0);
    if (config.check_convergence) {
        EvolutionConfig fine = config;
        fine.dt_s /= 2.0;
        CMat ref = propagate_columns_raw(kets, drift, drives, fine, T, t0);
        double change = column_infidelity(out, ref);
        if (change > config.convergence_tol) {
            throw Error("convergence_error", "step halving changed the fidelity by " + format_double(change));
        }
        out = ref;
    }
    return out;
}

State propagate(const State &state, const Operator &drift, const std::vector<DriveTerm> &drives,
                const std::vector<CollapseOp> &collapse, const EvolutionConfig &config, double T, double t0) {
    config.validate();
    const HilbertSpace &space = state.space();
    check_spaces(space, drift, drives, collapse);
    bool open = config.lindblad && !collapse.empty();
    State out;
    if (state.is_pure() && !open) {
        CMat x = propagate_columns(CMat(state.ket()), space, drift, drives, config, T, t0);
        out = State::from_ket(x.col(0), space);
    } else {
        const std::vector<CollapseOp> none;
        const auto &ops = config.lindblad ? collapse : none;
        CMat rho0 = state.density();
        CMat rho = propagate_density_raw(rho0, drift, drives, ops, config, T, t0);
        if (config.check_convergence) {
            EvolutionConfig fine = config;
            fine.dt_s /= 2.0;
            CMat ref = propagate_density_raw(rho0, drift, drives, ops, fine, T, t0);
            double change = std::abs(1.0 - density_fidelity(rho, ref));
            if (change > config.convergence_tol) {
                throw Error("convergence_error", "step halving changed the fidelity by " + format_double(change));
            }
            rho = ref;
        }
        out = State::from_density(rho, space);
    }
    warn_truncation(out, config.truncation_threshold);
    return out;
}

double top_fock_population(const State &state) {
    const HilbertSpace &space = state.space();
    int m = space.mode_block();
    RVec pop(space.dim());
    if (state.is_pure()) {
        pop = state.ket().cwiseAbs2();
    } else {
        pop = state.rho().diagonal().real();
    }
    double worst = 0.0;
    for (int k = 0; k < space.num_modes(); ++k) {
        int n = space.mode_dim(k);
        std::vector<int> d = block_digits(space, k);
        double p = 0.0;
        for (int anc = 0; anc < 2; ++anc) {
            for (int i = 0; i < m; ++i) {
                if (d[i] >= n - 2) {
                    p += pop(anc * m + i);
                }
            }
        }
        worst = std::max(worst, p);
    }
    return worst;
}

double average_gate_fidelity(const CMat &ideal, const CMat &actual) {
    if (ideal.rows() != actual.rows() || ideal.cols() != actual.cols()) {
        throw Error("dimension_error", "process images differ in shape");
    }
    CMat mm = ideal.adjoint() * actual;
    double d = static_cast<double>(mm.rows());
    return (std::real((mm * mm.adjoint()).trace()) + std::norm(mm.trace())) / (d * (d + 1.0));
}

namespace {

// ---- displaced-branch CNOD simulation ----

struct BranchState {
    CMat phi;  // mode-block state in the branch's displaced frame
    std::vector<cx> alpha;
    cx amp = 1.0;
};

struct FrameContext {
    const DeviceParams &device;
    const HilbertSpace &space;
    HamiltonianLevel level;
    int substeps;
    std::vector<std::vector<int>> digits;
    std::vector<CMat> a;  // single-mode annihilation operators
};

// Single-mode pieces of the displaced-frame Kerr Hamiltonian.
void displaced_mode_ops(const FrameContext &ctx, int k, cx alpha, double omega, CMat &single, CMat &number) {
    int n = ctx.space.mode_dim(k);
    CMat A = ctx.a[k] + alpha * CMat::Identity(n, n);
    CMat Ad = A.adjoint();
    number = Ad * A;
    single = omega * mode_number(n) - 0.5 * ctx.device.kerr_angular(k, k) * (Ad * Ad * A * A);
}

// exp(-i h H') phi for the full-level displaced-frame Hamiltonian at the given displacements.
CMat kerr_step(const FrameContext &ctx, int branch, const std::vector<cx> &alpha, const CMat &phi, double h) {
    int nm = ctx.space.num_modes();
    std::vector<CMat> single(nm), number(nm);
    double bound = 0.0;
    std::vector<double> nnorm(nm);
    for (int k = 0; k < nm; ++k) {
        displaced_mode_ops(ctx, k, alpha[k], branch_omega(ctx.device, ctx.level, branch, k), single[k], number[k]);
        bound += single[k].cwiseAbs().colwise().sum().maxCoeff();
        nnorm[k] = number[k].cwiseAbs().colwise().sum().maxCoeff();
    }
    for (int j = 0; j < nm; ++j) {
        for (int k = j + 1; k < nm; ++k) {
            bound += ctx.device.kerr_angular(j, k) * nnorm[j] * nnorm[k];
        }
    }
    auto apply_h = [&](const CMat &x) {
        CMat out = CMat::Zero(x.rows(), x.cols());
        for (int k = 0; k < nm; ++k) {
            CMat y = x;
            apply_block_mode_left(y, ctx.space, k, single[k]);
            out += y;
        }
        for (int j = 0; j < nm; ++j) {
            for (int k = j + 1; k < nm; ++k) {
                CMat y = x;
                apply_block_mode_left(y, ctx.space, j, number[j]);
                apply_block_mode_left(y, ctx.space, k, number[k]);
                out -= ctx.device.kerr_angular(j, k) * y;
            }
        }
        return out;
    };
    double scale = h * bound;
    int pieces = std::max(1, static_cast<int>(std::ceil(scale / 0.5)));
    double hp = h / pieces;
    CMat x = phi;
    for (int p = 0; p < pieces; ++p) {
        CMat term = x, acc = x;
        double base = std::max(acc.norm(), 1e-300);
        for (int q = 1; q < 40; ++q) {
            term = (-kI * hp / static_cast<double>(q)) * apply_h(term);
            acc += term;
            if (term.norm() < 1e-15 * base) {
                break;
            }
        }
        x = acc;
    }
    return x;
}

void rotate_block(CMat &phi, const FrameContext &ctx, int k, cx phase_per_photon) {
    int n = ctx.space.mode_dim(k);
    CMat r = CMat::Zero(n, n);
    for (int q = 0; q < n; ++q) {
        r(q, q) = std::pow(phase_per_photon, q);
    }
    apply_block_mode_left(phi, ctx.space, k, r);
}

void run_pulses(BranchState br[2], const std::vector<PulseShape> &pulses, const FrameContext &ctx) {
    int nm = ctx.space.num_modes();
    std::vector<PulseShape> p(nm);
    for (int k = 0; k < nm; ++k) {
        p[k] = pulses[k].scaled(ctx.device.drive_scale);
    }
    std::size_t ns = p[0].samples.size();
    double dt = p[0].dt;
    for (int k = 1; k < nm; ++k) {
        if (p[k].samples.size() != ns || std::abs(p[k].dt - dt) > 1e-18) {
            throw Error("validation_error", "simultaneous CNOD pulses must share sampling");
        }
    }
    bool kerr = ctx.level == HamiltonianLevel::Full;
    for (int b = 0; b < 2; ++b) {
        BranchState &s = br[b];
        std::vector<double> omega(nm);
        for (int k = 0; k < nm; ++k) {
            omega[k] = branch_omega(ctx.device, ctx.level, b, k);
        }
        for (std::size_t i = 0; i < ns; ++i) {
            if (kerr) {
                double h = dt / ctx.substeps;
                for (int j = 0; j < ctx.substeps; ++j) {
                    std::vector<cx> mid(nm);
                    for (int k = 0; k < nm; ++k) {
                        mid[k] = branch_partial(s.alpha[k], p[k], i, omega[k], (j + 0.5) * h);
                    }
                    s.phi = kerr_step(ctx, b, mid, s.phi, h);
                }
            }
            for (int k = 0; k < nm; ++k) {
                s.amp *= std::exp(-kI * branch_energy(s.alpha[k], p[k], i, omega[k]));
                s.alpha[k] = branch_step(s.alpha[k], p[k], i, omega[k]);
            }
        }
        if (!kerr) {
            // Quadratic displaced-frame Hamiltonian: exact number-dependent phases.
            double T = dt * static_cast<double>(ns);
            for (int k = 0; k < nm; ++k) {
                rotate_block(s.phi, ctx, k, std::exp(-kI * (omega[k] * T)));
            }
        }
    }
}

struct DisplacedRun {
    CMat out;
    std::vector<cx> end_g, end_e;
};

DisplacedRun run_displaced(const DeviceParams &device, const HilbertSpace &space, const CMat &input,
                           const CnodPulsePlan &plan, HamiltonianLevel level, int substeps) {
    int nm = space.num_modes();
    int m = space.mode_block();
    FrameContext ctx{device, space, level, std::max(1, substeps), {}, {}};
    for (int k = 0; k < nm; ++k) {
        ctx.a.push_back(mode_annihilation(space.mode_dim(k)));
    }
    BranchState br[2];
    br[0].phi = input.topRows(m);
    br[1].phi = input.bottomRows(m);
    for (auto &b : br) {
        b.alpha.assign(nm, 0.0);
    }
    // Label bookkeeping: which initial ancilla state each branch slot holds.
    int origin[2] = {0, 1};
    run_pulses(br, plan.first, ctx);
    // Instantaneous R_y(pi): |g> -> |e>, |e> -> -|g>.
    std::swap(br[0], br[1]);
    std::swap(origin[0], origin[1]);
    br[0].amp = -br[0].amp;
    for (auto &b : br) {
        for (int k = 0; k < nm; ++k) {
            cx ph = std::exp(kI * plan.frame_angle[k]);
            b.alpha[k] *= ph;
            rotate_block(b.phi, ctx, k, ph);
        }
    }
    run_pulses(br, plan.second, ctx);
    DisplacedRun r;
    r.out = CMat(2 * m, input.cols());
    for (int b = 0; b < 2; ++b) {
        CMat x = br[b].phi;
        for (int k = 0; k < nm; ++k) {
            apply_block_mode_left(x, space, k, displacement_elements(space.mode_dim(k), br[b].alpha[k]));
        }
        r.out.middleRows(b * m, m) = br[b].amp * x;
    }
    r.end_g = br[origin[0] == 0 ? 0 : 1].alpha;
    r.end_e = br[origin[0] == 0 ? 1 : 0].alpha;
    return r;
}

CnodPulsePlan resolve_plan(const DeviceParams &device, const std::vector<cx> &alpha, const CnodSimConfig &config) {
    if (config.plan) {
        return *config.plan;
    }
    double tau = config.tau_s > 0.0 ? config.tau_s : device.pulse_tau_s;
    return plan_cnod_pulses(device, alpha, tau, config.pulse);
}

std::vector<int> subspace_basis(const HilbertSpace &space, int cutoff) {
    std::vector<int> basis;
    int m = space.mode_block();
    int nm = space.num_modes();
    std::vector<std::vector<int>> digits(nm);
    for (int k = 0; k < nm; ++k) {
        digits[k] = block_digits(space, k);
    }
    for (int anc = 0; anc < 2; ++anc) {
        for (int i = 0; i < m; ++i) {
            bool ok = true;
            for (int k = 0; k < nm; ++k) {
                ok = ok && digits[k][i] < cutoff;
            }
            if (ok) {
                basis.push_back(anc * m + i);
            }
        }
    }
    return basis;
}

void finish_process(CnodProcess &p, const HilbertSpace &space, const std::vector<cx> &alpha, double floor) {
    int m = space.mode_block();
    CMat in = CMat::Zero(space.dim(), p.basis.size());
    for (std::size_t c = 0; c < p.basis.size(); ++c) {
        in(p.basis[c], c) = 1.0;
    }
    p.ideal = in;
    apply_cnod_left(p.ideal, space, alpha);
    p.average_gate_fidelity = average_gate_fidelity(p.ideal, p.outputs);
    cx tg = (p.ideal.topRows(m).adjoint() * p.outputs.topRows(m)).trace();
    cx te = (p.ideal.bottomRows(m).adjoint() * p.outputs.bottomRows(m)).trace();
    p.z_phase = std::arg(tg) - std::arg(te);
    CMat z = p.outputs;
    z.topRows(m) *= std::exp(-kI * (p.z_phase / 2.0));
    z.bottomRows(m) *= std::exp(kI * (p.z_phase / 2.0));
    p.z_corrected_fidelity = average_gate_fidelity(p.ideal, z);
    p.leakage = 0.0;
    for (Eigen::Index c = 0; c < p.outputs.cols(); ++c) {
        p.leakage = std::max(p.leakage, 1.0 - p.outputs.col(c).squaredNorm());
    }
    if (p.average_gate_fidelity < floor) {
        throw Error("fidelity_error", "CNOD gate fidelity " + format_double(p.average_gate_fidelity) +
                                          " below floor " + format_double(floor));
    }
}

}  // namespace

CnodProcess simulate_cnod(const DeviceParams &device, const HilbertSpace &space, const std::vector<cx> &alpha,
                          const CnodSimConfig &config) {
    require_matching(device, space);
    if (static_cast<int>(alpha.size()) != space.num_modes()) {
        throw Error("dimension_error", "CNOD needs one amplitude per mode");
    }
    CnodPulsePlan plan = resolve_plan(device, alpha, config);
    CnodProcess p;
    p.basis = subspace_basis(space, config.fock_cutoff);
    CMat in = CMat::Zero(space.dim(), p.basis.size());
    for (std::size_t c = 0; c < p.basis.size(); ++c) {
        in(p.basis[c], c) = 1.0;
    }
    DisplacedRun r = run_displaced(device, space, in, plan, config.level, config.substeps);
    if (config.check_convergence) {
        DisplacedRun fine = run_displaced(device, space, in, plan, config.level, 2 * std::max(1, config.substeps));
        double change = column_infidelity(r.out, fine.out);
        if (change > config.convergence_tol) {
            throw Error("convergence_error", "step halving changed the fidelity by " + format_double(change));
        }
        r = fine;
    }
    p.outputs = r.out;
    p.end_alpha_g = r.end_g;
    p.end_alpha_e = r.end_e;
    finish_process(p, space, alpha, config.fidelity_floor);
    return p;
}

State simulate_cnod_state(const DeviceParams &device, const State &state, const std::vector<cx> &alpha,
                          const CnodSimConfig &config) {
    const HilbertSpace &space = state.space();
    require_matching(device, space);
    if (!state.is_pure()) {
        throw Error("validation_error", "pulse-level CNOD simulation takes a pure state");
    }
    CnodPulsePlan plan = resolve_plan(device, alpha, config);
    DisplacedRun r = run_displaced(device, space, CMat(state.ket()), plan, config.level, config.substeps);
    State out = State::from_ket(r.out.col(0), space);
    warn_truncation(out, 1e-4);
    return out;
}

CnodProcess simulate_cnod_lab(const DeviceParams &device, const HilbertSpace &space, const std::vector<cx> &alpha,
                              const CnodSimConfig &config) {
    require_matching(device, space);
    CnodPulsePlan plan = resolve_plan(device, alpha, config);
    Operator drift = build_drift_hamiltonian(device, space, config.level);
    EvolutionConfig ev;
    ev.dt_s = plan.first[0].dt / std::max(1, config.substeps);
    ev.check_convergence = config.check_convergence;
    ev.convergence_tol = config.convergence_tol;
    auto drives_of = [&](const std::vector<PulseShape> &pulses) {
        std::vector<DriveTerm> d;
        for (int k = 0; k < space.num_modes(); ++k) {
            d.push_back({annihilation(space, k), pulses[k].scaled(device.drive_scale), 0.0, 0.0});
        }
        return d;
    };
    CnodProcess p;
    p.basis = subspace_basis(space, config.fock_cutoff);
    CMat x = CMat::Zero(space.dim(), p.basis.size());
    for (std::size_t c = 0; c < p.basis.size(); ++c) {
        x(p.basis[c], c) = 1.0;
    }
    double tau = plan.first[0].duration();
    x = propagate_columns(x, space, drift, drives_of(plan.first), ev, tau);
    double ax[3] = {0.0, 1.0, 0.0};
    apply_ancilla_left(x, space, ancilla_rotation(ax, kPi));
    for (int k = 0; k < space.num_modes(); ++k) {
        int n = space.mode_dim(k);
        CMat r = CMat::Zero(n, n);
        for (int q = 0; q < n; ++q) {
            r(q, q) = std::exp(kI * (plan.frame_angle[k] * q));
        }
        apply_mode_left(x, space, k, r);
    }
    x = propagate_columns(x, space, drift, drives_of(plan.second), ev, tau);
    p.outputs = x;
    finish_process(p, space, alpha, config.fidelity_floor);
    return p;
}

// ---- gate-level open-system model ----

void apply_idle_noise(CMat &rho, const HilbertSpace &space, const DeviceParams &device, double dt,
                      const LossOptions &options) {
    if (dt <= 0.0) {
        return;
    }
    if (options.mode_loss) {
        for (int k = 0; k < space.num_modes(); ++k) {
            amplitude_damp(rho, space, k, std::exp(-dt / device.modes[k].t1_s));
        }
    }
    if (options.ancilla_noise) {
        double p = 1.0 - std::exp(-dt / device.ancilla_t1_s);
        double cf = std::exp(-dt * device.ancilla_dephasing_rate());
        ancilla_channel(rho, space, p, cf);
    }
}

namespace {

void left_right(CMat &rho, const std::function<void(CMat &)> &left) {
    conjugate(rho, left);
}

void lossy_cnod(CMat &rho, const HilbertSpace &space, const Gate &g, const DeviceParams &device,
                const LossOptions &options) {
    int nm = space.num_modes();
    double tau = g.tau_s > 0.0 ? g.tau_s : device.pulse_tau_s;
    int K = std::max(1, options.slices_per_pulse);
    double scale = options.physical_cnod ? device.drive_scale : 1.0;
    double h = tau / K;
    auto ramp = [&](double sign) {
        std::vector<CMat> ops_g(nm), ops_e(nm);
        for (int k = 0; k < nm; ++k) {
            if (g.alpha[k] != cx(0.0)) {
                ops_g[k] = displacement_elements(space.mode_dim(k), sign * scale * g.alpha[k] / (2.0 * K));
            }
        }
        for (int s = 0; s < K; ++s) {
            apply_idle_noise(rho, space, device, 0.5 * h, options);
            left_right(rho, [&](CMat &x) { apply_branch_ops_left(x, space, ops_g, ops_e); });
            apply_idle_noise(rho, space, device, 0.5 * h, options);
        }
    };
    ramp(1.0);
    double ax[3] = {0.0, 1.0, 0.0};
    Eigen::Matrix2cd ry = ancilla_rotation(ax, kPi);
    apply_idle_noise(rho, space, device, 0.5 * device.pi_pulse_s, options);
    left_right(rho, [&](CMat &x) { apply_ancilla_left(x, space, ry); });
    apply_idle_noise(rho, space, device, 0.5 * device.pi_pulse_s, options);
    if (options.physical_cnod && device.frame_error_rad != 0.0) {
        for (int k = 0; k < nm; ++k) {
            int n = space.mode_dim(k);
            CMat r = CMat::Zero(n, n);
            for (int q = 0; q < n; ++q) {
                r(q, q) = std::exp(kI * (device.frame_error_rad * q));
            }
            left_right(rho, [&](CMat &x) { apply_mode_left(x, space, k, r); });
        }
    }
    ramp(-1.0);
}

}  // namespace

State simulate_sequence_lossy(const State &state, const GateSequence &seq, const DeviceParams &device,
                              const LossOptions &options) {
    const HilbertSpace &space = state.space();
    require_matching(device, space);
    CMat rho = state.density();
    for (const auto &g : seq.gates) {
        switch (g.kind) {
            case Gate::Kind::Cnod:
                if (static_cast<int>(g.alpha.size()) != space.num_modes()) {
                    throw Error("dimension_error", "CNOD needs one amplitude per mode");
                }
                lossy_cnod(rho, space, g, device, options);
                break;
            case Gate::Kind::Rotation: {
                double d = gate_duration(g, device);
                apply_idle_noise(rho, space, device, 0.5 * d, options);
                apply_gate(rho, space, g, true);
                apply_idle_noise(rho, space, device, 0.5 * d, options);
                break;
            }
            case Gate::Kind::Wait:
                apply_idle_noise(rho, space, device, g.duration_s, options);
                break;
            default:
                apply_gate(rho, space, g, true);
                break;
        }
    }
    rho = 0.5 * (rho + rho.adjoint());
    return State::from_density(rho, space);
}

RMat purity_map(const DeviceParams &device, const HilbertSpace &space, const std::vector<cx> &gamma_a,
                const std::vector<cx> &gamma_b, const PurityConfig &config) {
    require_matching(device, space);
    int nm = space.num_modes();
    if (nm > 2) {
        throw Error("dimension_error", "purity map supports one or two modes");
    }
    std::vector<cx> gb = nm == 2 ? gamma_b : std::vector<cx>{0.0};
    if (gamma_a.empty() || gb.empty()) {
        throw Error("validation_error", "empty purity grid");
    }
    CVec anc(2);
    anc << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    std::vector<CVec> vac;
    for (int k = 0; k < nm; ++k) {
        vac.push_back(fock_vector(space.mode_dim(k), 0));
    }
    State initial = product_state(space, anc, vac);
    auto purity = [&](cx ga, cx gbv) {
        std::vector<cx> g = {ga};
        if (nm == 2) {
            g.push_back(gbv);
        }
        std::vector<cx> mg;
        for (auto v : g) {
            mg.push_back(-v);
        }
        GateSequence seq;
        seq.gates = {Gate::cnod(g, config.tau_s), Gate::rotation('y', kPi), Gate::cnod(mg, config.tau_s)};
        State out = config.with_loss ? simulate_sequence_lossy(initial, seq, device, config.loss)
                                     : apply_sequence(initial, seq);
        CMat rho = out.density();
        int m = space.mode_block();
        double z = std::real(rho.topLeftCorner(m, m).trace() - rho.bottomRightCorner(m, m).trace());
        cx ge = rho.topRightCorner(m, m).trace();
        return z * z + 4.0 * std::norm(ge);
    };
    double ref = purity(0.0, 0.0);
    RMat out(gamma_a.size(), gb.size());
    parallel_for(gamma_a.size() * gb.size(), config.threads, [&](std::size_t idx) {
        std::size_t i = idx / gb.size(), j = idx % gb.size();
        out(i, j) = purity(gamma_a[i], gb[j]) / ref;
    });
    return out;
}

}  // namespace cnod
