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

// Acceptance checks: one PASS/FAIL line per criterion, details on indented info lines.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "cnod/calibration.hpp"
#include "cnod/device.hpp"
#include "cnod/dynamics.hpp"
#include "cnod/estimation.hpp"
#include "cnod/gates.hpp"
#include "cnod/pulse.hpp"
#include "cnod/tomography.hpp"

using namespace cnod;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <typename... Args>
void info(const char *fmt, Args... args) {
    std::printf("    ");
    std::printf(fmt, args...);
    std::printf("\n");
    std::fflush(stdout);
}

double min_eigenvalue(const CMat &m) {
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool within(double x, double target, double tol) { return std::abs(x - target) <= tol; }

DeviceParams alice_only() { return select_modes(default_device(), {0}); }

State lossy_cat(CatTarget kind, const DeviceParams &d, int n) {
    GateSequence seq = compile_cat_sequence(kind, {1.7, 1.7}, d);
    return simulate_sequence_lossy(vacuum(HilbertSpace({n, n})), seq, d);
}

// 1. Pulse-level CNOD gate fidelity at chi = 220 kHz, tau = 144 ns, truncation 40.
bool criterion_cnod_fidelity() {
    auto t0 = Clock::now();
    DeviceParams a = alice_only();
    HilbertSpace s({40});
    CnodSimConfig c;
    c.tau_s = 144e-9;
    c.level = HamiltonianLevel::Full;
    double worst = 1.0;
    for (cx alpha : {cx(0.25, 0.0), cx(0.5, 0.0), cx(1.0, 0.0), cx(1.5, 0.0), cx(2.0, 0.0), cx(0.0, 2.0),
                     cx(-2.0, 0.0), cx(1.2, -1.2), cx(-1.0, 1.5)}) {
        CnodProcess p = simulate_cnod(a, s, {alpha}, c);
        info("alpha %s: F = %.6f (z-corrected %.6f)", format_complex(alpha).c_str(), p.average_gate_fidelity,
             p.z_corrected_fidelity);
        worst = std::min(worst, p.average_gate_fidelity);
    }
    double t = seconds_since(t0);
    info("chi %.0f Hz, full Hamiltonian, worst F = %.6f, runtime %.1f s", a.modes[0].chi_hz, worst, t);
    return worst >= 0.99 && t < 300.0;
}

// 2. Speedup over the conventional 3 pi / chi timescale.
bool criterion_speedup() {
    struct Row {
        const char *name;
        double time_s, chi_lo, chi_hi, chi_mid, expected;
    };
    DeviceParams d = default_device();
    Row rows[] = {{"single_A", reported_generation_time(CatTarget::SingleA), 216e3, 224e3, d.modes[0].chi_hz, 14.0},
                  {"single_B", reported_generation_time(CatTarget::SingleB), 31e3, 36e3, d.modes[1].chi_hz, 75.0},
                  {"bell", reported_generation_time(CatTarget::Bell), 31e3, 36e3, d.modes[1].chi_hz, 36.0}};
    bool ok = true;
    for (const Row &r : rows) {
        double mid = speedup_ratio(r.time_s, r.chi_mid);
        double lo = speedup_ratio(r.time_s, r.chi_hi), hi = speedup_ratio(r.time_s, r.chi_lo);
        bool row_ok = std::abs(mid / r.expected - 1.0) <= 0.10;
        info("%s: %.0f ns, speedup %.1f at chi %.1f kHz (range %.1f-%.1f), expected %.0f: %s", r.name, r.time_s * 1e9,
             mid, r.chi_mid * 1e-3, lo, hi, r.expected, row_ok ? "ok" : "off");
        ok = ok && row_ok;
    }
    return ok;
}

// Golden-section refinement of a 2D maximum on a small box.
double refine_max(const std::function<double(double, double)> &f, double x0, double y0, double half) {
    double bx = x0, by = y0, best = f(x0, y0);
    for (int round = 0; round < 8; ++round) {
        double cx0 = bx, cy0 = by;
        for (int i = -10; i <= 10; ++i) {
            for (int j = -10; j <= 10; ++j) {
                double x = cx0 + half * i / 10.0, y = cy0 + half * j / 10.0;
                double v = f(x, y);
                if (v > best) {
                    best = v;
                    bx = x;
                    by = y;
                }
            }
        }
        half /= 5.0;
    }
    return best;
}

// 3. Exact Bell-cat characteristic-function features.
bool criterion_ideal_features() {
    HilbertSpace s({30, 30});
    State bell = cat_target_state(CatTarget::Bell, {1.7, 1.7}, s);
    auto rere = [&](double x, double y) { return char_func_exact(bell, x, y).real(); };
    auto imim = [&](double x, double y) { return char_func_exact(bell, cx(0.0, x), cx(0.0, y)).real(); };
    double blob = refine_max(rere, 3.4, 3.4, 0.2);
    double fringe = -1.0;
    for (double x : linspace(-4.4, 4.4, 45)) {
        for (double y : linspace(-4.4, 4.4, 45)) {
            fringe = std::max(fringe, imim(x, y));
        }
    }
    fringe = std::max(fringe, refine_max(imim, 0.0, 0.0, 0.2));
    double n2 = 1.0 / (2.0 * (1.0 + std::exp(-4.0 * 1.7 * 1.7)));
    info("Re-Re side-blob peak %.9f (deviation from 0.5: %.2e)", blob, blob - 0.5);
    info("closed form: normalization 1/(2(1+exp(-4|a|^2))) = %.9f plus direct terms exp(-|2a|^2) ~ %.1e", n2,
         std::exp(-4.0 * 1.7 * 1.7));
    info("Im-Im fringe maximum %.12f (deviation from 1: %.2e)", fringe, fringe - 1.0);
    return within(blob, 0.5, 1e-6) && within(fringe, 1.0, 1e-6);
}

struct TableRow {
    CatTarget kind;
    const char *label;
    int mode;
    double reference;
};

const TableRow kTable[] = {
    {CatTarget::Bell, "Alice Bell", 0, 0.89},    {CatTarget::Bell, "Bob Bell", 1, 0.92},
    {CatTarget::Product, "Alice product", 0, 0.83}, {CatTarget::Product, "Bob product", 1, 0.77},
    {CatTarget::SingleA, "Alice single", 0, 0.87},  {CatTarget::SingleB, "Bob single", 1, 0.86},
};

double table_fidelity(const State &st, const DeviceParams &d, const TableRow &row, MeasureMode mode,
                      std::uint64_t seed) {
    MeasureOptions o;
    o.shots = 4000;
    o.mode = mode;
    o.seed = seed;
    CharFuncGrid g = plane_grid(row.mode ? "b" : "a", 41, 4.4, 2);
    CharFuncGrid meas = marginal_grid(measure_char_func(st, g, d, o), row.mode);
    ReconstructionResult r = mle_reconstruct(meas, {16});
    TableInput in;
    in.mode = row.mode ? "Bob" : "Alice";
    in.state_type = cat_target_name(row.kind);
    in.rho = r.rho;
    in.reference_fidelity = row.reference;
    in.kind = row.kind == CatTarget::Bell ? TargetKind::MixedLogical : TargetKind::PureCat;
    return fit_target(in).fidelity;
}

// 4. Lossy generation, tomography with shot noise, MLE and target fits.
bool criterion_lossy_reproduction() {
    auto t0 = Clock::now();
    DeviceParams d = default_device();
    const int n = 22;
    State states[4];
    CatTarget kinds[4] = {CatTarget::SingleA, CatTarget::SingleB, CatTarget::Product, CatTarget::Bell};
    for (int i = 0; i < 4; ++i) {
        states[i] = lossy_cat(kinds[i], d, n);
    }
    const State &bell = states[3];
    MeasureOptions o;
    o.shots = 4000;
    o.seed = 11;
    CharFuncGrid b = measure_char_func(bell, make_point_set({{3.4, 3.4}, {-3.4, -3.4}}), d, o);
    double blob = b.values[0].real();
    bool ok = blob >= 0.30 && blob <= 0.45;
    info("Bell side-blob (ideal tomography gates, 4000 shots): %.4f +- %.4f (mirror %.4f); bracket [0.30, 0.45]", blob,
         b.std_errors[0], b.values[1].real());
    info("exact value of the lossy state: %.4f", char_func_exact(bell, 3.4, 3.4).real());
    o.mode = MeasureMode::Lossy;
    CharFuncGrid bl = measure_char_func(bell, make_point_set({{3.4, 3.4}}), d, o);
    info("with lossy tomography gates (contrast-normalized): %.4f", bl.values[0].real());
    auto index = [&](CatTarget k) { return std::find(kinds, kinds + 4, k) - kinds; };
    std::uint64_t seed = 100;
    for (const TableRow &row : kTable) {
        const State &st = states[index(row.kind)];
        double f = table_fidelity(st, d, row, MeasureMode::Ideal, seed);
        double fl = table_fidelity(st, d, row, MeasureMode::Lossy, seed);
        ++seed;
        bool row_ok = within(f, row.reference, 0.07);
        info("%-14s F = %.4f vs %.2f: %s (lossy tomography gates: %.4f)", row.label, f, row.reference,
             row_ok ? "ok" : "off", fl);
        ok = ok && row_ok;
    }
    info("runtime %.1f s", seconds_since(t0));
    return ok;
}

// 5. Logical entanglement witness.
bool criterion_witness() {
    DeviceParams d = default_device();
    const int n = 22;
    HilbertSpace s({n, n});
    WitnessOptions wo;
    wo.shots = 0;
    WitnessResult ideal = witness_protocol(cat_target_state(CatTarget::Bell, {1.7, 1.7}, s), 1.7, 1.7, d, wo);
    info("ideal Bell-cat F = %.5f", ideal.f);
    bool ok = ideal.f >= 0.99;
    wo.shots = 4000;
    wo.seed = 5;
    WitnessResult lossy = witness_protocol(lossy_cat(CatTarget::Bell, d, n), 1.7, 1.7, d, wo);
    info("lossy Bell-cat F = %.4f +- %.4f (bracket [0.76, 0.92])", lossy.f, lossy.std_error);
    ok = ok && lossy.f >= 0.76 && lossy.f <= 0.92;
    WitnessOptions wl = wo;
    wl.mode = MeasureMode::Lossy;
    info("with lossy tomography gates: F = %.4f", witness_protocol(lossy_cat(CatTarget::Bell, d, n), 1.7, 1.7, d, wl).f);
    std::vector<State> separable;
    for (CatTarget k : {CatTarget::Product, CatTarget::SingleA, CatTarget::SingleB}) {
        GateSequence seq = compile_cat_sequence(k, {1.7, 1.7}, d);
        separable.push_back(apply_sequence(vacuum(s), seq));
        separable.push_back(lossy_cat(k, d, n));
    }
    separable.push_back(vacuum(s));
    const char *labels[] = {"product ideal", "product lossy", "single_A ideal", "single_A lossy",
                            "single_B ideal", "single_B lossy", "vacuum"};
    for (std::size_t i = 0; i < separable.size(); ++i) {
        wo.seed = 40 + i;
        WitnessResult w = witness_protocol(separable[i], 1.7, 1.7, d, wo);
        bool sep_ok = w.f <= 0.5 + 3.0 * w.std_error;
        info("separable %-15s F = %.4f +- %.4f: %s", labels[i], w.f, w.std_error, sep_ok ? "ok" : "above bound");
        ok = ok && sep_ok;
    }
    return ok;
}

// 6. MLE round trip on an alpha = 1.7 cat at dimension 20.
bool criterion_mle_round_trip() {
    auto t0 = Clock::now();
    const int dim = 20;
    HilbertSpace s({40});
    State cat = cat_state(s, 0, 1.7, 0.0);
    CMat truth = mode_density(cat, {0}).topLeftCorner(dim, dim);
    double kept = truth.trace().real();
    truth /= kept;
    CharFuncGrid g = plane_grid("a", 41, 4.4, 1);
    ReconstructionResult exact = mle_reconstruct(evaluate_exact(cat, g), {dim});
    double fe = fidelity(exact.rho, truth);
    DeviceParams d = alice_only();
    MeasureOptions o;
    o.shots = 4000;
    o.seed = 17;
    ReconstructionResult noisy = mle_reconstruct(measure_char_func(cat, g, d, o), {dim});
    double fn = fidelity(noisy.rho, truth);
    double t = seconds_since(t0);
    info("noiseless 41x41 grid: F = %.5f (%d iterations); population kept below dim 20: %.2e lost", fe,
         exact.iterations, 1.0 - kept);
    info("4000 shots: F = %.5f (%d iterations); min eigenvalue %.1e, trace %.12f", fn, noisy.iterations,
         min_eigenvalue(noisy.rho), noisy.rho.trace().real());
    info("runtime %.1f s", t);
    return fe >= 0.999 && fn >= 0.98 && t < 600.0;
}

// 7. Calibration recovery against injected ground truth at 4000 shots.
bool criterion_calibration() {
    bool ok = true;
    DeviceParams d = default_device();
    CalibrationOptions o;

    for (int mode : {0, 1}) {
        RamseyOptions r;
        r.mode = mode;
        r.delta_omega = kTwoPi * (150e3 + d.modes[mode].chi_hz);
        r.times = linspace(0.0, 60e-6, 201);
        ChiResult c = ramsey_chi(d, r, o);
        double t1 = d.modes[mode].t1_s, chi = d.modes[mode].chi_hz;
        bool t1_ok = std::abs(c.ground.t1_s / t1 - 1.0) <= 0.05;
        bool chi_ok = std::abs(c.chi_hz / chi - 1.0) <= 0.02;
        info("%s Ramsey: T1 %.2f us (true %.2f): %s; chi %.2f kHz (true %.2f): %s", d.modes[mode].name.c_str(),
             c.ground.t1_s * 1e6, t1 * 1e6, t1_ok ? "ok" : "off", c.chi_hz * 1e-3, chi * 1e-3, chi_ok ? "ok" : "off");
        ok = ok && t1_ok && chi_ok;
    }

    DeviceParams fe = d;
    fe.frame_error_rad = 0.05;
    GeometricPhaseResult gp = calibrate_geometric_phase(fe, linspace(0.0, 3.0, 25), 0, o);
    bool gp_ok = std::abs(gp.frame_error - 0.05) <= 1e-2;
    info("geometric phase: frame error %.4f +- %.4f rad (injected 0.05): %s", gp.frame_error,
         gp.frame_error_uncertainty, gp_ok ? "ok" : "off");
    info("phase table vs tracker: max deviation %.4f rad; log-log slope %.2f", gp.max_tracker_deviation,
         gp.loglog_slope);
    ok = ok && gp_ok;

    DeviceParams sc = d;
    sc.drive_scale = 1.3;
    AmplitudeOptions ao;
    ao.expected_scale = 1.3;
    AmplitudeResult amp = calibrate_amplitude(sc, ao, o);
    bool amp_ok = std::abs(amp.scale / 1.3 - 1.0) <= 0.01;
    info("amplitude scale %.4f +- %.4f (injected 1.3): %s", amp.scale, amp.scale_error, amp_ok ? "ok" : "off");
    ok = ok && amp_ok;

    CalibrationOptions lossless = o;
    lossless.lossy = false;
    for (double alpha : {1.7, 3.4}) {
        double b0 = kPi / (2.0 * alpha);
        BetaResult b = calibrate_disentangling_beta(d, alpha, linspace(0.3 * b0, 1.7 * b0, 29), 0, lossless);
        bool b_ok = std::abs(b.beta_star / b0 - 1.0) <= 0.02;
        BetaResult bl = calibrate_disentangling_beta(d, alpha, linspace(0.3 * b0, 1.7 * b0, 29), 0, o);
        info("beta* at CNOD argument %.1f: %.4f vs pi/(2 alpha) %.4f (%+.2f%%): %s; with loss %.4f (%+.2f%%)", alpha,
             b.beta_star, b0, 100.0 * (b.beta_star / b0 - 1.0), b_ok ? "ok" : "off", bl.beta_star,
             100.0 * (bl.beta_star / b0 - 1.0));
        ok = ok && b_ok;
    }
    return ok;
}

// 8. Integrator step halving and state invariants.
bool criterion_hygiene() {
    bool ok = true;
    DeviceParams a = alice_only();
    HilbertSpace s({40});
    CnodSimConfig c;
    c.tau_s = 144e-9;
    c.level = HamiltonianLevel::Full;
    double worst = 0.0;
    for (cx alpha : {cx(1.0, 0.0), cx(2.0, 0.0), cx(1.2, -1.2)}) {
        c.substeps = 1;
        double f1 = simulate_cnod(a, s, {alpha}, c).average_gate_fidelity;
        c.substeps = 2;
        double f2 = simulate_cnod(a, s, {alpha}, c).average_gate_fidelity;
        worst = std::max(worst, std::abs(f1 - f2));
    }
    info("CNOD fidelity change under step halving: %.2e", worst);
    ok = ok && worst < 1e-6;

    // Direct propagation with the built-in step-halving check.
    HilbertSpace s16({24});
    Operator drift = build_drift_hamiltonian(a, s16, HamiltonianLevel::Dispersive2);
    PulseShape env;
    env.dt = 200e-9;
    env.samples = {cx(kTwoPi * 4e6, 0.0)};
    std::vector<DriveTerm> drives = {{annihilation(s16, 0), env, 3e6, 0.0}};
    EvolutionConfig ec;
    ec.dt_s = 0.5e-9;
    ec.method_order = 4;
    ec.check_convergence = true;
    State init = product_state(s16, CVec::Constant(2, 1.0 / std::sqrt(2.0)), {coherent_vector(24, 0.0)});
    try {
        State out = propagate(init, drift, drives, {}, ec, 200e-9);
        double norm = out.ket().norm();
        info("propagation passed its step-halving check; norm %.15f", norm);
        ok = ok && std::abs(norm - 1.0) < 1e-10;
        ec.lindblad = true;
        State rho = propagate(init.as_density(), drift, drives, standard_collapse_ops(a, s16), ec, 200e-9);
        const CMat &m = rho.density();
        double herm = (m - m.adjoint()).norm();
        double tr = std::abs(m.trace() - 1.0);
        double mine = min_eigenvalue(m);
        info("Lindblad: |rho - rho^dag| %.1e, |Tr - 1| %.1e, min eigenvalue %.1e", herm, tr, mine);
        ok = ok && herm < 1e-10 && tr < 1e-10 && mine > -1e-10;
    } catch (const Error &e) {
        info("propagation failed: %s", e.what());
        ok = false;
    }

    // Process unitarity on the gate subspace and invariants of the lossy generation model.
    CnodProcess p = simulate_cnod(a, s, {2.0}, c);
    CMat gram = p.outputs.adjoint() * p.outputs;
    double unit = (gram - CMat::Identity(gram.rows(), gram.cols())).norm();
    info("CNOD process isometry error %.1e", unit);
    ok = ok && unit < 1e-8;
    DeviceParams d = default_device();
    State bell = lossy_cat(CatTarget::Bell, d, 22);
    const CMat &rb = bell.density();
    double herm = (rb - rb.adjoint()).norm(), tr = std::abs(rb.trace() - 1.0), mine = min_eigenvalue(rb);
    info("lossy Bell state: |rho - rho^dag| %.1e, |Tr - 1| %.1e, min eigenvalue %.1e", herm, tr, mine);
    ok = ok && herm < 1e-10 && tr < 1e-10 && mine > -1e-10;
    info("%s", "unit-level invariant tests run as separate ctest entries");
    return ok;
}

// 9. Spectral nulls of every generated anti-symmetric pulse.
bool criterion_pulse_nulls() {
    DeviceParams d = default_device();
    double worst_null = 0.0, worst_disp = 0.0;
    int count = 0;
    auto check = [&](const PulseShape &p) {
        double amp = 0.0;
        for (cx v : p.samples) {
            amp = std::max(amp, std::abs(v));
        }
        if (amp == 0.0) {
            return;
        }
        ++count;
        double f0 = p.carrier_detuning_hz;
        worst_null = std::max(worst_null, null_depth(p, f0));
        double peak = 0.0;
        for (int i = -300; i <= 300; ++i) {
            peak = std::max(peak, std::abs(semiclassical_displacement(p, f0 + i * 0.02 / p.duration())));
        }
        worst_disp = std::max(worst_disp, std::abs(semiclassical_displacement(p, f0)) / peak);
    };
    for (CatTarget k : {CatTarget::SingleA, CatTarget::SingleB, CatTarget::Product, CatTarget::Bell}) {
        for (double alpha : {0.5, 1.0, 1.7, 2.5}) {
            GateSequence seq = compile_cat_sequence(k, {alpha, alpha}, d);
            for (const Gate &g : seq.gates) {
                if (g.kind != Gate::Kind::Cnod) {
                    continue;
                }
                CnodPulsePlan plan = plan_cnod_pulses(d, g.alpha, g.tau_s > 0.0 ? g.tau_s : d.pulse_tau_s);
                for (std::size_t m = 0; m < plan.first.size(); ++m) {
                    check(plan.first[m]);
                    check(plan.second[m]);
                }
            }
        }
    }
    for (double tau : {60e-9, 144e-9, 288e-9}) {
        for (cx alpha : {cx(1.0, 0.0), cx(0.0, 2.0), cx(3.4, -1.0)}) {
            CnodPulsePlan plan = plan_cnod_pulses(d, {alpha, -alpha}, tau);
            for (std::size_t m = 0; m < plan.first.size(); ++m) {
                check(plan.first[m]);
                check(plan.second[m]);
            }
        }
    }
    info("%d pulses: worst null depth %.2e, worst displacement at the null / maximum %.2e", count, worst_null,
         worst_disp);
    return count > 0 && worst_null < 1e-6 && worst_disp < 1e-6;
}

// 10. Peak drive amplitude of CNOD vs ECD on the Bob single-cat pulse.
bool criterion_ecd() {
    DeviceParams d = default_device();
    GateSequence seq = compile_cat_sequence(CatTarget::SingleB, {0.0, 1.7}, d);
    const Gate *big = nullptr;
    for (const Gate &g : seq.gates) {
        if (g.kind == Gate::Kind::Cnod) {
            big = &g;
            break;
        }
    }
    double tau = big->tau_s > 0.0 ? big->tau_s : d.pulse_tau_s;
    auto ratio = [&](double t) {
        CnodPulsePlan plan = plan_cnod_pulses(d, big->alpha, t);
        const PulseShape &c = plan.first[1];
        PulseShape e = make_ecd_pulse(c.duration(), 11e-9, 44e-9, c.dt, c.carrier_detuning_hz);
        return compare_peak_amplitude(c, e, d.modes[1].chi_hz);
    };
    double db = ratio(tau);
    info("Bob single-cat CNOD(%s), tau %.0f ns vs ECD (sigma 11 ns, 44 ns) of equal duration: %.2f dB (target 9.44 "
         "+- 1.5)",
         format_complex(big->alpha[1]).c_str(), tau * 1e9, db);
    bool property = true;
    for (double t : {100e-9, tau, 144e-9, 200e-9, 288e-9, 400e-9}) {
        double r = ratio(t);
        info("tau %.0f ns: %.2f dB", t * 1e9, r);
        property = property && r > 0.0;
    }
    info("CNOD peak below ECD peak at every duration: %s", property ? "yes" : "no");
    return property && within(db, 9.44, 1.5);
}

}  // namespace

int main(int argc, char **argv) {
    struct Criterion {
        const char *name;
        bool (*run)();
    };
    const Criterion criteria[] = {
        {"CNOD gate fidelity", criterion_cnod_fidelity},
        {"speedup reproduction", criterion_speedup},
        {"ideal characteristic-function features", criterion_ideal_features},
        {"lossy reproduction", criterion_lossy_reproduction},
        {"entanglement witness", criterion_witness},
        {"MLE round trip", criterion_mle_round_trip},
        {"calibration recovery", criterion_calibration},
        {"numerical hygiene", criterion_hygiene},
        {"pulse nulls", criterion_pulse_nulls},
        {"ECD comparison", criterion_ecd},
    };
    set_warning_handler([](const std::string &m) { std::printf("    warning: %s\n", m.c_str()); });
    // Optional arguments select criteria by number; default runs all.
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) {
        only.push_back(std::atoi(argv[i]));
    }
    int failed = 0, index = 0, ran = 0;
    for (const Criterion &c : criteria) {
        ++index;
        if (!only.empty() && std::find(only.begin(), only.end(), index) == only.end()) {
            continue;
        }
        ++ran;
        std::printf("criterion %d: %s\n", index, c.name);
        std::fflush(stdout);
        bool pass = false;
        try {
            pass = c.run();
        } catch (const std::exception &e) {
            info("error: %s", e.what());
        }
        std::printf("%s %d %s\n", pass ? "PASS" : "FAIL", index, c.name);
        std::fflush(stdout);
        failed += pass ? 0 : 1;
    }
    std::printf("%d of %d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
