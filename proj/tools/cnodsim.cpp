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

// cnodsim: experiment runner over the simulation library.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cnod/calibration.hpp"
#include "cnod/device.hpp"
#include "cnod/dynamics.hpp"
#include "cnod/estimation.hpp"
#include "cnod/gates.hpp"
#include "cnod/io.hpp"
#include "cnod/pulse.hpp"
#include "cnod/tomography.hpp"

using namespace cnod;
using json = nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 1;
    std::string out = ".";
    int threads = 0;
    bool csv_only = false;
};

struct Ctx {
    Common c;
    DeviceParams device;
    std::string command;

    std::string path(const std::string &name) const { return (std::filesystem::path(c.out) / name).string(); }

    std::vector<std::string> meta() const {
        return {"seed=" + std::to_string(c.seed), "config_hash=" + config_hash(device), "command=" + command};
    }

    PngMeta png_meta() const {
        return {{"seed", std::to_string(c.seed)}, {"config_hash", config_hash(device)}, {"command", command}};
    }

    void write_json(const std::string &name, json j) const {
        j["seed"] = c.seed;
        j["config_hash"] = config_hash(device);
        j["command"] = command;
        std::ofstream f(path(name));
        if (!f) {
            throw Error("io_error", "cannot write " + path(name));
        }
        f << j.dump(2) << "\n";
    }

    std::ofstream csv(const std::string &name) const {
        std::ofstream f(path(name));
        if (!f) {
            throw Error("io_error", "cannot write " + path(name));
        }
        for (const auto &m : meta()) {
            f << "# " << m << "\n";
        }
        return f;
    }
};

void add_common(CLI::App *app, Common &c) {
    app->add_option("--config", c.config, "Device config file (default: built-in parameters)");
    app->add_option("--seed", c.seed, "Master RNG seed");
    app->add_option("--out", c.out, "Output directory");
    app->add_option("--threads", c.threads, "Worker cap (fallback: CNODSIM_THREADS)");
    app->add_flag("--csv-only", c.csv_only, "Skip PNG plots");
}

Ctx make_ctx(const Common &c, const std::string &command) {
    Ctx ctx;
    ctx.c = c;
    ctx.command = command;
    ctx.device = c.config.empty() ? default_device() : load_device_file(c.config);
    if (c.threads > 0) {
        set_default_threads(c.threads);
    }
    std::error_code ec;
    std::filesystem::create_directories(c.out, ec);
    if (ec || !std::filesystem::is_directory(c.out)) {
        throw Error("io_error", "output directory not writable: " + c.out);
    }
    return ctx;
}

json cx_json(cx z) { return json::array({z.real(), z.imag()}); }

RMat grid_matrix(const CharFuncGrid &g, bool real_part) {
    int r = g.rows(), c = g.cols();
    RMat m(r, c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            cx v = g.values[static_cast<std::size_t>(i) * c + j];
            // First axis varies slowest; draw it bottom to top.
            m(r - 1 - i, j) = real_part ? v.real() : v.imag();
        }
    }
    return m;
}

void plot_grid(const Ctx &ctx, const CharFuncGrid &g, const std::string &stem) {
    if (ctx.c.csv_only) {
        return;
    }
    if (g.axes.size() == 2) {
        write_heatmap_png(ctx.path(stem + "_re.png"), grid_matrix(g, true), 1.0, ctx.png_meta());
        write_heatmap_png(ctx.path(stem + "_im.png"), grid_matrix(g, false), 1.0, ctx.png_meta());
    } else if (g.axes.size() == 1) {
        PlotSeries re, im;
        for (std::size_t i = 0; i < g.size(); ++i) {
            re.x.push_back(g.axes[0].samples[i]);
            re.y.push_back(g.values[i].real());
            im.x.push_back(g.axes[0].samples[i]);
            im.y.push_back(g.values[i].imag());
        }
        write_lines_png(ctx.path(stem + ".png"), {re, im}, ctx.png_meta());
    }
}

std::vector<int> modes_of(const std::string &spec) {
    std::vector<int> m;
    for (char ch : spec) {
        if (ch == 'a' || ch == 'A') {
            m.push_back(0);
        } else if (ch == 'b' || ch == 'B') {
            m.push_back(1);
        } else {
            throw Error("validation_error", "mode list must use letters a and b");
        }
    }
    if (m.empty()) {
        throw Error("validation_error", "empty mode list");
    }
    return m;
}

std::vector<cx> cat_alphas(CatTarget kind, double alpha_a, double alpha_b) {
    switch (kind) {
        case CatTarget::SingleA:
            return {alpha_a, 0.0};
        case CatTarget::SingleB:
            return {0.0, alpha_b};
        default:
            return {alpha_a, alpha_b};
    }
}

State initial_vacuum(int truncation) { return vacuum(HilbertSpace({truncation, truncation})); }

// ---- simulate-cnod ----

struct SimArgs {
    std::string alpha_a = "1", alpha_b = "0", level = "dispersive2", modes;
    double tau = 0.0;
    int truncation = 0, fock_cutoff = 4;
};

int run_simulate_cnod(const Common &c, const SimArgs &a) {
    Ctx ctx = make_ctx(c, "simulate-cnod");
    std::vector<cx> all = {parse_complex(a.alpha_a), parse_complex(a.alpha_b)};
    std::vector<int> modes;
    if (!a.modes.empty()) {
        modes = modes_of(a.modes);
    } else {
        for (int k = 0; k < 2; ++k) {
            if (all[k] != cx(0.0)) {
                modes.push_back(k);
            }
        }
        if (modes.empty()) {
            modes = {0};
        }
    }
    DeviceParams d = select_modes(ctx.device, modes);
    int n = a.truncation > 0 ? a.truncation : d.truncation;
    d.truncation = n;
    std::vector<cx> alpha;
    for (int k : modes) {
        alpha.push_back(all[k]);
    }
    HilbertSpace space(std::vector<int>(modes.size(), n));
    CnodSimConfig cfg;
    cfg.tau_s = a.tau;
    cfg.level = parse_hamiltonian_level(a.level);
    cfg.fock_cutoff = a.fock_cutoff;
    CnodProcess p = simulate_cnod(d, space, alpha, cfg);
    double tau = a.tau > 0.0 ? a.tau : d.pulse_tau_s;
    CnodPulsePlan plan = plan_cnod_pulses(d, alpha, tau);
    json j;
    j["average_gate_fidelity"] = p.average_gate_fidelity;
    j["z_corrected_fidelity"] = p.z_corrected_fidelity;
    j["z_phase"] = p.z_phase;
    j["leakage"] = p.leakage;
    j["tau_s"] = tau;
    j["truncation"] = n;
    j["level"] = hamiltonian_level_name(cfg.level);
    json per = json::array();
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const PulseShape &first = plan.first[k];
        json m;
        m["mode"] = d.modes[k].name;
        m["alpha"] = cx_json(alpha[k]);
        m["end_alpha_g"] = cx_json(p.end_alpha_g[k]);
        m["end_alpha_e"] = cx_json(p.end_alpha_e[k]);
        m["null_depth"] = null_depth(first, first.carrier_detuning_hz);
        m["frame_angle"] = plan.frame_angle[k];
        per.push_back(m);
        write_pulse_csv(first, ctx.path("pulse_" + d.modes[k].name + "_first.csv"), ctx.meta());
        write_pulse_csv(plan.second[k], ctx.path("pulse_" + d.modes[k].name + "_second.csv"), ctx.meta());
        Spectrum s = spectrum(first);
        auto f = ctx.csv("spectrum_" + d.modes[k].name + ".csv");
        f << "# resolution_hz=" << format_double(s.resolution_hz) << "\n";
        f << "freq_hz,re,im\n";
        for (std::size_t i = 0; i < s.freq_hz.size(); ++i) {
            f << format_double(s.freq_hz[i]) << "," << format_double(s.values[i].real()) << ","
              << format_double(s.values[i].imag()) << "\n";
        }
        if (!c.csv_only) {
            PlotSeries re, im, sa;
            for (std::size_t i = 0; i < first.samples.size(); ++i) {
                double t = (i + 0.5) * first.dt * 1e9;
                re.x.push_back(t);
                re.y.push_back(first.samples[i].real());
                im.x.push_back(t);
                im.y.push_back(first.samples[i].imag());
            }
            write_lines_png(ctx.path("pulse_" + d.modes[k].name + ".png"), {re, im}, ctx.png_meta());
            double f0 = first.carrier_detuning_hz;
            for (std::size_t i = 0; i < s.freq_hz.size(); ++i) {
                if (std::abs(s.freq_hz[i] - f0) < 4.0 / first.duration()) {
                    sa.x.push_back((s.freq_hz[i] - f0) * 1e-6);
                    sa.y.push_back(std::abs(s.values[i]));
                }
            }
            write_lines_png(ctx.path("spectrum_" + d.modes[k].name + ".png"), {sa}, ctx.png_meta());
        }
    }
    j["modes"] = per;
    ctx.write_json("cnod.json", j);
    return 0;
}

// ---- generate-cat ----

struct GenArgs {
    std::string kind = "bell";
    double alpha = 1.7, alpha_b = -1.0;
    bool lossy = false;
    int truncation = 22;
};

int run_generate_cat(const Common &c, const GenArgs &a) {
    Ctx ctx = make_ctx(c, "generate-cat");
    CatTarget kind = parse_cat_target(a.kind);
    double ab = a.alpha_b > 0.0 ? a.alpha_b : a.alpha;
    std::vector<cx> alpha = cat_alphas(kind, a.alpha, ab);
    DeviceParams d = ctx.device;
    d.truncation = a.truncation;
    GateSequence seq = compile_cat_sequence(kind, alpha, d);
    State init = initial_vacuum(a.truncation);
    State out = a.lossy ? simulate_sequence_lossy(init, seq, d) : apply_sequence(init, seq);
    State target = cat_target_state(kind, alpha, init.space());
    std::string name = cat_target_name(kind);
    auto meta = ctx.meta();
    meta.push_back("kind=" + name);
    meta.push_back(std::string("lossy=") + (a.lossy ? "1" : "0"));
    save_state(out, ctx.path(name + ".state"), meta);
    {
        std::ofstream f(ctx.path(name + ".sequence"));
        f << serialize_sequence(seq);
    }
    json j;
    j["kind"] = name;
    j["alpha"] = {a.alpha, ab};
    j["lossy"] = a.lossy;
    j["truncation"] = a.truncation;
    j["duration_s"] = sequence_duration(seq, d);
    j["reported_duration_s"] = reported_generation_time(kind);
    j["fidelity_to_target"] = state_fidelity(out, target);
    CMat rho = out.density();
    int m = out.space().mode_block();
    CMat anc(2, 2);
    anc << rho.topLeftCorner(m, m).trace(), rho.topRightCorner(m, m).trace(), rho.bottomLeftCorner(m, m).trace(),
        rho.bottomRightCorner(m, m).trace();
    j["ancilla_purity"] = (anc * anc).trace().real();
    for (int k = 0; k < 2; ++k) {
        CMat r = mode_density(out, {k});
        CMat t = mode_density(target, {k});
        j["mode_fidelity"][d.modes[k].name] = density_fidelity(r, t);
    }
    ctx.write_json(name + "_report.json", j);
    return 0;
}

// ---- tomo ----

struct TomoArgs {
    std::string state, plane = "re-re", mode = "ideal";
    int n = 41, shots = 4000;
    double extent = 4.0;
    bool phase_correct = false;
};

int run_tomo(const Common &c, const TomoArgs &a) {
    Ctx ctx = make_ctx(c, "tomo");
    if (a.state.empty()) {
        throw Error("validation_error", "tomo needs --state");
    }
    State s = load_state(a.state);
    int nm = s.space().num_modes();
    CharFuncGrid g = plane_grid(a.plane, a.n, a.extent, nm);
    CharFuncGrid data;
    MeasureOptions mo;
    mo.mode = parse_measure_mode(a.mode);
    mo.shots = a.shots;
    mo.seed = c.seed;
    mo.threads = c.threads;
    DeviceParams d = ctx.device;
    if (d.num_modes() != nm) {
        std::vector<int> keep;
        for (int k = 0; k < nm; ++k) {
            keep.push_back(k);
        }
        d = select_modes(d, keep);
    }
    if (a.shots == 0 && mo.mode == MeasureMode::Ideal) {
        data = evaluate_exact(s, g, c.threads);
        data.seed = c.seed;
        data.config_hash = config_hash(d);
    } else {
        data = measure_char_func(s, g, d, mo);
    }
    if (a.phase_correct) {
        bool joint = false;
        for (const auto &p : data.points) {
            joint = joint || (p.size() == 2 && p[0] != cx(0.0) && p[1] != cx(0.0));
        }
        data = postprocess(data, tomography_phase_correction(d, mo, joint), {});
    }
    std::string stem = "tomo_" + a.plane;
    write_dataset_csv(data, ctx.path(stem + ".csv"), {"command=tomo", "state=" + std::filesystem::path(a.state).filename().string()});
    plot_grid(ctx, data, stem);
    return 0;
}

// ---- mle ----

struct MleArgs {
    std::string data, target = "none";
    int mode = -1, dim = 16, max_iterations = 4000;
    double alpha = 1.7;
};

int run_mle(const Common &c, const MleArgs &a) {
    Ctx ctx = make_ctx(c, "mle");
    if (a.data.empty()) {
        throw Error("validation_error", "mle needs --data");
    }
    CharFuncGrid g = read_dataset_csv(a.data);
    std::vector<int> dims;
    if (a.mode >= 0) {
        g = marginal_grid(g, a.mode);
        dims = {a.dim};
    } else {
        dims.assign(g.num_modes, a.dim);
    }
    MleConfig cfg;
    cfg.max_iterations = a.max_iterations;
    ReconstructionResult r = mle_reconstruct(g, dims, cfg);
    json j = json::parse(reconstruction_json(r));
    j["data"] = std::filesystem::path(a.data).filename().string();
    j["history"] = r.history;
    if (a.target != "none") {
        if (dims.size() != 1) {
            throw Error("validation_error", "target fits need a single-mode reconstruction (--mode)");
        }
        TableInput in;
        in.mode = a.mode == 0 ? "Alice" : "Bob";
        in.state_type = a.target;
        in.rho = r.rho;
        in.kind = a.target == "mixed" ? TargetKind::MixedLogical : TargetKind::PureCat;
        if (a.target != "mixed" && a.target != "cat") {
            throw Error("validation_error", "target must be none, cat or mixed");
        }
        in.initial.alpha = a.alpha;
        TableEntry e = fit_target(in);
        j["target_fit"] = json::parse(table_json({e}))[0];
    }
    ctx.write_json("mle.json", j);
    auto f = ctx.csv("rho.csv");
    f << "row,col,re,im\n";
    for (Eigen::Index i = 0; i < r.rho.rows(); ++i) {
        for (Eigen::Index k = 0; k < r.rho.cols(); ++k) {
            f << i << "," << k << "," << format_double(r.rho(i, k).real()) << "," << format_double(r.rho(i, k).imag())
              << "\n";
        }
    }
    if (!c.csv_only) {
        RMat mag = r.rho.cwiseAbs();
        write_heatmap_png(ctx.path("rho.png"), mag, 0.0, ctx.png_meta());
    }
    return 0;
}

// ---- witness ----

struct WitArgs {
    std::string state, kind = "bell", mode = "ideal";
    double alpha_a = 1.7, alpha_b = 1.7;
    int shots = 4000, truncation = 22;
    bool lossy = false;
};

int run_witness(const Common &c, const WitArgs &a) {
    Ctx ctx = make_ctx(c, "witness");
    State s;
    std::string source;
    DeviceParams d = ctx.device;
    d.truncation = a.truncation;
    if (!a.state.empty()) {
        s = load_state(a.state);
        source = a.state;
    } else {
        CatTarget kind = parse_cat_target(a.kind);
        GateSequence seq = compile_cat_sequence(kind, cat_alphas(kind, a.alpha_a, a.alpha_b), d);
        State init = initial_vacuum(a.truncation);
        s = a.lossy ? simulate_sequence_lossy(init, seq, d) : apply_sequence(init, seq);
        source = cat_target_name(kind) + (a.lossy ? " (lossy)" : "");
    }
    WitnessOptions wo;
    wo.mode = parse_measure_mode(a.mode);
    wo.shots = a.shots;
    wo.seed = c.seed;
    wo.threads = c.threads;
    WitnessResult w = witness_protocol(s, a.alpha_a, a.alpha_b, d, wo);
    json j;
    j["source"] = source;
    j["alpha"] = {a.alpha_a, a.alpha_b};
    j["shots"] = a.shots;
    j["II"] = w.ii;
    j["ZZ"] = w.zz;
    j["XX"] = w.xx;
    j["YY"] = w.yy;
    j["XX_minus_YY"] = w.xx_minus_yy;
    j["F"] = w.f;
    j["std_error"] = w.std_error;
    j["classical_bound"] = 0.5;
    ctx.write_json("witness.json", j);
    return 0;
}

// ---- calibrate ----

struct CalArgs {
    std::string procedure = "amplitude", ancilla = "g";
    int mode = 0, shots = 4000, points = 0;
    bool lossless = false;
    double gamma_max = 3.0, alpha = 3.4, delta_omega_khz = 0.0, t_max_us = 60.0, thermal_nbar = 0.0;
};

int run_calibrate(const Common &c, const CalArgs &a) {
    Ctx ctx = make_ctx(c, "calibrate");
    CalibrationOptions o;
    o.shots = a.shots;
    o.seed = c.seed;
    o.lossy = !a.lossless;
    o.threads = c.threads;
    std::string p = a.procedure;
    if (p == "amplitude") {
        AmplitudeOptions ao;
        ao.mode = a.mode;
        ao.thermal_nbar = a.thermal_nbar;
        if (a.points > 0) {
            ao.points = a.points;
        }
        AmplitudeResult r = calibrate_amplitude(ctx.device, ao, o);
        ctx.write_json("calibration_amplitude.json", json::parse(r.report.to_json()));
        write_dataset_csv(r.data, ctx.path("calibration_amplitude.csv"), {"command=calibrate", "procedure=amplitude"});
        plot_grid(ctx, r.data, "calibration_amplitude");
    } else if (p == "geometric-phase") {
        int n = a.points > 0 ? a.points : 25;
        GeometricPhaseResult r = calibrate_geometric_phase(ctx.device, linspace(0.0, a.gamma_max, n), a.mode, o);
        ctx.write_json("calibration_geometric_phase.json", json::parse(r.report.to_json()));
        auto f = ctx.csv("calibration_geometric_phase.csv");
        f << "gamma,phase,phase_error,phase_fit,tracker\n";
        PlotSeries raw, fit, trk;
        for (std::size_t i = 0; i < r.gamma.size(); ++i) {
            f << format_double(r.gamma[i]) << "," << format_double(r.phase[i]) << ","
              << format_double(r.phase_error[i]) << "," << format_double(r.phase_fit[i]) << ","
              << format_double(r.tracker[i]) << "\n";
            raw.x.push_back(r.gamma[i]);
            raw.y.push_back(r.phase[i]);
            fit.x.push_back(r.gamma[i]);
            fit.y.push_back(r.phase_fit[i]);
            trk.x.push_back(r.gamma[i]);
            trk.y.push_back(r.tracker[i]);
        }
        if (!c.csv_only) {
            write_lines_png(ctx.path("calibration_geometric_phase.png"), {raw, fit, trk}, ctx.png_meta());
        }
    } else if (p == "beta") {
        int n = a.points > 0 ? a.points : 29;
        double b0 = kPi / (2.0 * a.alpha);
        BetaResult r = calibrate_disentangling_beta(ctx.device, a.alpha, linspace(0.3 * b0, 1.7 * b0, n), a.mode, o);
        ctx.write_json("calibration_beta.json", json::parse(r.report.to_json()));
        auto f = ctx.csv("calibration_beta.csv");
        f << "beta,coherence,normalized,error\n";
        PlotSeries s;
        for (std::size_t i = 0; i < r.beta.size(); ++i) {
            f << format_double(r.beta[i]) << "," << format_double(r.coherence[i]) << ","
              << format_double(r.normalized[i]) << "," << format_double(r.coherence_error[i]) << "\n";
            s.x.push_back(r.beta[i]);
            s.y.push_back(r.normalized[i]);
        }
        if (!c.csv_only) {
            write_lines_png(ctx.path("calibration_beta.png"), {s}, ctx.png_meta());
        }
    } else if (p == "ramsey" || p == "chi") {
        RamseyOptions ro;
        ro.mode = a.mode;
        if (a.mode < 0 || a.mode >= ctx.device.num_modes()) {
            throw Error("validation_error", "mode index out of range");
        }
        // Default keeps both ancilla branches at positive frequency: 150 kHz above the nominal chi.
        double dk = a.delta_omega_khz > 0.0 ? a.delta_omega_khz : 150.0 + std::abs(ctx.device.modes[a.mode].chi_hz) * 1e-3;
        ro.delta_omega = kTwoPi * dk * 1e3;
        ro.times = linspace(0.0, a.t_max_us * 1e-6, a.points > 0 ? a.points : 201);
        if (a.ancilla != "g" && a.ancilla != "e") {
            throw Error("validation_error", "--ancilla must be g or e");
        }
        ro.ancilla = a.ancilla[0];
        std::vector<const RamseyResult *> runs;
        ChiResult chi;
        RamseyResult single;
        if (p == "chi") {
            chi = ramsey_chi(ctx.device, ro, o);
            ctx.write_json("calibration_chi.json", json::parse(chi.report.to_json()));
            runs = {&chi.ground, &chi.excited};
        } else {
            single = ramsey_mode_fit(ctx.device, ro, o);
            ctx.write_json("calibration_ramsey.json", json::parse(single.report.to_json()));
            runs = {&single};
        }
        auto f = ctx.csv("calibration_" + p + ".csv");
        f << "run,t_s,signal,error\n";
        std::vector<PlotSeries> plots;
        for (std::size_t k = 0; k < runs.size(); ++k) {
            PlotSeries s;
            for (std::size_t i = 0; i < runs[k]->times.size(); ++i) {
                f << k << "," << format_double(runs[k]->times[i]) << "," << format_double(runs[k]->signal[i]) << ","
                  << format_double(runs[k]->signal_error[i]) << "\n";
                s.x.push_back(runs[k]->times[i] * 1e6);
                s.y.push_back(runs[k]->signal[i]);
            }
            plots.push_back(s);
        }
        if (!c.csv_only) {
            write_lines_png(ctx.path("calibration_" + p + ".png"), plots, ctx.png_meta());
        }
    } else {
        throw Error("validation_error", "unknown procedure '" + p + "' (amplitude, geometric-phase, beta, ramsey, chi)");
    }
    return 0;
}

// ---- purity-map ----

struct PurArgs {
    int n = 21, truncation = 30;
    double extent = 2.0, tau = 0.0;
    bool lossy = false;
};

int run_purity_map(const Common &c, const PurArgs &a) {
    Ctx ctx = make_ctx(c, "purity-map");
    DeviceParams d = ctx.device;
    d.truncation = a.truncation;
    HilbertSpace space({a.truncation, a.truncation});
    std::vector<cx> ga, gb;
    for (double v : linspace(0.0, a.extent, a.n)) {
        ga.push_back(v);
        gb.push_back(v);
    }
    PurityConfig pc;
    pc.tau_s = a.tau;
    pc.with_loss = a.lossy;
    pc.threads = c.threads;
    RMat p = purity_map(d, space, ga, gb, pc);
    auto f = ctx.csv("purity_map.csv");
    f << "gamma_a,gamma_b,purity\n";
    for (int i = 0; i < a.n; ++i) {
        for (int j = 0; j < a.n; ++j) {
            f << format_double(ga[i].real()) << "," << format_double(gb[j].real()) << "," << format_double(p(i, j))
              << "\n";
        }
    }
    if (!c.csv_only) {
        RMat img(a.n, a.n);
        for (int i = 0; i < a.n; ++i) {
            for (int j = 0; j < a.n; ++j) {
                img(a.n - 1 - j, i) = p(i, j);
            }
        }
        write_heatmap_png(ctx.path("purity_map.png"), img, 1.0, ctx.png_meta());
    }
    return 0;
}

// ---- compare-ecd ----

struct EcdArgs {
    double alpha = 1.7, tau = 0.0, sigma_ecd = 11e-9, length_ecd = 44e-9;
};

int run_compare_ecd(const Common &c, const EcdArgs &a) {
    Ctx ctx = make_ctx(c, "compare-ecd");
    const DeviceParams &d = ctx.device;
    double tau = a.tau;
    cx big = 2.0 * a.alpha;
    if (tau <= 0.0) {
        // The large CNOD of the compiled Bob single-cat sequence.
        GateSequence seq = compile_cat_sequence(CatTarget::SingleB, {0.0, a.alpha}, d);
        for (const auto &g : seq.gates) {
            if (g.kind == Gate::Kind::Cnod) {
                tau = g.tau_s > 0.0 ? g.tau_s : d.pulse_tau_s;
                big = g.alpha[1];
                break;
            }
        }
    }
    CnodPulsePlan plan = plan_cnod_pulses(d, {0.0, big}, tau);
    const PulseShape &cn = plan.first[1];
    PulseShape ecd = make_ecd_pulse(cn.duration(), a.sigma_ecd, a.length_ecd, cn.dt, cn.carrier_detuning_hz);
    double db = compare_peak_amplitude(cn, ecd, d.modes[1].chi_hz);
    json j;
    j["tau_s"] = tau;
    j["cnod_alpha"] = cx_json(big);
    j["ecd_sigma_s"] = a.sigma_ecd;
    j["ecd_length_s"] = a.length_ecd;
    j["peak_ratio_db"] = db;
    j["cnod_peak_below_ecd"] = db > 0.0;
    ctx.write_json("compare_ecd.json", j);
    write_pulse_csv(cn, ctx.path("ecd_cnod_pulse.csv"), ctx.meta());
    write_pulse_csv(ecd, ctx.path("ecd_reference_pulse.csv"), ctx.meta());
    if (!c.csv_only) {
        // Both normalized to the same conditional displacement at the ground-branch frequency.
        double off = cn.carrier_detuning_hz + d.modes[1].chi_hz;
        double sc = 1.0 / std::abs(semiclassical_displacement(cn, off));
        double se = 1.0 / std::abs(semiclassical_displacement(ecd, off));
        PlotSeries pc, pe;
        for (std::size_t i = 0; i < cn.samples.size(); ++i) {
            double t = (i + 0.5) * cn.dt * 1e9;
            pc.x.push_back(t);
            pc.y.push_back(std::abs(cn.samples[i]) * sc);
            pe.x.push_back(t);
            pe.y.push_back(std::abs(ecd.samples[i]) * se);
        }
        write_lines_png(ctx.path("compare_ecd.png"), {pc, pe}, ctx.png_meta());
    }
    return 0;
}

int dispatch(std::vector<std::string> args);

// ---- run: JSON experiment spec ----

int run_spec(const std::string &path) {
    std::ifstream f(path);
    if (!f) {
        throw Error("io_error", "cannot read " + path);
    }
    json spec;
    try {
        spec = json::parse(f);
    } catch (const json::exception &e) {
        throw Error("parse_error", path + ": " + e.what());
    }
    auto field = [&](std::initializer_list<const char *> keys) -> const json * {
        for (const char *k : keys) {
            if (spec.contains(k)) {
                return &spec[k];
            }
        }
        return nullptr;
    };
    const json *kind = field({"kind", "experiment"});
    if (!kind || !kind->is_string() || kind->get<std::string>() == "run") {
        throw Error("validation_error", "experiment spec needs a string 'kind' naming a subcommand");
    }
    std::vector<std::string> args = {"cnodsim", kind->get<std::string>()};
    try {
        if (const json *v = field({"device", "config"})) {
            args.insert(args.end(), {"--config", v->get<std::string>()});
        }
        if (const json *v = field({"seed"})) {
            args.insert(args.end(), {"--seed", std::to_string(v->get<std::uint64_t>())});
        }
        if (const json *v = field({"out", "output_dir"})) {
            args.insert(args.end(), {"--out", v->get<std::string>()});
        }
    } catch (const json::exception &e) {
        throw Error("validation_error", path + ": " + e.what());
    }
    if (spec.contains("params")) {
        for (const auto &[k, v] : spec["params"].items()) {
            if (v.is_boolean()) {
                if (v.get<bool>()) {
                    args.push_back("--" + k);
                }
            } else if (v.is_string()) {
                args.insert(args.end(), {"--" + k, v.get<std::string>()});
            } else {
                args.insert(args.end(), {"--" + k, v.dump()});
            }
        }
    }
    return dispatch(args);
}

int dispatch(std::vector<std::string> args) {
    CLI::App app{"cnodsim: conditional-displacement simulator and analysis toolkit"};
    app.require_subcommand(1);
    Common common;
    SimArgs sim;
    GenArgs gen;
    TomoArgs tomo;
    MleArgs mle;
    WitArgs wit;
    CalArgs cal;
    PurArgs pur;
    EcdArgs ecd;
    std::string spec_path;

    auto *s1 = app.add_subcommand("simulate-cnod", "Pulse-level CNOD gate simulation");
    add_common(s1, common);
    s1->add_option("--alpha-a", sim.alpha_a, "CNOD argument on Alice (complex, e.g. 1+0.5i)");
    s1->add_option("--alpha-b", sim.alpha_b, "CNOD argument on Bob");
    s1->add_option("--modes", sim.modes, "Simulated modes: a, b or ab (default: non-zero arguments)");
    s1->add_option("--tau", sim.tau, "Per-pulse duration (s)");
    s1->add_option("--level", sim.level, "dispersive1, dispersive2 or full");
    s1->add_option("--truncation", sim.truncation, "Fock truncation per mode");
    s1->add_option("--fock-cutoff", sim.fock_cutoff, "Subspace cutoff for the gate fidelity");

    auto *s2 = app.add_subcommand("generate-cat", "Compile and simulate a cat-state sequence");
    add_common(s2, common);
    s2->add_option("--kind", gen.kind, "single_a, single_b, product or bell");
    s2->add_option("--alpha", gen.alpha, "Cat amplitude (Alice, and Bob unless --alpha-b)");
    s2->add_option("--alpha-b", gen.alpha_b, "Cat amplitude on Bob");
    s2->add_flag("--lossy", gen.lossy, "Lossy gate-level simulation");
    s2->add_option("--truncation", gen.truncation, "Fock truncation per mode");

    auto *s3 = app.add_subcommand("tomo", "Characteristic-function tomography of a saved state");
    add_common(s3, common);
    s3->add_option("--state", tomo.state, "State file from generate-cat")->required();
    s3->add_option("--plane", tomo.plane, "re-re, im-im, re-im, a, b, a-re, b-re");
    s3->add_option("--n", tomo.n, "Samples per axis");
    s3->add_option("--extent", tomo.extent, "Axis half-range");
    s3->add_option("--mode", tomo.mode, "ideal, pulse or lossy");
    s3->add_option("--shots", tomo.shots, "Shots per point (0 with ideal: exact values)");
    s3->add_flag("--phase-correct", tomo.phase_correct, "Remove the calibrated geometric phase");

    auto *s4 = app.add_subcommand("mle", "Maximum-likelihood reconstruction from a tomography CSV");
    add_common(s4, common);
    s4->add_option("--data", mle.data, "Tomography CSV")->required();
    s4->add_option("--mode", mle.mode, "Reconstruct one mode (0 or 1) from a marginal grid");
    s4->add_option("--dim", mle.dim, "Fock dimension per mode");
    s4->add_option("--max-iterations", mle.max_iterations, "Iteration cap");
    s4->add_option("--target", mle.target, "none, cat or mixed");
    s4->add_option("--alpha", mle.alpha, "Initial target amplitude");

    auto *s5 = app.add_subcommand("witness", "Logical entanglement witness");
    add_common(s5, common);
    s5->add_option("--state", wit.state, "State file (default: compile --kind)");
    s5->add_option("--kind", wit.kind, "Cat kind when no state file is given");
    s5->add_option("--alpha-a", wit.alpha_a, "Alice cat amplitude");
    s5->add_option("--alpha-b", wit.alpha_b, "Bob cat amplitude");
    s5->add_option("--shots", wit.shots, "Shots per setting (0: exact)");
    s5->add_option("--mode", wit.mode, "ideal, pulse or lossy measurement");
    s5->add_option("--truncation", wit.truncation, "Fock truncation per mode");
    s5->add_flag("--lossy", wit.lossy, "Lossy generation when compiling --kind");

    auto *s6 = app.add_subcommand("calibrate", "Simulated calibration experiments");
    add_common(s6, common);
    s6->add_option("--procedure", cal.procedure, "amplitude, geometric-phase, beta, ramsey or chi");
    s6->add_option("--mode", cal.mode, "Mode index");
    s6->add_option("--shots", cal.shots, "Shots per setting");
    s6->add_option("--points", cal.points, "Sweep points");
    s6->add_flag("--lossless", cal.lossless, "Disable mode and ancilla loss");
    s6->add_option("--gamma-max", cal.gamma_max, "Geometric-phase sweep end");
    s6->add_option("--alpha", cal.alpha, "CNOD argument for the beta calibration");
    s6->add_option("--delta-omega-khz", cal.delta_omega_khz, "Ramsey artificial detuning in kHz (default: 150 above chi)");
    s6->add_option("--t-max-us", cal.t_max_us, "Ramsey sweep end (us)");
    s6->add_option("--ancilla", cal.ancilla, "Ramsey ancilla state g or e");
    s6->add_option("--thermal-nbar", cal.thermal_nbar, "Thermal population for the amplitude check");

    auto *s7 = app.add_subcommand("purity-map", "Normalized ancilla purity after CNOD, pi, CNOD");
    add_common(s7, common);
    s7->add_option("--n", pur.n, "Samples per axis");
    s7->add_option("--extent", pur.extent, "Largest displacement");
    s7->add_option("--tau", pur.tau, "Per-pulse duration (s)");
    s7->add_option("--truncation", pur.truncation, "Fock truncation per mode");
    s7->add_flag("--lossy", pur.lossy, "Include loss");

    auto *s8 = app.add_subcommand("compare-ecd", "Peak drive amplitude of CNOD vs ECD");
    add_common(s8, common);
    s8->add_option("--alpha", ecd.alpha, "Bob cat amplitude");
    s8->add_option("--tau", ecd.tau, "Per-pulse duration (default: compiled Bob cat)");
    s8->add_option("--ecd-sigma", ecd.sigma_ecd, "ECD Gaussian sigma (s)");
    s8->add_option("--ecd-length", ecd.length_ecd, "ECD displacement length (s)");

    auto *s9 = app.add_subcommand("run", "Run a JSON experiment spec");
    s9->add_option("spec", spec_path, "Experiment spec file");

    std::vector<const char *> argv;
    for (const auto &a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::string msg = e.what();
        for (auto &ch : msg) {
            if (ch == '\n') {
                ch = ' ';
            }
        }
        std::cerr << "error kind=usage_error message=" << msg << "\n";
        return 2;
    }
    if (s1->parsed()) {
        return run_simulate_cnod(common, sim);
    }
    if (s2->parsed()) {
        return run_generate_cat(common, gen);
    }
    if (s3->parsed()) {
        return run_tomo(common, tomo);
    }
    if (s4->parsed()) {
        return run_mle(common, mle);
    }
    if (s5->parsed()) {
        return run_witness(common, wit);
    }
    if (s6->parsed()) {
        return run_calibrate(common, cal);
    }
    if (s7->parsed()) {
        return run_purity_map(common, pur);
    }
    if (s8->parsed()) {
        return run_compare_ecd(common, ecd);
    }
    if (spec_path.empty()) {
        std::cout << s9->help();
        return 0;
    }
    return run_spec(spec_path);
}

}  // namespace

int main(int argc, char **argv) {
    std::vector<std::string> args(argv, argv + argc);
    std::string last_warning;
    set_warning_handler([](const std::string &m) { std::cerr << "warning: " << m << "\n"; });
    try {
        return dispatch(args);
    } catch (const Error &e) {
        std::string msg = e.what();
        for (auto &ch : msg) {
            if (ch == '\n') {
                ch = ' ';
            }
        }
        std::cerr << "error kind=" << e.kind() << " message=" << msg << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error kind=internal message=" << e.what() << "\n";
        return 3;
    }
}
