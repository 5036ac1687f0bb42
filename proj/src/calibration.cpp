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

#include "cnod/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_spline.h>
#include <nlohmann/json.hpp>

#include "cnod/common.hpp"
#include "cnod/dynamics.hpp"
#include "cnod/gates.hpp"

namespace cnod {

double CalibrationReport::value(const std::string &name) const {
    auto it = params.find(name);
    if (it == params.end()) {
        throw Error("validation_error", "calibration report has no parameter " + name);
    }
    return it->second.value;
}

std::string CalibrationReport::to_json() const {
    nlohmann::json j;
    j["procedure"] = procedure;
    j["seed"] = seed;
    j["shots"] = shots;
    j["config_hash"] = config_hash;
    j["residual_norm"] = residual_norm;
    nlohmann::json p = nlohmann::json::object();
    for (const auto &[k, v] : params) {
        p[k] = {{"value", v.value}, {"uncertainty", v.uncertainty}};
    }
    j["params"] = p;
    nlohmann::json g = nlohmann::json::object();
    for (const auto &[k, v] : ground_truth) {
        g[k] = v;
    }
    j["ground_truth"] = g;
    j["flags"] = flags;
    return j.dump(2);
}

namespace {

struct Estimate {
    double mean = 0.0;
    double error = 0.0;
};

// Binomial sampling of a +-1 observable with expectation m.
Estimate sample(double m, int shots, std::uint64_t seed) {
    m = std::clamp(m, -1.0, 1.0);
    if (shots <= 0) {
        return {m, 0.0};
    }
    std::mt19937_64 rng(seed);
    std::binomial_distribution<int> b(shots, 0.5 * (1.0 + m));
    double est = 2.0 * b(rng) / shots - 1.0;
    return {est, std::sqrt(std::max(1.0 - m * m, 1.0 / shots) / shots)};
}

double ancilla_z(const State &s) {
    CMat rho = s.density();
    int m = s.space().mode_block();
    return std::real(rho.topLeftCorner(m, m).trace() - rho.bottomRightCorner(m, m).trace());
}

LossOptions loss_options(const CalibrationOptions &o) {
    LossOptions lo;
    lo.mode_loss = o.lossy;
    lo.ancilla_noise = o.lossy;
    return lo;
}

// <sigma_x>, <sigma_y>, <sigma_z> read out through R_y(pi/2) -> -sx, R_x(pi/2) -> +sy, none -> sz.
std::array<double, 3> ancilla_bloch(const State &s, const DeviceParams &d, const LossOptions &lo) {
    auto z_after = [&](char axis) {
        GateSequence r;
        r.gates = {Gate::rotation(axis, kPi / 2.0)};
        return ancilla_z(simulate_sequence_lossy(s, r, d, lo));
    };
    double c = 1.0 - 2.0 * d.readout_error;
    return {-c * z_after('y'), c * z_after('x'), c * ancilla_z(s)};
}

CalibrationReport base_report(const std::string &name, const DeviceParams &d, const CalibrationOptions &o) {
    CalibrationReport r;
    r.procedure = name;
    r.seed = o.seed;
    r.shots = o.shots;
    r.config_hash = config_hash(d);
    return r;
}

void check_mode(const DeviceParams &d, int mode) {
    if (mode < 0 || mode >= d.num_modes()) {
        throw Error("validation_error", "calibration mode index out of range");
    }
}

}  // namespace

// ---- amplitude ----

AmplitudeResult calibrate_amplitude(const DeviceParams &device, const AmplitudeOptions &amp,
                                    const CalibrationOptions &options) {
    check_mode(device, amp.mode);
    if (amp.points < 5 || amp.axis_length <= 0.0) {
        throw Error("validation_error", "amplitude sweep needs >= 5 points and a positive length");
    }
    DeviceParams d = select_modes(device, {amp.mode});
    HilbertSpace space({d.truncation});
    int n = d.truncation;
    CMat mode_rho = CMat::Zero(n, n);
    if (amp.thermal_nbar > 0.0) {
        double q = amp.thermal_nbar / (1.0 + amp.thermal_nbar);
        for (int k = 0; k < n; ++k) {
            mode_rho(k, k) = std::pow(q, k) * (1.0 - q);
        }
        mode_rho /= mode_rho.trace().real();
    } else {
        mode_rho(0, 0) = 1.0;
    }
    CMat rho = CMat::Zero(2 * n, 2 * n);
    rho.topLeftCorner(n, n) = mode_rho;
    State initial = State::from_density(rho, space);

    GridAxis axis{"t", 0, std::exp(kI * amp.axis_angle), linspace(-amp.axis_length, amp.axis_length, amp.points)};
    CharFuncGrid grid = make_axis_grid(1, {axis});
    MeasureOptions mo;
    mo.mode = options.lossy ? MeasureMode::Lossy : MeasureMode::PulseLevel;
    mo.shots = options.shots;
    mo.seed = options.seed;
    mo.threads = options.threads;
    AmplitudeResult res;
    res.data = measure_char_func(initial, grid, d, mo);

    // Weighted log-linear fit through the origin (C(0) = 1 for any state):
    // ln y = -(s^2 / 2) t^2 with var(ln y) = (sigma / y)^2. The first pass selects points by
    // their measured value; later passes select and weight by the model so noise does not bias them.
    double c1 = 0.0, s11 = 0.0, red = 0.0;
    int used = 0;
    for (int pass = 0; pass < 4; ++pass) {
        double b1 = 0.0, chi2 = 0.0;
        s11 = 0.0;
        used = 0;
        std::vector<std::array<double, 3>> rows;
        for (std::size_t i = 0; i < res.data.size(); ++i) {
            double y = res.data.values[i].real();
            double sig = std::max(res.data.std_errors[i], 1e-6);
            double t2 = std::norm(res.data.points[i][0]);
            double ref = pass == 0 ? y : std::exp(c1 * t2);
            if (t2 == 0.0 || ref <= std::max(3.0 * sig, 0.05) || y <= 0.0) {
                continue;
            }
            double w = (ref / sig) * (ref / sig);
            s11 += w * t2 * t2;
            b1 += w * std::log(y) * t2;
            rows.push_back({t2, std::log(y), w});
            ++used;
        }
        if (used < 2) {
            throw Error("fit_error", "amplitude fit has fewer than 2 usable points");
        }
        c1 = b1 / s11;
        if (c1 >= 0.0) {
            throw Error("fit_error", "amplitude fit found no decaying Gaussian");
        }
        for (const auto &r : rows) {
            double e = r[1] - c1 * r[0];
            chi2 += r[2] * e * e;
        }
        red = used > 1 ? chi2 / (used - 1) : 0.0;
    }
    double var_c1 = std::max(red, 1.0) / s11;
    res.scale = std::sqrt(-2.0 * c1);
    res.scale_error = std::sqrt(var_c1) / res.scale;  // |d s / d c1| = 1 / s
    CalibrationReport &rep = res.report;
    rep = base_report("amplitude", device, options);
    rep.params["scale"] = {res.scale, res.scale_error};
    rep.residual_norm = red;
    rep.ground_truth["drive_scale"] = device.drive_scale;
    if (red > amp.max_residual) {
        throw Error("fit_error", "amplitude fit residual " + format_double(red) + " above threshold");
    }
    if (res.scale > amp.expected_scale * 1.01 + 3.0 * res.scale_error) {
        res.narrower_than_vacuum = true;
        rep.flags.push_back("narrower_than_vacuum");
        warn("amplitude calibration: Gaussian narrower than that of a vacuum state (thermal population or drive "
             "above nominal)");
    }
    return res;
}

// ---- geometric phase ----

double GeometricPhaseResult::phase_at(double g) const {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        pts.push_back({gamma[i], phase_fit[i]});
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(), [](auto a, auto b) { return a.first == b.first; }), pts.end());
    if (pts.size() < 3 || g < pts.front().first || g > pts.back().first) {
        return k2 * g * g + k4 * g * g * g * g;
    }
    std::vector<double> x, y;
    for (auto &p : pts) {
        x.push_back(p.first);
        y.push_back(p.second);
    }
    gsl_interp_accel *acc = gsl_interp_accel_alloc();
    gsl_spline *sp = gsl_spline_alloc(gsl_interp_cspline, x.size());
    gsl_spline_init(sp, x.data(), y.data(), x.size());
    double v = gsl_spline_eval(sp, g, acc);
    gsl_spline_free(sp);
    gsl_interp_accel_free(acc);
    return v;
}

GeometricPhaseResult calibrate_geometric_phase(const DeviceParams &device, const std::vector<double> &gamma_sweep,
                                               int mode, const CalibrationOptions &options) {
    check_mode(device, mode);
    if (gamma_sweep.empty()) {
        throw Error("validation_error", "empty geometric-phase sweep");
    }
    DeviceParams d = select_modes(device, {mode});
    HilbertSpace space({d.truncation});
    State initial = vacuum(space);
    LossOptions lo = loss_options(options);
    std::size_t n = gamma_sweep.size();
    GeometricPhaseResult res;
    res.gamma = gamma_sweep;
    res.phase.assign(n, 0.0);
    res.phase_error.assign(n, 0.0);
    res.tracker.assign(n, 0.0);
    std::vector<double> radius(n), radius_err(n);
    parallel_for(n, options.threads, [&](std::size_t i) {
        double g = gamma_sweep[i];
        GateSequence seq;
        seq.gates = {Gate::rotation('y', kPi / 2.0), Gate::cnod({g}), Gate::cnod({g})};
        State out = simulate_sequence_lossy(initial, seq, d, lo);
        auto b = ancilla_bloch(out, d, lo);
        Estimate x = sample(b[0], options.shots, derive_seed(options.seed, 2 * i));
        Estimate y = sample(b[1], options.shots, derive_seed(options.seed, 2 * i + 1));
        double r = std::hypot(x.mean, y.mean);
        radius[i] = r;
        radius_err[i] = std::max(x.error, y.error);
        res.phase[i] = std::atan2(y.mean, x.mean);
        res.phase_error[i] = r > 0.0 ? std::hypot(x.mean * y.error, y.mean * x.error) / (r * r) : kPi;
        GateSequence echo;
        echo.gates = {Gate::cnod({g}), Gate::cnod({g})};
        res.tracker[i] = geometric_phase_of(echo, d);
    });
    for (std::size_t i = 0; i < n; ++i) {
        if (radius[i] < 5.0 * radius_err[i] || radius[i] < 1e-3) {
            throw Error("fit_error", "geometric phase undefined: ancilla coherence vanished at gamma = " +
                                         format_double(gamma_sweep[i]));
        }
    }
    // Weighted least squares for the even polynomial k2 g^2 + k4 g^4.
    double a11 = 0, a12 = 0, a22 = 0, r1 = 0, r2 = 0;
    int nonzero = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double g2 = gamma_sweep[i] * gamma_sweep[i];
        double w = 1.0 / std::max(res.phase_error[i] * res.phase_error[i], 1e-12);
        a11 += w * g2 * g2;
        a12 += w * g2 * g2 * g2;
        a22 += w * g2 * g2 * g2 * g2;
        r1 += w * g2 * res.phase[i];
        r2 += w * g2 * g2 * res.phase[i];
        if (g2 > 0.0) {
            ++nonzero;
        }
    }
    double cov11 = 0.0, cov22 = 0.0;
    if (nonzero >= 3) {
        double det = a11 * a22 - a12 * a12;
        res.k2 = (a22 * r1 - a12 * r2) / det;
        res.k4 = (a11 * r2 - a12 * r1) / det;
        cov11 = a22 / det;
        cov22 = a11 / det;
    } else if (nonzero >= 1) {
        res.k2 = r1 / a11;
        cov11 = 1.0 / a11;
    } else {
        throw Error("validation_error", "geometric-phase sweep needs a non-zero amplitude");
    }
    double chi2 = 0.0;
    res.phase_fit.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double g2 = gamma_sweep[i] * gamma_sweep[i];
        res.phase_fit[i] = res.k2 * g2 + res.k4 * g2 * g2;
        double e = (res.phase[i] - res.phase_fit[i]) / std::max(res.phase_error[i], 1e-12);
        chi2 += e * e;
        res.max_tracker_deviation = std::max(res.max_tracker_deviation, std::abs(res.phase_fit[i] - res.tracker[i]));
    }
    // Area scaling from the raw points that rise clearly above their noise.
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    int pts = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double p = std::abs(res.phase[i]);
        double pe = std::max(res.phase_error[i], 1e-9);
        if (gamma_sweep[i] <= 0.0 || p < 3.0 * pe) {
            continue;
        }
        double w = (p / pe) * (p / pe);
        double lx = std::log(gamma_sweep[i]), ly = std::log(p);
        sw += w;
        sx += w * lx;
        sy += w * ly;
        sxx += w * lx * lx;
        sxy += w * lx * ly;
        ++pts;
    }
    res.loglog_slope = pts >= 2 ? (sw * sxy - sx * sy) / (sw * sxx - sx * sx) : std::nan("");
    // Pure area law phi = -g^2 sin(2 err) / 4 of the echo: one-parameter fit for the frame error.
    double q_num = 0.0, q_den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double g2 = gamma_sweep[i] * gamma_sweep[i];
        double w = 1.0 / std::max(res.phase_error[i] * res.phase_error[i], 1e-12);
        q_num += w * g2 * res.phase[i];
        q_den += w * g2 * g2;
    }
    double kq = q_num / q_den;
    double kq_err = std::sqrt(1.0 / q_den);
    double arg = std::clamp(-4.0 * kq, -1.0, 1.0);
    res.frame_error = 0.5 * std::asin(arg);
    res.frame_error_uncertainty = 2.0 * kq_err / std::max(std::sqrt(1.0 - arg * arg), 1e-9);
    CalibrationReport &rep = res.report;
    rep = base_report("geometric_phase", device, options);
    rep.params["frame_error_rad"] = {res.frame_error, res.frame_error_uncertainty};
    rep.params["k2"] = {res.k2, std::sqrt(std::max(cov11, 0.0))};
    rep.params["k4"] = {res.k4, std::sqrt(std::max(cov22, 0.0))};
    rep.params["loglog_slope"] = {res.loglog_slope, 0.0};
    rep.params["max_tracker_deviation"] = {res.max_tracker_deviation, 0.0};
    rep.residual_norm = n > 2 ? chi2 / static_cast<double>(n - 2) : chi2;
    rep.ground_truth["frame_error_rad"] = device.frame_error_rad;
    return res;
}

// ---- disentangling beta ----

namespace {

GateSequence beta_sequence(double alpha, double beta) {
    GateSequence seq;
    double ax[3] = {1.0, 0.0, 0.0};
    seq.gates = {Gate::rotation(ax, -kPi / 2.0), Gate::cnod({alpha}), Gate::rotation('y', kPi / 2.0),
                 Gate::cnod({kI * beta})};
    return seq;
}

double asymmetry(const State &s, const DeviceParams &d, const CalibrationOptions &o, std::uint64_t stream) {
    std::vector<std::vector<cx>> pts;
    for (double g : {0.25, 0.5, 0.75}) {
        pts.push_back({g});
        pts.push_back({-g});
    }
    MeasureOptions mo;
    mo.mode = MeasureMode::Ideal;
    mo.shots = o.shots;
    mo.seed = derive_seed(o.seed, stream);
    mo.threads = 1;
    CharFuncGrid c = measure_char_func(s, make_point_set(pts), d, mo);
    double a = 0.0;
    for (std::size_t i = 0; i < pts.size(); i += 2) {
        a += std::abs(c.values[i].real() - c.values[i + 1].real());
    }
    return a;
}

}  // namespace

BetaResult calibrate_disentangling_beta(const DeviceParams &device, double alpha, const std::vector<double> &beta_sweep,
                                        int mode, const CalibrationOptions &options) {
    check_mode(device, mode);
    std::size_t n = beta_sweep.size();
    if (n < 5) {
        throw Error("validation_error", "beta sweep needs at least 5 points");
    }
    if (!std::is_sorted(beta_sweep.begin(), beta_sweep.end())) {
        throw Error("validation_error", "beta sweep must be increasing");
    }
    DeviceParams d = select_modes(device, {mode});
    HilbertSpace space({d.truncation});
    State initial = vacuum(space);
    LossOptions lo = loss_options(options);
    BetaResult res;
    res.beta = beta_sweep;
    res.coherence.assign(n, 0.0);
    res.normalized.assign(n, 0.0);
    res.coherence_error.assign(n, 0.0);
    parallel_for(n, options.threads, [&](std::size_t i) {
        State out = simulate_sequence_lossy(initial, beta_sequence(alpha, beta_sweep[i]), d, lo);
        auto b = ancilla_bloch(out, d, lo);
        double sq = 0.0, var = 0.0;
        for (int k = 0; k < 3; ++k) {
            Estimate e = sample(b[k], options.shots, derive_seed(options.seed, 3 * i + k));
            sq += e.mean * e.mean;
            var += e.mean * e.mean * e.error * e.error;
        }
        double c = std::sqrt(sq);
        res.coherence[i] = c;
        res.coherence_error[i] = c > 0.0 ? std::sqrt(var) / c : 1.0 / std::sqrt(std::max(options.shots, 1));
        // Remove the known branch-overlap factor exp(-beta^2 / 2).
        double f = std::exp(0.5 * beta_sweep[i] * beta_sweep[i]);
        res.normalized[i] = c * f;
        res.coherence_error[i] *= f;
    });
    auto mx = std::max_element(res.normalized.begin(), res.normalized.end());
    auto mn = std::min_element(res.normalized.begin(), res.normalized.end());
    std::vector<double> errs = res.coherence_error;
    std::nth_element(errs.begin(), errs.begin() + n / 2, errs.end());
    double typical = errs[n / 2];
    if (*mx - *mn < 5.0 * typical) {
        throw Error("bracket_error", "disentangling sweep response is flat; no maximum in the bracket");
    }
    std::size_t ic = static_cast<std::size_t>(mx - res.normalized.begin());
    if (ic == 0 || ic == n - 1) {
        throw Error("bracket_error", "disentangling sweep maximum sits on the bracket edge");
    }
    res.beta_coarse = beta_sweep[ic];
    // Weighted parabola through the points around the coarse maximum.
    std::size_t w = std::max<std::size_t>(2, n / 6);
    std::size_t lo_i = ic >= w ? ic - w : 0;
    std::size_t hi_i = std::min(n - 1, ic + w);
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    double x0 = res.beta_coarse;
    for (std::size_t i = lo_i; i <= hi_i; ++i) {
        double x = beta_sweep[i] - x0;
        double wt = 1.0 / std::max(res.coherence_error[i] * res.coherence_error[i], 1e-12);
        Eigen::Vector3d v(1.0, x, x * x);
        a += wt * v * v.transpose();
        rhs += wt * v * res.normalized[i];
    }
    Eigen::Vector3d c = a.ldlt().solve(rhs);
    double chi2 = 0.0;
    for (std::size_t i = lo_i; i <= hi_i; ++i) {
        double x = beta_sweep[i] - x0;
        double e = (res.normalized[i] - (c[0] + c[1] * x + c[2] * x * x)) / std::max(res.coherence_error[i], 1e-12);
        chi2 += e * e;
    }
    res.beta_star = res.beta_coarse;
    double beta_err = 0.5 * (beta_sweep[std::min(n - 1, ic + 1)] - beta_sweep[ic - 1]);
    if (c[2] < 0.0) {
        double v = -c[1] / (2.0 * c[2]);
        if (x0 + v >= beta_sweep[lo_i] && x0 + v <= beta_sweep[hi_i]) {
            res.beta_star = x0 + v;
            Eigen::Matrix3d cov = a.inverse();
            // Vertex error by propagation through -b / 2c.
            Eigen::Vector3d grad(0.0, -1.0 / (2.0 * c[2]), c[1] / (2.0 * c[2] * c[2]));
            beta_err = std::sqrt(std::max(grad.dot(cov * grad), 0.0));
        }
    }
    auto state_at = [&](double beta) { return simulate_sequence_lossy(initial, beta_sequence(alpha, beta), d, lo); };
    res.asymmetry_coarse = asymmetry(state_at(res.beta_coarse), d, options, 1000001);
    res.asymmetry_star = asymmetry(state_at(res.beta_star), d, options, 1000002);
    CalibrationReport &rep = res.report;
    rep = base_report("disentangling_beta", device, options);
    rep.params["beta_star"] = {res.beta_star, beta_err};
    rep.params["beta_coarse"] = {res.beta_coarse, 0.0};
    rep.params["asymmetry_coarse"] = {res.asymmetry_coarse, 0.0};
    rep.params["asymmetry_star"] = {res.asymmetry_star, 0.0};
    std::size_t dof = hi_i - lo_i + 1 > 3 ? hi_i - lo_i + 1 - 3 : 1;
    rep.residual_norm = chi2 / static_cast<double>(dof);
    rep.ground_truth["beta_ideal"] = kPi / (2.0 * std::abs(alpha));
    return res;
}

// ---- Ramsey fit ----

namespace {

struct RamseyData {
    const std::vector<double> *u;  // time / t_max
    const std::vector<double> *y;
    const std::vector<double> *err;
};

// x = (B, A, g, w) in scaled time: y = B cos(A exp(-g u) sin(w u)).
double ramsey_model(const gsl_vector *x, double u) {
    double b = gsl_vector_get(x, 0), a = gsl_vector_get(x, 1), g = gsl_vector_get(x, 2), w = gsl_vector_get(x, 3);
    return b * std::cos(a * std::exp(-g * u) * std::sin(w * u));
}

int ramsey_f(const gsl_vector *x, void *params, gsl_vector *f) {
    auto *d = static_cast<RamseyData *>(params);
    for (std::size_t i = 0; i < d->u->size(); ++i) {
        gsl_vector_set(f, i, (ramsey_model(x, (*d->u)[i]) - (*d->y)[i]) / (*d->err)[i]);
    }
    return GSL_SUCCESS;
}

}  // namespace

RamseyResult fit_ramsey(const std::vector<double> &times, const std::vector<double> &y, const std::vector<double> &err,
                        double delta_omega, int starts) {
    std::size_t n = times.size();
    if (n < 8 || y.size() != n || err.size() != n) {
        throw Error("validation_error", "Ramsey fit needs >= 8 matching samples");
    }
    double t_max = *std::max_element(times.begin(), times.end());
    if (t_max <= 0.0) {
        throw Error("validation_error", "Ramsey time sweep must extend past zero");
    }
    std::vector<double> u(n), e(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = times[i] / t_max;
        e[i] = std::max(err[i], 1e-6);
    }
    RamseyResult res;
    res.times = times;
    res.signal = y;
    res.signal_error = err;
    double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double flat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        flat += std::pow((y[i] - mean) / e[i], 2);
    }
    if (flat / (n - 1) < 2.0) {
        throw Error("fit_error", "Ramsey signal is constant within noise (degenerate: no detuning)");
    }
    double dt = t_max / static_cast<double>(n - 1);
    double nyquist = kPi / dt;
    // cos(A sin(w t)) carries only even harmonics; 2 w dominates the spectrum.
    if (2.0 * delta_omega >= nyquist) {
        warn("Ramsey: artificial detuning aliases (2 dw above the Nyquist frequency of the sweep)");
        res.report.flags.push_back("aliasing");
    }
    double best_w = 0.0, best_p = -1.0;
    double w_hi = nyquist * t_max;
    int grid = static_cast<int>(8 * n);
    for (int k = 1; k <= grid; ++k) {
        double w = w_hi * k / grid;
        cx s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += (y[i] - mean) * std::exp(-kI * (w * u[i]));
        }
        if (std::norm(s) > best_p) {
            best_p = std::norm(s);
            best_w = w;
        }
    }
    RamseyData data{&u, &y, &e};
    gsl_multifit_nlinear_fdf fdf;
    fdf.f = ramsey_f;
    fdf.df = nullptr;
    fdf.fvv = nullptr;
    fdf.n = n;
    fdf.p = 4;
    fdf.params = &data;
    gsl_multifit_nlinear_parameters fp = gsl_multifit_nlinear_default_parameters();
    gsl_multifit_nlinear_workspace *ws = gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &fp, n, 4);
    gsl_vector *x = gsl_vector_alloc(4);
    gsl_matrix *cov = gsl_matrix_alloc(4, 4);
    double best_chi2 = std::numeric_limits<double>::infinity();
    std::array<double, 4> best{};
    std::array<double, 4> best_err{};
    const double amps[3] = {0.8, 1.6, 2.4};
    const double freqs[3] = {0.5, 1.0, 0.25};
    double b0 = std::abs(y[0]) > 0.1 ? y[0] : *std::max_element(y.begin(), y.end());
    for (int s = 0; s < std::max(1, starts); ++s) {
        gsl_vector_set(x, 0, b0);
        gsl_vector_set(x, 1, amps[s % 3]);
        gsl_vector_set(x, 2, 0.5);
        gsl_vector_set(x, 3, best_w * freqs[(s / 3) % 3]);
        gsl_multifit_nlinear_init(x, &fdf, ws);
        int info = 0;
        gsl_multifit_nlinear_driver(400, 1e-12, 1e-12, 0.0, nullptr, nullptr, &info, ws);
        gsl_vector *f = gsl_multifit_nlinear_residual(ws);
        double chi2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            chi2 += gsl_vector_get(f, i) * gsl_vector_get(f, i);
        }
        if (!std::isfinite(chi2) || chi2 >= best_chi2) {
            continue;
        }
        best_chi2 = chi2;
        gsl_vector *xs = gsl_multifit_nlinear_position(ws);
        gsl_multifit_nlinear_covar(gsl_multifit_nlinear_jac(ws), 0.0, cov);
        double scale = std::max(chi2 / static_cast<double>(n - 4), 1.0);
        for (int k = 0; k < 4; ++k) {
            best[k] = gsl_vector_get(xs, k);
            best_err[k] = std::sqrt(std::max(gsl_matrix_get(cov, k, k) * scale, 0.0));
        }
    }
    gsl_vector_free(x);
    gsl_matrix_free(cov);
    gsl_multifit_nlinear_free(ws);
    if (!std::isfinite(best_chi2)) {
        throw Error("fit_error", "Ramsey fit did not converge");
    }
    double g = best[2], w = std::abs(best[3]);
    if (g <= 0.0) {
        throw Error("fit_error", "Ramsey fit found no decay");
    }
    res.amplitude = std::abs(best[1]);
    res.offset_scale = best[0];
    res.t1_s = t_max / (2.0 * g);
    res.t1_error = res.t1_s * best_err[2] / g;
    res.omega = w / t_max;
    res.omega_error = best_err[3] / t_max;
    res.detuning = res.omega - delta_omega;
    res.detuning_error = res.omega_error;
    res.report.residual_norm = best_chi2 / static_cast<double>(n - 4);
    if (2.0 * res.omega >= nyquist && std::find(res.report.flags.begin(), res.report.flags.end(), "aliasing") ==
                                         res.report.flags.end()) {
        warn("Ramsey: fitted frequency aliases (2 w above the Nyquist frequency of the sweep)");
        res.report.flags.push_back("aliasing");
    }
    if (res.omega * t_max < kTwoPi) {
        res.report.flags.push_back("less_than_one_oscillation");
    }
    if (1.0 - std::exp(-t_max / (2.0 * res.t1_s)) < 0.2) {
        res.report.flags.push_back("decay_below_20_percent");
    }
    return res;
}

RamseyResult ramsey_mode_fit(const DeviceParams &device, const RamseyOptions &ramsey, const CalibrationOptions &options) {
    check_mode(device, ramsey.mode);
    if (ramsey.ancilla != 'g' && ramsey.ancilla != 'e') {
        throw Error("validation_error", "Ramsey ancilla state must be g or e");
    }
    DeviceParams d = select_modes(device, {ramsey.mode});
    d.truncation = ramsey.truncation;
    HilbertSpace space({ramsey.truncation});
    CVec anc(2);
    anc << (ramsey.ancilla == 'g' ? 1.0 : 0.0), (ramsey.ancilla == 'e' ? 1.0 : 0.0);
    State initial = product_state(space, anc, {coherent_vector(ramsey.truncation, ramsey.gamma)});
    double omega = kTwoPi * d.modes[0].detuning_hz - (ramsey.ancilla == 'e' ? d.chi_angular(0) : 0.0);
    LossOptions lo;
    lo.mode_loss = options.lossy;
    lo.ancilla_noise = options.lossy && ramsey.ancilla_noise;
    std::size_t n = ramsey.times.size();
    std::vector<double> y(n), err(n);
    parallel_for(n, options.threads, [&](std::size_t i) {
        double t = ramsey.times[i];
        GateSequence seq;
        seq.gates = {Gate::wait(t), Gate::digital_rotation(0, -omega * t)};
        if (ramsey.ancilla == 'e') {
            seq.gates.push_back(Gate::rotation('y', kPi));
        }
        State s = simulate_sequence_lossy(initial, seq, d, lo);
        MeasureOptions mo;
        mo.mode = MeasureMode::Ideal;
        mo.shots = options.shots;
        mo.seed = derive_seed(options.seed, i);
        mo.threads = 1;
        mo.prep = AncillaPrep::None;
        CharFuncGrid c = measure_char_func(s, make_point_set({{std::exp(kI * (ramsey.delta_omega * t)) * ramsey.gamma}}),
                                           d, mo);
        y[i] = c.values[0].real();
        err[i] = options.shots > 0 ? c.std_errors[0] : 1e-4;
    });
    RamseyResult res = fit_ramsey(ramsey.times, y, err, ramsey.delta_omega, ramsey.starts);
    CalibrationReport rep = base_report(ramsey.ancilla == 'g' ? "ramsey_g" : "ramsey_e", device, options);
    rep.params["t1_s"] = {res.t1_s, res.t1_error};
    rep.params["detuning_rad_s"] = {res.detuning, res.detuning_error};
    rep.params["omega_rad_s"] = {res.omega, res.omega_error};
    rep.params["amplitude"] = {res.amplitude, 0.0};
    rep.residual_norm = res.report.residual_norm;
    rep.flags = res.report.flags;
    rep.ground_truth["t1_s"] = d.modes[0].t1_s;
    rep.ground_truth["detuning_rad_s"] = omega;
    res.report = rep;
    return res;
}

ChiResult ramsey_chi(const DeviceParams &device, const RamseyOptions &ramsey, const CalibrationOptions &options) {
    ChiResult r;
    check_mode(device, ramsey.mode);
    // The excited run oscillates at delta_omega - chi; a cosine fit cannot resolve its sign.
    bool ambiguous = ramsey.delta_omega <= kTwoPi * std::abs(device.modes[ramsey.mode].chi_hz);
    if (ambiguous) {
        warn("Ramsey chi: artificial detuning does not exceed the nominal chi; the excited-state frequency sign is "
             "ambiguous");
    }
    RamseyOptions g = ramsey, e = ramsey;
    g.ancilla = 'g';
    e.ancilla = 'e';
    CalibrationOptions og = options, oe = options;
    og.seed = derive_seed(options.seed, 1);
    oe.seed = derive_seed(options.seed, 2);
    r.ground = ramsey_mode_fit(device, g, og);
    r.excited = ramsey_mode_fit(device, e, oe);
    r.chi_hz = (r.ground.omega - r.excited.omega) / kTwoPi;
    r.chi_error_hz = std::hypot(r.ground.omega_error, r.excited.omega_error) / kTwoPi;
    r.report = base_report("ramsey_chi", device, options);
    r.report.params["chi_hz"] = {r.chi_hz, r.chi_error_hz};
    r.report.params["t1_s"] = {r.ground.t1_s, r.ground.t1_error};
    r.report.residual_norm = std::max(r.ground.report.residual_norm, r.excited.report.residual_norm);
    r.report.ground_truth["chi_hz"] = device.modes[ramsey.mode].chi_hz;
    r.report.ground_truth["t1_s"] = device.modes[ramsey.mode].t1_s;
    if (ambiguous) {
        r.report.flags.push_back("frequency_sign_ambiguous");
    }
    return r;
}

}  // namespace cnod
