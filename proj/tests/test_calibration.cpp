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

#include <cmath>

#include <nlohmann/json.hpp>

#include "cnod/calibration.hpp"
#include "doctest.h"

using namespace cnod;

namespace {

std::vector<double> sweep(double lo, double hi, int n) { return linspace(lo, hi, n); }

RamseyOptions bob_ramsey() {
    RamseyOptions r;
    r.mode = 1;
    r.delta_omega = kTwoPi * 150e3;
    r.times = sweep(0.0, 60e-6, 201);
    return r;
}

}  // namespace

TEST_CASE("amplitude calibration recovers the drive scale") {
    DeviceParams d = default_device();
    AmplitudeResult unit = calibrate_amplitude(d);
    CHECK(std::abs(unit.scale - 1.0) < 0.01);
    CHECK_FALSE(unit.narrower_than_vacuum);
    CHECK(unit.scale_error > 0.0);
    CHECK(unit.data.shots == 4000);

    d.drive_scale = 1.3;
    AmplitudeOptions a;
    a.expected_scale = 1.3;
    AmplitudeResult scaled = calibrate_amplitude(d, a);
    CHECK(std::abs(scaled.scale / 1.3 - 1.0) < 0.01);

    // Thermal population narrows the Gaussian: biased high and flagged.
    d.drive_scale = 1.0;
    AmplitudeOptions th;
    th.thermal_nbar = 0.1;
    int warnings = 0;
    auto prev = set_warning_handler([&](const std::string &) { ++warnings; });
    AmplitudeResult thermal = calibrate_amplitude(d, th);
    set_warning_handler(prev);
    CHECK(thermal.scale > 1.05);
    CHECK(thermal.narrower_than_vacuum);
    CHECK(warnings == 1);

    // Determinism under a fixed seed.
    CHECK(calibrate_amplitude(d).scale == unit.scale);
    auto j = nlohmann::json::parse(unit.report.to_json());
    CHECK(j["procedure"] == "amplitude");
    CHECK(j["params"]["scale"]["uncertainty"].get<double>() >= 0.0);
}

TEST_CASE("geometric phase calibration") {
    DeviceParams d = default_device();
    d.frame_error_rad = 0.05;
    CalibrationOptions exact;
    exact.shots = 0;
    exact.lossy = false;
    std::vector<double> g = sweep(0.0, 3.0, 13);
    GeometricPhaseResult e = calibrate_geometric_phase(d, g, 0, exact);
    // Lossless and noiseless: the simulated experiment equals the analytic tracker.
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(std::abs(e.phase[i] - e.tracker[i]) < 1e-3);
    }
    CHECK(std::abs(e.phase[0]) < 1e-12);
    CHECK(std::abs(e.loglog_slope - 2.0) < 0.1);
    CHECK(std::abs(e.frame_error - 0.05) < 1e-6);
    // Spline inside the sweep, even polynomial outside.
    CHECK(std::abs(e.phase_at(1.1) - e.k2 * 1.21 - e.k4 * 1.4641) < 1e-4);
    CHECK(e.phase_at(4.0) == doctest::Approx(e.k2 * 16.0 + e.k4 * 256.0));

    CalibrationOptions shots;
    shots.lossy = false;
    GeometricPhaseResult s = calibrate_geometric_phase(d, sweep(0.0, 3.0, 25), 0, shots);
    CHECK(std::abs(s.phase[0]) < 4.0 * s.phase_error[0]);
    CHECK(std::abs(s.frame_error - 0.05) < 1e-2);
    CHECK(s.max_tracker_deviation < 0.03);
    CHECK(s.frame_error_uncertainty > 0.0);

    // Without a frame error the echo encloses no area.
    d.frame_error_rad = 0.0;
    GeometricPhaseResult z = calibrate_geometric_phase(d, g, 0, exact);
    CHECK(std::abs(z.k2) < 1e-9);
}

TEST_CASE("disentangling beta calibration") {
    DeviceParams d = default_device();
    CalibrationOptions o;
    o.lossy = false;
    auto run = [&](double alpha) {
        double b0 = kPi / (2.0 * alpha);
        return calibrate_disentangling_beta(d, alpha, sweep(0.3 * b0, 1.7 * b0, 29), 0, o);
    };
    BetaResult a = run(1.7);
    CHECK(std::abs(a.beta_star / (kPi / 3.4) - 1.0) < 0.02);
    BetaResult b = run(3.4);
    CHECK(std::abs(b.beta_star / (kPi / 6.8) - 1.0) < 0.02);
    // Doubling alpha halves beta*.
    CHECK(std::abs(b.beta_star / a.beta_star - 0.5) < 0.02);
    CHECK(a.asymmetry_star >= 0.0);
    CHECK(a.report.params.at("beta_star").uncertainty >= 0.0);
    // No cat: flat response.
    CHECK_THROWS_AS(calibrate_disentangling_beta(d, 0.0, sweep(0.2, 1.5, 15), 0, o), Error);
    try {
        calibrate_disentangling_beta(d, 0.0, sweep(0.2, 1.5, 15), 0, o);
    } catch (const Error &err) {
        CHECK(err.kind() == "bracket_error");
    }
}

TEST_CASE("Ramsey fit recovers T1 and chi") {
    DeviceParams d = default_device();
    d.modes[1].chi_hz = 33e3;
    RamseyResult g = ramsey_mode_fit(d, bob_ramsey());
    CHECK(std::abs(g.t1_s / 37e-6 - 1.0) < 0.05);
    CHECK(std::abs(g.detuning) < 5.0 * g.detuning_error + 1e-9);
    ChiResult c = ramsey_chi(d, bob_ramsey());
    CHECK(std::abs(c.chi_hz / 33e3 - 1.0) < 0.02);
    CHECK(c.report.ground_truth.at("chi_hz") == 33e3);

    // A mode detuning shows up in the fitted detuning.
    d.modes[1].detuning_hz = 20e3;
    RamseyResult det = ramsey_mode_fit(d, bob_ramsey());
    CHECK(std::abs(det.detuning / (kTwoPi * 20e3) - 1.0) < 0.01);
}

TEST_CASE("Ramsey degeneracy and aliasing") {
    DeviceParams d = default_device();
    RamseyOptions r = bob_ramsey();
    r.delta_omega = 0.0;
    r.times = sweep(0.0, 60e-6, 41);
    try {
        ramsey_mode_fit(d, r);
        FAIL("degenerate signal accepted");
    } catch (const Error &e) {
        CHECK(e.kind() == "fit_error");
    }
    // Artificial detuning beyond the sweep Nyquist frequency warns.
    std::vector<double> t = sweep(0.0, 60e-6, 41);
    std::vector<double> y, err;
    double w = kTwoPi * 300e3;
    for (double ti : t) {
        y.push_back(0.6 * std::cos(2.0 * std::exp(-ti / 74e-6) * std::sin(w * ti)));
        err.push_back(0.01);
    }
    int warnings = 0;
    auto prev = set_warning_handler([&](const std::string &) { ++warnings; });
    try {
        RamseyResult a = fit_ramsey(t, y, err, w);
        CHECK(std::find(a.report.flags.begin(), a.report.flags.end(), "aliasing") != a.report.flags.end());
    } catch (const Error &) {
    }
    set_warning_handler(prev);
    CHECK(warnings >= 1);
}

TEST_CASE("Ramsey fit on synthetic data") {
    std::vector<double> t = sweep(0.0, 60e-6, 201), y, err;
    double w = kTwoPi * 120e3, t1 = 40e-6;
    for (double ti : t) {
        y.push_back(0.55 * std::cos(1.7 * std::exp(-ti / (2.0 * t1)) * std::sin(w * ti)));
        err.push_back(1e-4);
    }
    RamseyResult r = fit_ramsey(t, y, err, kTwoPi * 100e3);
    CHECK(std::abs(r.t1_s / t1 - 1.0) < 1e-3);
    CHECK(std::abs(r.omega / w - 1.0) < 1e-5);
    CHECK(std::abs(r.detuning - kTwoPi * 20e3) < 10.0);
    CHECK(std::abs(r.amplitude - 1.7) < 1e-3);
    CHECK_THROWS_AS(fit_ramsey({0.0, 1.0}, {1.0, 1.0}, {0.1, 0.1}, 0.0), Error);
}
