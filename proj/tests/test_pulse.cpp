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
#include <cstdio>

#include "cnod/pulse.hpp"
#include "doctest.h"

using namespace cnod;

namespace {

AntiSymmetricSpec two_mode_spec() {
    AntiSymmetricSpec s;
    s.sigma_s = 144e-9;
    s.duration_s = 288e-9;
    s.amplitude = 2e7;
    s.target_null_hz = -220e3;
    return s;
}

double max_abs_sample(const PulseShape &p) {
    double m = 0.0;
    for (auto v : p.samples) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

}  // namespace

TEST_CASE("anti-symmetric pulse is odd in time") {
    PulseShape p = make_antisymmetric(two_mode_spec());
    std::size_t n = p.samples.size();
    cx sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        CHECK(std::abs(p.samples[k] + p.samples[n - 1 - k]) <= 1e-12 * max_abs_sample(p));
        sum += p.samples[k] * p.dt;
    }
    CHECK(std::abs(sum) <= 1e-12 * 2e7 * p.duration());
}

TEST_CASE("spectral null at the carrier") {
    PulseShape p = make_antisymmetric(two_mode_spec());
    CHECK(null_depth(p, p.carrier_detuning_hz) < 1e-6);
    AntiSymmetricSpec gs = two_mode_spec();
    PulseShape g = make_gaussian(gs);
    CHECK(null_depth(g, g.carrier_detuning_hz) > 0.99);

    Spectrum s = spectrum(p, 8);
    CHECK(s.padding_factor >= 8);
    // S(carrier + f) = -S(carrier - f) for the sampled grid.
    double peak = 0.0;
    for (auto v : s.values) {
        peak = std::max(peak, std::abs(v));
    }
    for (double f : {0.3e6, 1.1e6, 2.7e6}) {
        cx up = spectrum_at(p, p.carrier_detuning_hz + f);
        cx dn = spectrum_at(p, p.carrier_detuning_hz - f);
        CHECK(std::abs(up + dn) <= 1e-9 * peak);
    }
}

TEST_CASE("parseval") {
    PulseShape p = make_antisymmetric(two_mode_spec());
    double energy = 0.0;
    for (auto v : p.samples) {
        energy += std::norm(v) * p.dt;
    }
    Spectrum s = spectrum(p, 16);
    double spec = 0.0;
    for (auto v : s.values) {
        spec += std::norm(v) * s.resolution_hz;
    }
    CHECK(std::abs(spec / energy - 1.0) < 1e-9);
}

TEST_CASE("two-gaussian form matches the modulated gaussian") {
    AntiSymmetricSpec s = two_mode_spec();
    PulseShape a = make_antisymmetric(s);
    PulseShape b = make_two_gaussian(s);
    REQUIRE(a.samples.size() == b.samples.size());
    double diff = 0.0;
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
        diff = std::max(diff, std::abs(a.samples[k] - b.samples[k]));
    }
    CHECK(diff <= 1e-9 * max_abs_sample(a));
}

TEST_CASE("semiclassical displacement") {
    PulseShape p = make_antisymmetric(two_mode_spec());
    cx at_null = semiclassical_displacement(p, p.carrier_detuning_hz);
    double best = 0.0;
    for (int i = -200; i <= 200; ++i) {
        best = std::max(best, std::abs(semiclassical_displacement(p, p.carrier_detuning_hz + i * 2.5e4)));
    }
    CHECK(std::abs(at_null) < 1e-6 * best);
    cx at_zero = semiclassical_displacement(p, 0.0);
    CHECK(std::abs(at_zero) > 0.0);
    cx scaled = semiclassical_displacement(p.scaled(3.0), 0.0);
    CHECK(std::abs(scaled - 3.0 * at_zero) < 1e-12 * std::abs(scaled));
}

TEST_CASE("branch trajectory agrees with the semiclassical integral") {
    PulseShape p = make_antisymmetric(two_mode_spec());
    double delta = 0.0;
    auto traj = branch_trajectory(p, 0.0);
    CHECK(std::abs(traj.back() - semiclassical_displacement(p, delta)) < 1e-12 * std::abs(traj.back()) + 1e-15);
    // Rotating branch: alpha(T) = exp(-i omega T) times the interaction-picture integral.
    double omega = -kTwoPi * 220e3;
    auto rot = branch_trajectory(p, omega);
    cx expect = std::exp(-kI * (omega * p.duration())) * semiclassical_displacement(p, omega / kTwoPi);
    CHECK(std::abs(rot.back() - expect) < 1e-10 * std::abs(traj.back()));
}

TEST_CASE("ecd comparison") {
    PulseShape c = make_antisymmetric(two_mode_spec());
    CHECK(std::abs(compare_peak_amplitude(c, c, 220e3)) < 1e-12);
    PulseShape e = make_ecd_pulse(288e-9, 11e-9, 44e-9, 1e-9, c.carrier_detuning_hz);
    double db = compare_peak_amplitude(c, e, 220e3);
    CHECK(db > 0.0);
    CHECK(std::abs(compare_peak_amplitude(c.scaled(2.0), e.scaled(5.0), 220e3) - db) < 1e-9);
    PulseShape shorter = make_ecd_pulse(200e-9, 11e-9, 44e-9, 1e-9, c.carrier_detuning_hz);
    CHECK_THROWS_AS(compare_peak_amplitude(c, shorter, 220e3), Error);
}

TEST_CASE("pulse csv round trip") {
    PulseShape p = make_antisymmetric(two_mode_spec());
    std::string path = "pulse_roundtrip_test.csv";
    write_pulse_csv(p, path, {"seed=1"});
    PulseShape q = read_pulse_csv(path);
    std::remove(path.c_str());
    CHECK(q.dt == p.dt);
    CHECK(q.carrier_detuning_hz == p.carrier_detuning_hz);
    REQUIRE(q.samples.size() == p.samples.size());
    for (std::size_t k = 0; k < p.samples.size(); ++k) {
        CHECK(q.samples[k] == p.samples[k]);
    }
}

TEST_CASE("spec validation") {
    AntiSymmetricSpec s;
    s.sigma_s = 100e-9;
    s.duration_s = 150e-9;
    CHECK_THROWS_AS(make_antisymmetric(s), Error);
}
