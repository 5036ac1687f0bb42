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

#include "cnod/device.hpp"
#include "doctest.h"

using namespace cnod;

TEST_CASE("kerr estimate from dispersive shifts") {
    DeviceParams d = load_device("alice.chi_hz = 220e3\nbob.chi_hz = 33e3\ntransmon.anharmonicity_hz = 194e6\n");
    CHECK(std::abs(d.kerr_hz(0, 1) - 18.71) < 0.05);
    CHECK(std::abs(d.kerr_hz(0, 0) - 124.74) < 0.05);
    CHECK(d.kerr_hz(0, 1) == d.kerr_hz(1, 0));
    CHECK(d.kerr_hz(1, 1) > 0.0);

    DeviceParams scaled = d;
    scaled.modes[0].chi_hz *= 2.0;
    scaled.modes[1].chi_hz *= 2.0;
    CHECK(std::abs(scaled.kerr_hz(0, 1) / d.kerr_hz(0, 1) - 4.0) < 1e-12);
}

TEST_CASE("kerr overrides") {
    DeviceParams d = load_device("kerr.01_hz = 5\n");
    CHECK(d.kerr_hz(0, 1) == 5.0);
    CHECK(d.kerr_hz(1, 0) == 5.0);
}

TEST_CASE("speedup ratio") {
    CHECK(std::abs(speedup_ratio(476e-9, 220e3) - 14.3) < 0.05);
    CHECK(std::abs(speedup_ratio(620e-9, 32e3) - 75.6) < 0.1);
    double chi = 100e3;
    CHECK(std::abs(speedup_ratio(3.0 * kPi / (kTwoPi * chi), chi) - 1.0) < 1e-12);
    CHECK(std::abs(speedup_ratio(1e-6, 2 * chi) * 2.0 - speedup_ratio(1e-6, chi)) < 1e-12);
}

TEST_CASE("config parsing errors") {
    try {
        load_device("alice.t1_s = -1\n");
        FAIL("expected validation error");
    } catch (const Error &e) {
        CHECK(e.kind() == "validation_error");
        CHECK(std::string(e.what()).find("alice.t1_s") != std::string::npos);
    }
    try {
        load_device("alice.chi_hz 220e3\n");
        FAIL("expected parse error");
    } catch (const Error &e) {
        CHECK(e.kind() == "parse_error");
    }
    CHECK_THROWS_AS(load_device("alice.nonsense = 1\n"), Error);
}

TEST_CASE("config round trip and hash") {
    DeviceParams d = default_device();
    DeviceParams e = load_device(device_to_config(d));
    CHECK(config_hash(d) == config_hash(e));
    DeviceParams f = load_device("# comment\nsim.truncation = 30\n");
    CHECK(f.truncation == 30);
    CHECK(config_hash(f) != config_hash(d));
}

TEST_CASE("zero-detuning defaults") {
    DeviceParams d = default_device();
    for (const auto &m : d.modes) {
        CHECK(m.detuning_hz == 0.0);
    }
    CHECK(d.ancilla_dephasing_rate() >= 0.0);
}
