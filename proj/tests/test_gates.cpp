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

#include "cnod/gates.hpp"
#include "doctest.h"

using namespace cnod;

namespace {

double overlap(const State &a, const State &b) {
    return std::norm(a.ket().dot(b.ket()));
}

double ancilla_purity(const State &s) {
    CMat r = partial_trace(s, {}, true);
    return (r * r).trace().real();
}

}  // namespace

TEST_CASE("ideal cnod algebra") {
    HilbertSpace s({40});
    Operator c = ideal_cnod(s, {1.3});
    CHECK(c.is_unitary(1e-8));
    CMat sq = c.matrix * c.matrix;
    CHECK(max_abs((sq + CMat::Identity(s.dim(), s.dim())).topLeftCorner(20, 20)) < 1e-8);
    // Anti-diagonal ancilla blocks.
    int m = s.mode_block();
    CHECK(max_abs(c.matrix.topLeftCorner(m, m)) == 0.0);
    CHECK(max_abs(c.matrix.bottomRightCorner(m, m)) == 0.0);

    Operator c0 = ideal_cnod(s, {0.0});
    Operator ry = rotation(s, 'y', kPi);
    CHECK(max_abs(c0.matrix - ry.matrix) < 1e-14);

    CVec anc(2);
    anc << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    State in = product_state(s, anc, {fock_vector(40, 0)});
    CVec out = c.matrix * in.ket();
    CVec expect = CVec::Zero(s.dim());
    expect.tail(m) = coherent_vector(40, 1.3 / 2.0);
    expect.head(m) = -coherent_vector(40, -1.3 / 2.0);
    expect /= std::sqrt(2.0);
    CHECK(std::abs(std::abs(expect.dot(out)) - 1.0) < 1e-8);
}

TEST_CASE("multi-mode cnod factorizes") {
    HilbertSpace s({12, 12});
    cx a = cx(0.4, 0.2), b = cx(-0.3, 0.5);
    CMat full = ideal_cnod(s, {a, b}).matrix;
    CMat pg = proj_g(s).matrix, pe = proj_e(s).matrix;
    CMat cond = pg * displacement_op(s, 0, a / 2.0).matrix * displacement_op(s, 1, b / 2.0).matrix +
                pe * displacement_op(s, 0, -a / 2.0).matrix * displacement_op(s, 1, -b / 2.0).matrix;
    CMat expect = rotation(s, 'y', kPi).matrix * cond;
    CHECK(max_abs(full - expect) < 1e-10);
}

TEST_CASE("rotations") {
    HilbertSpace s({3});
    CMat ry = rotation(s, 'y', kPi).matrix;
    CHECK(max_abs(ry * ry + CMat::Identity(6, 6)) < 1e-14);
    CVec g = vacuum(s).ket();
    CVec out = rotation(s, 'y', kPi / 2.0).matrix * g;
    CHECK(std::abs(out(s.index(0, {0})) - 1.0 / std::sqrt(2.0)) < 1e-14);
    CHECK(std::abs(out(s.index(1, {0})) - 1.0 / std::sqrt(2.0)) < 1e-14);
    double bad[3] = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(Gate::rotation(bad, 1.0), Error);
}

TEST_CASE("sequence serialization round trips exactly") {
    DeviceParams d = default_device();
    GateSequence seq = compile_cat_sequence(CatTarget::Bell, {1.7, 1.7}, d);
    double axis[3] = {0.6, 0.0, 0.8};
    seq.gates.push_back(Gate::rotation(axis, 0.1234567890123));
    seq.gates.push_back(Gate::displace(1, cx(0.1, -0.2)));
    seq.gates.push_back(Gate::digital_rotation(0, -0.05));
    seq.gates.push_back(Gate::wait(1e-6));
    std::string text = serialize_sequence(seq);
    GateSequence back = parse_sequence(text);
    CHECK(back == seq);
    CHECK(serialize_sequence(back) == text);
    CHECK_THROWS_AS(parse_sequence("ROT q 1\n"), Error);
    CHECK_THROWS_AS(parse_sequence("BOGUS 1\n"), Error);
}

TEST_CASE("compilation is deterministic") {
    DeviceParams d = default_device();
    for (CatTarget t : {CatTarget::SingleA, CatTarget::SingleB, CatTarget::Product, CatTarget::Bell}) {
        std::string a = serialize_sequence(compile_cat_sequence(t, {1.7, 1.7}, d));
        std::string b = serialize_sequence(compile_cat_sequence(t, {1.7, 1.7}, d));
        CHECK(a == b);
    }
    CHECK_THROWS_AS(compile_cat_sequence(CatTarget::SingleA, {0.0, 1.0}, d), Error);
    CHECK_THROWS_AS(compile_cat_sequence(CatTarget::Bell, {1.0, 0.0}, d), Error);
}

TEST_CASE("compiled timings match the reported generation times") {
    DeviceParams d = default_device();
    CHECK(std::abs(compile_cat_sequence(CatTarget::SingleA, {1.7, 1.7}, d).nominal_duration_s - 476e-9) < 1e-12);
    CHECK(std::abs(compile_cat_sequence(CatTarget::SingleB, {1.7, 1.7}, d).nominal_duration_s - 620e-9) < 1e-12);
    CHECK(std::abs(compile_cat_sequence(CatTarget::Bell, {1.7, 1.7}, d).nominal_duration_s - 1312e-9) < 1e-12);
}

TEST_CASE("ideal bell-cat generation") {
    DeviceParams d = default_device();
    HilbertSpace s({30, 30});
    GateSequence seq = compile_cat_sequence(CatTarget::Bell, {1.7, 1.7}, d);
    State out = apply_sequence(vacuum(s), seq);
    State target = cat_target_state(CatTarget::Bell, {1.7, 1.7}, s);
    // Each mode keeps a branch-dependent +-i beta/2 shift after disentangling, so the
    // overlap is exp(-sum beta_i^2 / 4) up to e^{-2|alpha|^2} terms.
    double beta = kPi / (8.0 * 1.7);
    double predicted = std::exp(-2.0 * beta * beta / 4.0);
    CHECK(std::abs(overlap(out, target) - predicted) < 2e-3);
    CHECK(ancilla_purity(out) >= 1.0 - 4.0 * std::exp(-1.7 * 1.7));
}

TEST_CASE("ideal single and product cats") {
    DeviceParams d = default_device();
    HilbertSpace s({30, 30});
    double beta = kPi / (4.0 * 1.7);
    double predicted = std::exp(-beta * beta / 4.0);
    for (CatTarget t : {CatTarget::SingleA, CatTarget::SingleB}) {
        State out = apply_sequence(vacuum(s), compile_cat_sequence(t, {1.7, 1.7}, d));
        State target = cat_target_state(t, {1.7, 1.7}, s);
        CHECK(std::abs(overlap(out, target) - predicted) < 2e-3);
        CHECK(ancilla_purity(out) >= 1.0 - 4.0 * std::exp(-1.7 * 1.7));
    }
    State prod = apply_sequence(vacuum(s), compile_cat_sequence(CatTarget::Product, {1.7, 1.7}, d));
    CHECK(std::abs(overlap(prod, cat_target_state(CatTarget::Product, {1.7, 1.7}, s)) - predicted * predicted) <
          4e-3);
    State a = apply_sequence(vacuum(s), compile_cat_sequence(CatTarget::SingleA, {1.7, 1.7}, d));
    CMat rb = partial_trace(a, {1}, false);
    CHECK(std::abs(rb(0, 0) - 1.0) < 1e-8);
}

TEST_CASE("disentangling residual shrinks with cat size") {
    DeviceParams d = default_device();
    HilbertSpace s({40});
    auto deficit = [&](double alpha) {
        HilbertSpace one({40, 2});
        State out = apply_sequence(vacuum(one), compile_cat_sequence(CatTarget::SingleA, {alpha, 1.0}, d));
        return 1.0 - overlap(out, cat_target_state(CatTarget::SingleA, {alpha, 1.0}, one));
    };
    CHECK(deficit(2.5) < deficit(1.7));
}

TEST_CASE("qc map") {
    HilbertSpace s({40});
    double a = 3.4;
    double beta = kPi / (2.0 * a);
    // The disentangling step shifts both branches by i beta / 2, so the overlap with the
    // unshifted approximate form is exp(-beta^2 / 4) up to e^{-|a|^2 / 2} corrections.
    double bound = std::exp(-beta * beta / 4.0) - std::exp(-a * a / 2.0);
    QcMapResult r0 = qc_map(0.0, 0.0, {a}, {beta}, s);
    CHECK(r0.overlap >= bound);
    QcMapResult r1 = qc_map(kPi, 0.0, {a}, {beta}, s);
    CHECK(r1.overlap >= bound);
    CHECK(std::abs(r0.overlap - r1.overlap) < 1e-10);
    QcMapResult even = qc_map(-kPi / 2.0, 0.0, {a}, {beta}, s);
    CHECK(even.overlap >= bound);
    // Exact closed form of the mapped state (before the small-beta approximation).
    for (double theta : {0.0, 0.7, -kPi / 2.0}) {
        double phi = 0.3;
        QcMapResult r = qc_map(theta, phi, {a}, {beta}, s);
        cx c = std::cos(theta / 2.0), sn = kI * std::sin(theta / 2.0) * std::exp(kI * phi);
        cx ph = std::exp(-kI * (a * beta / 2.0));
        auto coh = [&](cx z) { return coherent_vector(40, z); };
        CVec g = c * ph * coh(a / 2.0 - kI * beta / 2.0) + sn * coh(-a / 2.0 - kI * beta / 2.0);
        CVec e = c * coh(a / 2.0 + kI * beta / 2.0) - sn * ph * coh(-a / 2.0 + kI * beta / 2.0);
        CVec full(2 * 40);
        full << g, e;
        full /= full.norm();
        CHECK(std::abs(std::abs(full.dot(r.state.ket())) - 1.0) < 1e-8);
    }
    CHECK_THROWS_AS(qc_map(0.0, 0.0, {a}, {0.1}, s), Error);
}

TEST_CASE("geometric phase tracker basics") {
    DeviceParams d = default_device();
    GateSequence one;
    one.gates.push_back(Gate::displace(0, cx(0.3, 0.4)));
    CHECK(std::abs(geometric_phase_of(one, d)) < 1e-14);
    GateSequence collinear;
    collinear.gates.push_back(Gate::displace(0, 0.3));
    collinear.gates.push_back(Gate::displace(0, -0.8));
    collinear.gates.push_back(Gate::displace(0, 0.2));
    CHECK(std::abs(geometric_phase_of(collinear, d)) < 1e-14);

    // With an exact frame correction the echo is collinear and leaves no relative phase.
    GateSequence echo;
    echo.gates.push_back(Gate::cnod({1.0, 0.0}, 144e-9));
    echo.gates.push_back(Gate::cnod({1.0, 0.0}, 144e-9));
    CHECK(std::abs(geometric_phase_of(echo, d)) < 1e-10);
    d.frame_error_rad = 0.05;
    double phi1 = geometric_phase_of(echo, d);
    // Branch picture: the returning branch is rotated by twice the error, area |g|^2 sin(2 err) / 4.
    CHECK(std::abs(std::abs(phi1) - std::sin(0.1) / 4.0) < 1e-6);
    // Area scaling: doubling the amplitude quadruples the phase.
    GateSequence echo2;
    echo2.gates.push_back(Gate::cnod({2.0, 0.0}, 144e-9));
    echo2.gates.push_back(Gate::cnod({2.0, 0.0}, 144e-9));
    double phi2 = geometric_phase_of(echo2, d);
    CHECK(std::abs(phi2 / phi1 - 4.0) < 1e-6);

    GateSequence unsupported;
    unsupported.gates.push_back(Gate::rotation('y', kPi / 2.0));
    CHECK_THROWS_AS(geometric_phase_of(unsupported, d), Error);
}

TEST_CASE("cnod pulse plan") {
    DeviceParams d = default_device();
    CnodPulsePlan plan = plan_cnod_pulses(d, {cx(1.2, 0.3), 0.0}, 144e-9);
    REQUIRE(plan.first.size() == 2);
    // Ground branch of Alice ends at alpha / 2; excited branch at zero.
    auto g = branch_trajectory(plan.first[0], 0.0);
    CHECK(std::abs(g.back() - cx(0.6, 0.15)) < 1e-10);
    auto e = branch_trajectory(plan.first[0], -d.chi_angular(0));
    CHECK(std::abs(e.back()) < 1e-6);
    CHECK(null_depth(plan.first[0], plan.first[0].carrier_detuning_hz) < 1e-6);
    CHECK(std::abs(plan.frame_angle[0] + d.chi_angular(0) * 144e-9) < 1e-12);
}
