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
#include <random>

#include <nlohmann/json.hpp>

#include "cnod/estimation.hpp"
#include "doctest.h"

using namespace cnod;

namespace {

CMat random_unitary(int d, std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    CMat z(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            z(i, j) = cx(n(rng), n(rng));
        }
    }
    Eigen::HouseholderQR<CMat> qr(z);
    return qr.householderQ();
}

CMat random_density(int d, int rank, std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    CMat g(d, rank);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < rank; ++j) {
            g(i, j) = cx(n(rng), n(rng));
        }
    }
    CMat r = g * g.adjoint();
    return r / r.trace().real();
}

double min_eig(const CMat &m) {
    Eigen::SelfAdjointEigenSolver<CMat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// Logical maximally mixed two-mode state: equal mixture of |+-a, +-a>.
State logical_mixed(const HilbertSpace &s, double a) {
    CMat rho = CMat::Zero(s.dim(), s.dim());
    CVec g(2);
    g << 1, 0;
    for (double sa : {1.0, -1.0}) {
        for (double sb : {1.0, -1.0}) {
            State p = product_state(s, g, {coherent_vector(s.mode_dim(0), sa * a), coherent_vector(s.mode_dim(1), sb * a)});
            rho += 0.25 * p.density();
        }
    }
    return State::from_density(rho, s);
}

}  // namespace

TEST_CASE("fidelity basics") {
    int n = 30;
    CVec v0 = fock_vector(n, 0);
    CVec c1 = coherent_vector(n, 1.0);
    CMat r0 = v0 * v0.adjoint();
    CMat r1 = c1 * c1.adjoint();
    CHECK(fidelity(r0, r0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(fidelity(r0, r1) - std::exp(-1.0)) < 1e-6);
    CVec v1 = fock_vector(n, 1);
    CHECK(fidelity(r0, v1 * v1.adjoint()) < 1e-12);
    std::mt19937_64 rng(3);
    for (int k = 0; k < 5; ++k) {
        CMat a = random_density(6, 1 + k % 3, rng);
        CMat b = random_density(6, 2 + k % 4, rng);
        double f = fidelity(a, b);
        CHECK(std::abs(f - fidelity(b, a)) < 1e-9);
        CMat u = random_unitary(6, rng);
        CHECK(std::abs(f - fidelity(u * a * u.adjoint(), u * b * u.adjoint())) < 1e-9);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
    }
    CMat bad = r0;
    bad(1, 1) = -0.5;
    bad(0, 0) = 1.5;
    CHECK_THROWS_AS(fidelity(bad, r0), Error);
}

TEST_CASE("MLE recovers the maximally mixed state") {
    HilbertSpace s({4});
    CMat mixed = CMat::Zero(8, 8);
    mixed.topLeftCorner(4, 4) = CMat::Identity(4, 4) / 4.0;
    State st = State::from_density(mixed, s);
    CharFuncGrid data = evaluate_exact(st, plane_grid("a", 15, 3.0, 1));
    ReconstructionResult r = mle_reconstruct(data, {4});
    CHECK(trace_distance(r.rho, CMat::Identity(4, 4) / 4.0) < 0.01);
    CHECK(min_eig(r.rho) >= -1e-9);
    CHECK(std::abs(r.rho.trace().real() - 1.0) < 1e-9);
}

TEST_CASE("MLE round trip on a cat") {
    HilbertSpace s({30});
    State cat = cat_state(s, 0, 1.2, 0.0);
    int dim = 12;
    CMat truth = mode_density(cat, {0}).topLeftCorner(dim, dim);
    truth /= truth.trace().real();
    CharFuncGrid g = plane_grid("a", 25, 3.4, 1);
    ReconstructionResult exact = mle_reconstruct(evaluate_exact(cat, g), {dim});
    CHECK(fidelity(exact.rho, truth) >= 0.999);
    // Likelihood is non-increasing.
    for (std::size_t i = 1; i < exact.history.size(); ++i) {
        CHECK(exact.history[i] <= exact.history[i - 1]);
    }
    DeviceParams d = select_modes(default_device(), {0});
    MeasureOptions o;
    o.shots = 4000;
    o.seed = 21;
    CharFuncGrid noisy = measure_char_func(cat, g, d, o);
    ReconstructionResult r = mle_reconstruct(noisy, {dim});
    CHECK(fidelity(r.rho, truth) >= 0.98);
    CHECK(min_eig(r.rho) >= -1e-9);
    CHECK(std::abs(r.rho.trace().real() - 1.0) < 1e-9);
    CHECK(r.final_likelihood <= r.history.front());
    auto j = nlohmann::json::parse(reconstruction_json(r, 0.99));
    CHECK(j["iterations"].get<int>() == r.iterations);
    CHECK(j.contains("final_likelihood"));
    CHECK(j["fidelity"].get<double>() == doctest::Approx(0.99));
}

TEST_CASE("MLE warns on underdetermined data and rejects mismatched dims") {
    HilbertSpace s({10});
    CharFuncGrid tiny = evaluate_exact(vacuum(s), make_point_set({{0.3}, {cx(0.0, 0.5)}}));
    int warnings = 0;
    auto prev = set_warning_handler([&](const std::string &) { ++warnings; });
    MleConfig c;
    c.max_iterations = 50;
    mle_reconstruct(tiny, {6}, c);
    set_warning_handler(prev);
    CHECK(warnings >= 1);
    CHECK_THROWS_AS(mle_reconstruct(tiny, {6, 6}, c), Error);
}

TEST_CASE("witness on ideal, product and mixed states") {
    HilbertSpace s({24, 24});
    DeviceParams d = default_device();
    State bell = cat_target_state(CatTarget::Bell, {1.7, 1.7}, s);
    WitnessResult w = witness_protocol(bell, 1.7, 1.7, d);
    CHECK(w.f >= 0.99);
    CHECK(w.f == doctest::Approx(0.25 * (w.ii + w.zz + w.xx - w.yy)));
    CHECK(w.zz <= 1.0 + 1e-9);

    // |a>|a> is the logical |00>: ZZ = 1, XX - YY = 0, so F = 1/2 (the classical bound).
    CVec g(2);
    g << 1, 0;
    State prod = product_state(s, g, {coherent_vector(24, 1.7), coherent_vector(24, 1.7)});
    WitnessResult wp = witness_protocol(prod, 1.7, 1.7, d);
    CHECK(std::abs(wp.f - 0.5) < 0.01);

    State mixed = logical_mixed(s, 1.7);
    CHECK(std::abs(witness_protocol(mixed, 1.7, 1.7, d).f - 0.25) < 0.01);

    // Compiled separable states stay below the classical bound.
    GateSequence ps = compile_cat_sequence(CatTarget::Product, {1.7, 1.7}, d);
    WitnessOptions wo;
    wo.shots = 4000;
    WitnessResult wc = witness_protocol(vacuum(s), ps, 1.7, 1.7, d, wo);
    CHECK(wc.f <= 0.5 + 3.0 * wc.std_error);
    CHECK(wc.std_error > 0.0);

    int warnings = 0;
    auto prev = set_warning_handler([&](const std::string &) { ++warnings; });
    witness_protocol(bell, 1.5, 1.7, d);
    CHECK(warnings == 1);
    set_warning_handler(prev);
}

TEST_CASE("direct fidelity estimation from four points") {
    HilbertSpace s({24, 24});
    auto pts = dfe_points(1.7, 1.7);
    CHECK(pts.size() == 4);
    State bell = cat_target_state(CatTarget::Bell, {1.7, 1.7}, s);
    CHECK(direct_fidelity_estimation(evaluate_exact(bell, make_point_set(pts)), 1.7, 1.7) >= 0.99);
    State prod = cat_target_state(CatTarget::Product, {1.7, 1.7}, s);
    double fp = direct_fidelity_estimation(evaluate_exact(prod, make_point_set(pts)), 1.7, 1.7);
    CHECK(std::abs(fp - 0.5) < 0.01);
    double fm = direct_fidelity_estimation(evaluate_exact(logical_mixed(s, 1.7), make_point_set(pts)), 1.7, 1.7);
    CHECK(std::abs(fm - 0.25) < 0.01);
    auto wrong = pts;
    wrong[2][0] = 3.0;
    CHECK_THROWS_AS(direct_fidelity_estimation(evaluate_exact(bell, make_point_set(wrong)), 1.7, 1.7), Error);
}

TEST_CASE("target fits") {
    int n = 24;
    TargetParams p;
    p.alpha = 1.7;
    CMat cat = target_density(n, TargetKind::PureCat, p);
    TableInput in;
    in.mode = "Alice";
    in.state_type = "single-cat";
    in.rho = cat;
    in.initial = p;
    TableEntry e = fit_target(in);
    CHECK(e.fidelity_nominal == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(e.fidelity >= 1.0 - 1e-9);
    CHECK(std::abs(e.params.delta) < 1e-3);
    // A displaced, rotated cat is found from the nominal guess.
    TargetParams q{1.6, cx(0.05, -0.04), 0.1, 0.08};
    in.rho = target_density(n, TargetKind::PureCat, q);
    TableEntry f = fit_target(in);
    CHECK(f.fidelity > 0.999);
    CHECK(f.fidelity > f.fidelity_nominal);
    // Mixed logical target.
    in.kind = TargetKind::MixedLogical;
    in.rho = target_density(n, TargetKind::MixedLogical, p);
    CHECK(fit_target(in).fidelity > 0.999);
    auto j = nlohmann::json::parse(table_json({e, f}));
    CHECK(j.size() == 2);
    CHECK(j[0]["mode"] == "Alice");
}
