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

#include "cnod/hilbert.hpp"
#include "doctest.h"

using namespace cnod;

namespace {

// Brute-force coherent amplitudes from the Poisson formula.
CVec poisson_coherent(int n, cx alpha) {
    CVec v(n);
    double fact = 1.0;
    for (int k = 0; k < n; ++k) {
        if (k > 0) {
            fact *= k;
        }
        v(k) = std::exp(-std::norm(alpha) / 2.0) * std::pow(alpha, k) / std::sqrt(fact);
    }
    return v;
}

}  // namespace

TEST_CASE("space layout is ancilla first") {
    HilbertSpace s({3, 4});
    CHECK(s.dim() == 24);
    CHECK(s.index(1, {2, 3}) == (1 * 3 + 2) * 4 + 3);
    CHECK(s.stride(1) == 1);
    CHECK(s.stride(0) == 4);
    CHECK_THROWS_AS(HilbertSpace({1}), Error);
    CHECK_THROWS_AS(HilbertSpace(std::vector<int>{}), Error);
}

TEST_CASE("ladder operators") {
    HilbertSpace s({6});
    Operator a = annihilation(s, 0);
    CVec one = CVec::Zero(s.dim());
    one(s.index(0, {1})) = 1.0;
    CVec out = a.matrix * one;
    CHECK(std::abs(out(s.index(0, {0})) - 1.0) < 1e-14);
    CVec zero = CVec::Zero(s.dim());
    zero(s.index(0, {0})) = 1.0;
    CHECK((a.matrix * zero).norm() < 1e-14);
    Operator n = number_op(s, 0);
    for (int k = 0; k < 6; ++k) {
        CHECK(std::abs(n.matrix(s.index(1, {k}), s.index(1, {k})) - double(k)) < 1e-14);
    }
    CHECK_THROWS_AS(annihilation(s, 1), Error);
}

TEST_CASE("displacement operator") {
    HilbertSpace s({40});
    Operator d0 = displacement_op(s, 0, 0.0);
    CHECK(max_abs(d0.matrix - CMat::Identity(s.dim(), s.dim())) < 1e-14);
    Operator d1 = displacement_op(s, 0, 1.0);
    int i0 = s.index(0, {0});
    CHECK(std::abs(std::abs(d1.matrix(i0, i0)) - std::exp(-0.5)) < 1e-8);
    CHECK(d1.is_unitary(1e-6));

    // BCH: D(a) D(b) = exp((a b* - a* b) / 2) D(a + b).
    cx a = 1.0, b = kI;
    CMat lhs = displacement_op(s, 0, a).matrix * displacement_op(s, 0, b).matrix;
    CMat rhs = std::exp((a * std::conj(b) - std::conj(a) * b) / 2.0) * displacement_op(s, 0, a + b).matrix;
    // Compare on the low-Fock block where truncation is harmless.
    CHECK(max_abs((lhs - rhs).topLeftCorner(20, 20)) < 1e-8);
}

TEST_CASE("displacement elements match the matrix exponential") {
    // A large truncation makes the exponential exact on the compared block.
    CMat exact = mode_displacement(80, cx(0.7, -0.4));
    CMat rec = displacement_elements(30, cx(0.7, -0.4));
    CHECK(max_abs((exact - rec).topLeftCorner(20, 20)) < 1e-10);
}

TEST_CASE("displacement truncation warning") {
    int warnings = 0;
    auto old = set_warning_handler([&](const std::string &) { ++warnings; });
    HilbertSpace s({8});
    displacement_op(s, 0, 3.0);
    set_warning_handler(old);
    CHECK(warnings > 0);
}

TEST_CASE("coherent and cat states") {
    HilbertSpace s({40});
    State c = coherent_state(s, 0, cx(1.2, 0.3));
    CVec bf = poisson_coherent(40, cx(1.2, 0.3));
    CHECK((c.ket().head(40) - bf).norm() < 1e-10);

    State vac = vacuum(s);
    State cat0 = cat_state(s, 0, 0.0, 0.0);
    CHECK(std::abs(std::abs(vac.ket().dot(cat0.ket())) - 1.0) < 1e-12);

    double alpha = 1.7;
    CVec plus = poisson_coherent(40, alpha), minus = poisson_coherent(40, -alpha);
    CVec raw = plus + minus;
    double n_expected = 1.0 / std::sqrt(2.0 * (1.0 + std::exp(-2.0 * alpha * alpha)));
    CHECK(std::abs(1.0 / raw.norm() - n_expected) < 1e-8);
    State cat = cat_state(s, 0, alpha, 0.0);
    CHECK(std::abs(cat.ket().norm() - 1.0) < 1e-12);
    for (int k = 1; k < 40; k += 2) {
        CHECK(std::abs(cat.ket()(s.index(0, {k}))) < 1e-10);
    }
}

TEST_CASE("partial trace") {
    HilbertSpace s({5, 6});
    CVec a = coherent_vector(5, 0.4).normalized(), b = coherent_vector(6, cx(0.1, 0.3)).normalized();
    CVec anc(2);
    anc << 1.0, 0.0;
    State psi = product_state(s, anc, {a, b});
    CMat ra = partial_trace(psi, {0}, false);
    CHECK(max_abs(ra - a * a.adjoint()) < 1e-12);
    CHECK(std::abs(ra.trace() - 1.0) < 1e-10);
    CMat rb_from_rho = partial_trace(psi.density(), s, {1}, false);
    CHECK(max_abs(rb_from_rho - b * b.adjoint()) < 1e-12);
    // Order independence of the scalar trace.
    CHECK(std::abs(partial_trace(psi, {}, false)(0, 0) - 1.0) < 1e-12);
    CMat with_anc = partial_trace(psi, {}, true);
    CHECK(with_anc.rows() == 2);
}

TEST_CASE("bell-cat marginal is the classical mixture") {
    HilbertSpace s({20, 20});
    double alpha = 1.7;
    CVec pp = kron(coherent_vector(20, alpha), coherent_vector(20, alpha)).col(0);
    CVec mm = kron(coherent_vector(20, -alpha), coherent_vector(20, -alpha)).col(0);
    CVec modes = (pp + mm).normalized();
    CVec anc(2);
    anc << 1.0, 0.0;
    State bell = State::from_ket(kron(anc, modes).col(0), s);
    CMat ra = partial_trace(bell, {0}, false);
    CVec p = coherent_vector(20, alpha), m = coherent_vector(20, -alpha);
    CMat mix = 0.5 * (p * p.adjoint() + m * m.adjoint());
    // Mixture is (nearly) rank two; fidelity through the overlap of its purification.
    Eigen::SelfAdjointEigenSolver<CMat> es(mix);
    CMat sq = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
              es.eigenvectors().adjoint();
    Eigen::SelfAdjointEigenSolver<CMat> es2(sq * ra * sq);
    double f = std::pow(es2.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum(), 2);
    CHECK(f >= 0.99);
}

TEST_CASE("state validation") {
    HilbertSpace s({3});
    CVec bad = CVec::Zero(6);
    bad(0) = 2.0;
    CHECK_THROWS_AS(State::from_ket(bad, s).validate(), Error);
    CMat rho = CMat::Identity(6, 6) / 6.0;
    CHECK_NOTHROW(State::from_density(rho, s).validate());
}
