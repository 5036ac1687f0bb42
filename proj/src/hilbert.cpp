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

#include "cnod/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace cnod {

HilbertSpace::HilbertSpace(std::vector<int> mode_dims) : mode_dims_(std::move(mode_dims)) {
    if (mode_dims_.empty()) {
        throw Error("validation_error", "HilbertSpace needs at least one mode");
    }
    block_ = 1;
    for (int d : mode_dims_) {
        if (d < 2) {
            throw Error("validation_error", "mode truncation must be >= 2");
        }
        block_ *= d;
    }
}

int HilbertSpace::mode_dim(int k) const {
    if (k < 0 || k >= num_modes()) {
        throw Error("index_error", "invalid mode index " + std::to_string(k));
    }
    return mode_dims_[k];
}

int HilbertSpace::stride(int k) const {
    mode_dim(k);
    int s = 1;
    for (int j = k + 1; j < num_modes(); ++j) {
        s *= mode_dims_[j];
    }
    return s;
}

int HilbertSpace::index(int anc, const std::vector<int> &fock) const {
    if (static_cast<int>(fock.size()) != num_modes() || anc < 0 || anc > 1) {
        throw Error("index_error", "bad basis label");
    }
    int idx = anc;
    for (int k = 0; k < num_modes(); ++k) {
        if (fock[k] < 0 || fock[k] >= mode_dims_[k]) {
            throw Error("index_error", "Fock index out of range");
        }
        idx = idx * mode_dims_[k] + fock[k];
    }
    return idx;
}

Operator::Operator(CMat m, HilbertSpace s) : matrix(std::move(m)), space(std::move(s)) {
    if (matrix.rows() != space.dim() || matrix.cols() != space.dim()) {
        throw Error("dimension_error", "operator size does not match space");
    }
}

bool Operator::is_unitary(double tol) const {
    CMat id = CMat::Identity(matrix.rows(), matrix.cols());
    return max_abs(matrix.adjoint() * matrix - id) < tol;
}

bool Operator::is_hermitian(double tol) const {
    return max_abs(matrix - matrix.adjoint()) < tol;
}

Operator Operator::operator*(const Operator &other) const {
    if (space != other.space) {
        throw Error("dimension_error", "operator spaces differ");
    }
    return {matrix * other.matrix, space};
}

Operator Operator::operator+(const Operator &other) const {
    if (space != other.space) {
        throw Error("dimension_error", "operator spaces differ");
    }
    return {matrix + other.matrix, space};
}

Operator Operator::operator-(const Operator &other) const {
    if (space != other.space) {
        throw Error("dimension_error", "operator spaces differ");
    }
    return {matrix - other.matrix, space};
}

State State::from_ket(CVec ket, HilbertSpace space) {
    if (ket.size() != space.dim()) {
        throw Error("dimension_error", "ket size does not match space");
    }
    State s;
    s.kind_ = Kind::Ket;
    s.ket_ = std::move(ket);
    s.space_ = std::move(space);
    return s;
}

State State::from_density(CMat rho, HilbertSpace space) {
    if (rho.rows() != space.dim() || rho.cols() != space.dim()) {
        throw Error("dimension_error", "density matrix size does not match space");
    }
    State s;
    s.kind_ = Kind::Density;
    s.rho_ = std::move(rho);
    s.space_ = std::move(space);
    return s;
}

const CVec &State::ket() const {
    if (kind_ != Kind::Ket) {
        throw Error("state_error", "state is not a pure ket");
    }
    return ket_;
}

const CMat &State::rho() const {
    if (kind_ != Kind::Density) {
        throw Error("state_error", "state is not a density matrix");
    }
    return rho_;
}

CMat State::density() const {
    if (kind_ == Kind::Ket) {
        return ket_ * ket_.adjoint();
    }
    return rho_;
}

void State::validate(double tol) const {
    if (kind_ == Kind::Ket) {
        double n2 = ket_.squaredNorm();
        if (std::abs(n2 - 1.0) > tol) {
            throw Error("validation_error", "ket norm^2 = " + format_double(n2));
        }
        return;
    }
    cx tr = rho_.trace();
    if (std::abs(tr - 1.0) > tol) {
        throw Error("validation_error", "density trace = " + format_complex(tr));
    }
    CMat h = 0.5 * (rho_ + rho_.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-9) {
        throw Error("validation_error", "density has negative eigenvalue " +
                                            format_double(es.eigenvalues().minCoeff()));
    }
}

CMat mode_annihilation(int n) {
    CMat a = CMat::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        a(k - 1, k) = std::sqrt(static_cast<double>(k));
    }
    return a;
}

CMat mode_number(int n) {
    CMat m = CMat::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        m(k, k) = k;
    }
    return m;
}

CMat mode_displacement(int n, cx alpha) {
    if (alpha == cx(0.0)) {
        return CMat::Identity(n, n);
    }
    CMat a = mode_annihilation(n);
    CMat gen = alpha * a.adjoint() - std::conj(alpha) * a;
    return expm(gen);
}

CMat displacement_elements(int n, cx alpha) {
    // Column recursion from D(alpha)|0> = coherent state and
    // D a^dag D^dag = a^dag - alpha^*, i.e. <m|D|k+1> = (sqrt(m)<m-1|D|k> - alpha^* <m|D|k>)/sqrt(k+1).
    CMat d(n, n);
    double env = std::exp(-0.5 * std::norm(alpha));
    cx amp = env;
    for (int m = 0; m < n; ++m) {
        d(m, 0) = amp;
        amp *= alpha / std::sqrt(static_cast<double>(m + 1));
    }
    cx ac = std::conj(alpha);
    for (int k = 0; k + 1 < n; ++k) {
        double inv = 1.0 / std::sqrt(static_cast<double>(k + 1));
        for (int m = 0; m < n; ++m) {
            cx prev = m > 0 ? std::sqrt(static_cast<double>(m)) * d(m - 1, k) : cx(0.0);
            d(m, k + 1) = (prev - ac * d(m, k)) * inv;
        }
    }
    return d;
}

CVec coherent_vector(int n, cx alpha) {
    if (std::norm(alpha) > n / 4.0) {
        warn("coherent amplitude |alpha|^2=" + format_double(std::norm(alpha)) +
             " exceeds truncation/4 for truncation " + std::to_string(n));
    }
    CVec v(n);
    cx amp = std::exp(-0.5 * std::norm(alpha));
    for (int m = 0; m < n; ++m) {
        v(m) = amp;
        amp *= alpha / std::sqrt(static_cast<double>(m + 1));
    }
    return v;
}

CVec cat_vector(int n, cx alpha, double phi) {
    CVec v = coherent_vector(n, alpha) + std::exp(kI * phi) * coherent_vector(n, -alpha);
    double nv = v.norm();
    if (nv < 1e-300) {
        throw Error("validation_error", "cat state has zero norm");
    }
    return v / nv;
}

CVec fock_vector(int n, int k) {
    if (k < 0 || k >= n) {
        throw Error("index_error", "Fock index out of range");
    }
    CVec v = CVec::Zero(n);
    v(k) = 1.0;
    return v;
}

Operator tensor_embed(const CMat &op, const HilbertSpace &space, int mode) {
    int n = space.mode_dim(mode);
    if (op.rows() != n || op.cols() != n) {
        throw Error("dimension_error", "mode operator size does not match truncation");
    }
    int inner = space.stride(mode);
    int outer = space.dim() / (n * inner);
    CMat full = kron(kron(CMat::Identity(outer, outer), op), CMat::Identity(inner, inner));
    return {full, space};
}

Operator tensor_embed_ancilla(const CMat &op, const HilbertSpace &space) {
    if (op.rows() != 2 || op.cols() != 2) {
        throw Error("dimension_error", "ancilla operator must be 2x2");
    }
    int b = space.mode_block();
    return {kron(op, CMat::Identity(b, b)), space};
}

Operator identity(const HilbertSpace &space) {
    return {CMat::Identity(space.dim(), space.dim()), space};
}

Operator annihilation(const HilbertSpace &space, int mode) {
    return tensor_embed(mode_annihilation(space.mode_dim(mode)), space, mode);
}

Operator creation(const HilbertSpace &space, int mode) {
    return annihilation(space, mode).adjoint();
}

Operator number_op(const HilbertSpace &space, int mode) {
    return tensor_embed(mode_number(space.mode_dim(mode)), space, mode);
}

Operator displacement_op(const HilbertSpace &space, int mode, cx alpha) {
    int n = space.mode_dim(mode);
    if (std::norm(alpha) > n / 4.0) {
        warn("displacement |alpha|^2=" + format_double(std::norm(alpha)) + " exceeds truncation/4");
    }
    CMat d = mode_displacement(n, alpha);
    CMat dm = mode_displacement(n, -alpha);
    double err = max_abs(d * dm - CMat::Identity(n, n));
    if (err > 1e-6) {
        warn("truncation violation: |D(a)D(-a) - I| = " + format_double(err));
    }
    return tensor_embed(d, space, mode);
}

namespace {

CMat pauli(char which) {
    CMat p = CMat::Zero(2, 2);
    switch (which) {
        case 'x':
            p << 0, 1, 1, 0;
            break;
        case 'y':
            p << 0, cx(0, -1), cx(0, 1), 0;
            break;
        case 'z':
            p << 1, 0, 0, -1;
            break;
        case 'm':
            p << 0, 1, 0, 0;
            break;
        case 'g':
            p << 1, 0, 0, 0;
            break;
        case 'e':
            p << 0, 0, 0, 1;
            break;
    }
    return p;
}

}  // namespace

Operator sigma_x(const HilbertSpace &space) { return tensor_embed_ancilla(pauli('x'), space); }
Operator sigma_y(const HilbertSpace &space) { return tensor_embed_ancilla(pauli('y'), space); }
Operator sigma_z(const HilbertSpace &space) { return tensor_embed_ancilla(pauli('z'), space); }
Operator sigma_minus(const HilbertSpace &space) { return tensor_embed_ancilla(pauli('m'), space); }
Operator proj_g(const HilbertSpace &space) { return tensor_embed_ancilla(pauli('g'), space); }
Operator proj_e(const HilbertSpace &space) { return tensor_embed_ancilla(pauli('e'), space); }

State product_state(const HilbertSpace &space, const CVec &ancilla, const std::vector<CVec> &modes) {
    if (ancilla.size() != 2 || static_cast<int>(modes.size()) != space.num_modes()) {
        throw Error("dimension_error", "product_state factor count mismatch");
    }
    CMat v = ancilla;
    for (int k = 0; k < space.num_modes(); ++k) {
        if (modes[k].size() != space.mode_dim(k)) {
            throw Error("dimension_error", "mode ket size mismatch");
        }
        v = kron(v, modes[k]);
    }
    return State::from_ket(v.col(0), space);
}

State vacuum(const HilbertSpace &space) {
    CVec v = CVec::Zero(space.dim());
    v(0) = 1.0;
    return State::from_ket(v, space);
}

State coherent_state(const HilbertSpace &space, int mode, cx alpha) {
    std::vector<CVec> modes;
    for (int k = 0; k < space.num_modes(); ++k) {
        int n = space.mode_dim(k);
        modes.push_back(k == mode ? coherent_vector(n, alpha) : fock_vector(n, 0));
    }
    space.mode_dim(mode);
    CVec anc(2);
    anc << 1, 0;
    State s = product_state(space, anc, modes);
    CVec v = s.ket();
    return State::from_ket(v / v.norm(), space);
}

State cat_state(const HilbertSpace &space, int mode, cx alpha, double phi) {
    std::vector<CVec> modes;
    space.mode_dim(mode);
    for (int k = 0; k < space.num_modes(); ++k) {
        int n = space.mode_dim(k);
        modes.push_back(k == mode ? cat_vector(n, alpha, phi) : fock_vector(n, 0));
    }
    CVec anc(2);
    anc << 1, 0;
    return product_state(space, anc, modes);
}

CMat partial_trace(const CMat &rho, const HilbertSpace &space, const std::vector<int> &keep_modes,
                   bool keep_ancilla) {
    if (rho.rows() != space.dim() || rho.cols() != space.dim()) {
        throw Error("dimension_error", "density matrix size does not match space");
    }
    int nm = space.num_modes();
    std::vector<bool> keep(nm + 1, false);
    keep[0] = keep_ancilla;
    for (int k : keep_modes) {
        space.mode_dim(k);
        keep[k + 1] = true;
    }
    std::vector<int> dims = {2};
    for (int d : space.mode_dims()) {
        dims.push_back(d);
    }
    int kept_dim = 1;
    for (int f = 0; f <= nm; ++f) {
        if (keep[f]) {
            kept_dim *= dims[f];
        }
    }
    CMat out = CMat::Zero(kept_dim, kept_dim);
    int total = space.dim();
    std::vector<int> kept_index(total), traced_index(total);
    for (int i = 0; i < total; ++i) {
        int rem = i;
        std::vector<int> digits(nm + 1);
        for (int f = nm; f >= 0; --f) {
            digits[f] = rem % dims[f];
            rem /= dims[f];
        }
        int ki = 0, ti = 0;
        for (int f = 0; f <= nm; ++f) {
            if (keep[f]) {
                ki = ki * dims[f] + digits[f];
            } else {
                ti = ti * dims[f] + digits[f];
            }
        }
        kept_index[i] = ki;
        traced_index[i] = ti;
    }
    for (int j = 0; j < total; ++j) {
        for (int i = 0; i < total; ++i) {
            if (traced_index[i] == traced_index[j]) {
                out(kept_index[i], kept_index[j]) += rho(i, j);
            }
        }
    }
    return out;
}

CMat partial_trace(const State &state, const std::vector<int> &keep_modes, bool keep_ancilla) {
    if (state.is_pure()) {
        // Contract the ket directly: cheaper than forming the full density matrix.
        const HilbertSpace &space = state.space();
        int nm = space.num_modes();
        std::vector<int> dims = {2};
        for (int d : space.mode_dims()) {
            dims.push_back(d);
        }
        std::vector<bool> keep(nm + 1, false);
        keep[0] = keep_ancilla;
        for (int k : keep_modes) {
            space.mode_dim(k);
            keep[k + 1] = true;
        }
        int kept_dim = 1, traced_dim = 1;
        for (int f = 0; f <= nm; ++f) {
            (keep[f] ? kept_dim : traced_dim) *= dims[f];
        }
        CMat psi = CMat::Zero(kept_dim, traced_dim);
        const CVec &v = state.ket();
        for (int i = 0; i < space.dim(); ++i) {
            int rem = i;
            std::vector<int> digits(nm + 1);
            for (int f = nm; f >= 0; --f) {
                digits[f] = rem % dims[f];
                rem /= dims[f];
            }
            int ki = 0, ti = 0;
            for (int f = 0; f <= nm; ++f) {
                if (keep[f]) {
                    ki = ki * dims[f] + digits[f];
                } else {
                    ti = ti * dims[f] + digits[f];
                }
            }
            psi(ki, ti) = v(i);
        }
        return psi * psi.adjoint();
    }
    return partial_trace(state.rho(), state.space(), keep_modes, keep_ancilla);
}

double max_abs(const CMat &m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double density_fidelity(const CMat &rho, const CMat &sigma) {
    if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) {
        throw Error("dimension_error", "fidelity operands differ in size");
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (rho + rho.adjoint()));
    RVec w = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    CMat sq = es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
    CMat inner = sq * sigma * sq;
    Eigen::SelfAdjointEigenSolver<CMat> es2(0.5 * (inner + inner.adjoint()), Eigen::EigenvaluesOnly);
    // Zero eigenvalues of rank-deficient inputs come out as roundoff; drop them before the sqrt.
    RVec ev = es2.eigenvalues();
    double floor = 1e-13 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    double f = 0.0;
    for (double e : ev) {
        if (e > floor) {
            f += std::sqrt(e);
        }
    }
    return std::clamp(f * f, 0.0, 1.0);
}

double state_fidelity(const State &a, const State &b) {
    if (a.space() != b.space()) {
        throw Error("dimension_error", "fidelity operands live on different spaces");
    }
    if (a.is_pure() && b.is_pure()) {
        return std::min(1.0, std::norm(a.ket().dot(b.ket())));
    }
    if (a.is_pure()) {
        return std::clamp(std::real(a.ket().dot(b.rho() * a.ket())), 0.0, 1.0);
    }
    if (b.is_pure()) {
        return std::clamp(std::real(b.ket().dot(a.rho() * b.ket())), 0.0, 1.0);
    }
    return density_fidelity(a.rho(), b.rho());
}

}  // namespace cnod
