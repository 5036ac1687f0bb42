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

#pragma once

#include <vector>

#include "cnod/common.hpp"

namespace cnod {

// Truncated Fock spaces of the bosonic modes plus a two-level ancilla.
//
// Ordering is ancilla-first: for modes (A, B) the basis index is
//     ((anc * N_A) + n_A) * N_B + n_B
// with anc = 0 for |g> and 1 for |e>. Every routine in the library uses this layout.
class HilbertSpace {
  public:
    HilbertSpace() = default;
    explicit HilbertSpace(std::vector<int> mode_dims);

    int num_modes() const { return static_cast<int>(mode_dims_.size()); }
    int mode_dim(int k) const;
    const std::vector<int> &mode_dims() const { return mode_dims_; }
    // Product of the mode truncations (size of one ancilla block).
    int mode_block() const { return block_; }
    int dim() const { return 2 * block_; }
    // Index stride of mode k inside an ancilla block.
    int stride(int k) const;
    int index(int anc, const std::vector<int> &fock) const;

    bool operator==(const HilbertSpace &other) const { return mode_dims_ == other.mode_dims_; }
    bool operator!=(const HilbertSpace &other) const { return !(*this == other); }

  private:
    std::vector<int> mode_dims_;
    int block_ = 0;
};

struct Operator {
    CMat matrix;
    HilbertSpace space;

    Operator() = default;
    Operator(CMat m, HilbertSpace s);

    bool is_unitary(double tol = 1e-8) const;
    bool is_hermitian(double tol = 1e-9) const;
    Operator adjoint() const { return {matrix.adjoint(), space}; }
    Operator operator*(const Operator &other) const;
    Operator operator+(const Operator &other) const;
    Operator operator-(const Operator &other) const;
    Operator operator*(cx s) const { return {matrix * s, space}; }
};

class State {
  public:
    enum class Kind { Ket, Density };

    State() = default;
    static State from_ket(CVec ket, HilbertSpace space);
    static State from_density(CMat rho, HilbertSpace space);

    Kind kind() const { return kind_; }
    bool is_pure() const { return kind_ == Kind::Ket; }
    const HilbertSpace &space() const { return space_; }
    const CVec &ket() const;
    const CMat &rho() const;
    // Density matrix regardless of kind.
    CMat density() const;
    State as_density() const { return from_density(density(), space_); }
    // Throws validation_error when the normalization / positivity invariants fail.
    void validate(double tol = 1e-10) const;

  private:
    Kind kind_ = Kind::Ket;
    CVec ket_;
    CMat rho_;
    HilbertSpace space_;
};

// Single-mode matrices of size n x n.
CMat mode_annihilation(int n);
CMat mode_number(int n);
// exp(alpha a^dag - alpha^* a) in the truncated space.
CMat mode_displacement(int n, cx alpha);
// Matrix elements <m|D(alpha)|k> of the untruncated operator, m,k < n.
CMat displacement_elements(int n, cx alpha);
CVec coherent_vector(int n, cx alpha);
// N(|alpha> + e^{i phi}|-alpha>) using exact Fock amplitudes.
CVec cat_vector(int n, cx alpha, double phi);
CVec fock_vector(int n, int k);

Operator identity(const HilbertSpace &space);
Operator annihilation(const HilbertSpace &space, int mode);
Operator creation(const HilbertSpace &space, int mode);
Operator number_op(const HilbertSpace &space, int mode);
Operator displacement_op(const HilbertSpace &space, int mode, cx alpha);

// Ancilla operators embedded in the full space.
Operator sigma_x(const HilbertSpace &space);
Operator sigma_y(const HilbertSpace &space);
Operator sigma_z(const HilbertSpace &space);
Operator sigma_minus(const HilbertSpace &space);
Operator proj_g(const HilbertSpace &space);
Operator proj_e(const HilbertSpace &space);

// Embeds a single-mode operator (mode_dim x mode_dim) or a 2x2 ancilla operator.
Operator tensor_embed(const CMat &op, const HilbertSpace &space, int mode);
Operator tensor_embed_ancilla(const CMat &op, const HilbertSpace &space);

// Product ket: ancilla amplitudes (g, e) times per-mode kets.
State product_state(const HilbertSpace &space, const CVec &ancilla, const std::vector<CVec> &modes);
State vacuum(const HilbertSpace &space);
// Ancilla |g>, `mode` in the given state, all other modes in vacuum.
State coherent_state(const HilbertSpace &space, int mode, cx alpha);
State cat_state(const HilbertSpace &space, int mode, cx alpha, double phi);

// Reduced density matrix over the kept factors (ancilla first if kept, then the
// kept modes in their original order).
CMat partial_trace(const State &state, const std::vector<int> &keep_modes, bool keep_ancilla);
CMat partial_trace(const CMat &rho, const HilbertSpace &space, const std::vector<int> &keep_modes,
                   bool keep_ancilla);

double max_abs(const CMat &m);

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 between states on the same space.
double state_fidelity(const State &a, const State &b);
// Same for raw density matrices; eigenvalues are clipped at zero.
double density_fidelity(const CMat &rho, const CMat &sigma);

}  // namespace cnod
