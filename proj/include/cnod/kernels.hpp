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

// Structured operator application on ancilla-first tensor layouts. Every column
// of X is treated as a ket of the full space; nothing here forms full-size
// operators.

#pragma once

#include <vector>

#include "cnod/hilbert.hpp"

namespace cnod {

enum class Branch { Both = -1, G = 0, E = 1 };

// X <- (O on `mode`) X, restricted to the rows of the selected ancilla branch.
void apply_mode_left(CMat &x, const HilbertSpace &space, int mode, const CMat &op, Branch branch = Branch::Both);

// X <- (U_ancilla (x) I) X.
// Same as apply_mode_left for operands holding a single ancilla block (mode_block() rows).
void apply_block_mode_left(CMat &x, const HilbertSpace &space, int mode, const CMat &op);

void apply_ancilla_left(CMat &x, const HilbertSpace &space, const Eigen::Matrix2cd &u);

// X <- diag-per-branch operator: rows of branch g multiplied by a mode operator list, e likewise.
// ops_g / ops_e hold one matrix per mode (empty matrix = identity).
void apply_branch_ops_left(CMat &x, const HilbertSpace &space, const std::vector<CMat> &ops_g,
                           const std::vector<CMat> &ops_e);

// X <- CNOD(alpha) X with CNOD = |e><g| D(alpha/2) - |g><e| D(-alpha/2), per-mode product.
void apply_cnod_left(CMat &x, const HilbertSpace &space, const std::vector<cx> &alpha);

// rho <- U rho U^dag for a left action given as a callable.
template <typename F>
void conjugate(CMat &rho, F &&left) {
    left(rho);
    CMat t = rho.adjoint();
    left(t);
    rho = t.adjoint();
}

// Exact amplitude-damping channel with survival amplitude^2 eta on one mode.
void amplitude_damp(CMat &rho, const HilbertSpace &space, int mode, double eta);

// Ancilla T1 (excited decay probability p) and dephasing (coherence factor lambda).
void ancilla_channel(CMat &rho, const HilbertSpace &space, double p_decay, double coherence_factor);

Eigen::Matrix2cd ancilla_rotation(const double axis[3], double angle);

}  // namespace cnod
