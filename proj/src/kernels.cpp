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

#include "cnod/kernels.hpp"

#include <cmath>

namespace cnod {

namespace {

using Eigen::Index;
using MapM = Eigen::Map<CMat>;

// Applies op to the `mode` index of `cols` kets of length m stored at base with leading dimension ld.
void mode_apply(cx *base, Index ld, Index cols, int m, int n, int s, const CMat &op) {
    int o = m / (n * s);
    if (s == 1) {
        if (ld == m) {
            MapM y(base, n, static_cast<Index>(o) * cols);
            y = op * y;
            return;
        }
        for (Index c = 0; c < cols; ++c) {
            MapM y(base + c * ld, n, o);
            y = op * y;
        }
        return;
    }
    CMat op_t = op.transpose();
    for (Index c = 0; c < cols; ++c) {
        for (int outer = 0; outer < o; ++outer) {
            MapM y(base + c * ld + static_cast<Index>(outer) * n * s, s, n);
            y = y * op_t;
        }
    }
}

}  // namespace

void apply_mode_left(CMat &x, const HilbertSpace &space, int mode, const CMat &op, Branch branch) {
    int n = space.mode_dim(mode);
    if (op.rows() != n || op.cols() != n) {
        throw Error("dimension_error", "mode operator size does not match truncation");
    }
    if (x.rows() != space.dim()) {
        throw Error("dimension_error", "operand rows do not match space");
    }
    int m = space.mode_block();
    int s = space.stride(mode);
    if (branch == Branch::Both) {
        // Both branches together form kets of length 2m with the same mode layout.
        if (s == 1) {
            MapM y(x.data(), n, x.size() / n);
            y = op * y;
            return;
        }
        mode_apply(x.data(), x.rows(), x.cols(), 2 * m, n, s, op);
        return;
    }
    Index offset = branch == Branch::G ? 0 : m;
    mode_apply(x.data() + offset, x.rows(), x.cols(), m, n, s, op);
}

void apply_block_mode_left(CMat &x, const HilbertSpace &space, int mode, const CMat &op) {
    int n = space.mode_dim(mode);
    if (op.rows() != n || op.cols() != n || x.rows() != space.mode_block()) {
        throw Error("dimension_error", "block operand does not match space");
    }
    mode_apply(x.data(), x.rows(), x.cols(), space.mode_block(), n, space.stride(mode), op);
}

void apply_ancilla_left(CMat &x, const HilbertSpace &space, const Eigen::Matrix2cd &u) {
    int m = space.mode_block();
    CMat g = x.topRows(m);
    CMat e = x.bottomRows(m);
    x.topRows(m) = u(0, 0) * g + u(0, 1) * e;
    x.bottomRows(m) = u(1, 0) * g + u(1, 1) * e;
}

void apply_branch_ops_left(CMat &x, const HilbertSpace &space, const std::vector<CMat> &ops_g,
                           const std::vector<CMat> &ops_e) {
    for (int k = 0; k < space.num_modes(); ++k) {
        if (k < static_cast<int>(ops_g.size()) && ops_g[k].size() > 0) {
            apply_mode_left(x, space, k, ops_g[k], Branch::G);
        }
        if (k < static_cast<int>(ops_e.size()) && ops_e[k].size() > 0) {
            apply_mode_left(x, space, k, ops_e[k], Branch::E);
        }
    }
}

void apply_cnod_left(CMat &x, const HilbertSpace &space, const std::vector<cx> &alpha) {
    if (static_cast<int>(alpha.size()) != space.num_modes()) {
        throw Error("dimension_error", "CNOD needs one amplitude per mode");
    }
    std::vector<CMat> ops_g(alpha.size()), ops_e(alpha.size());
    for (int k = 0; k < space.num_modes(); ++k) {
        if (alpha[k] != cx(0.0)) {
            ops_g[k] = mode_displacement(space.mode_dim(k), alpha[k] / 2.0);
            ops_e[k] = mode_displacement(space.mode_dim(k), -alpha[k] / 2.0);
        }
    }
    apply_branch_ops_left(x, space, ops_g, ops_e);
    int m = space.mode_block();
    CMat g = x.topRows(m);
    x.topRows(m) = -x.bottomRows(m);
    x.bottomRows(m) = g;
}

void amplitude_damp(CMat &rho, const HilbertSpace &space, int mode, double eta) {
    if (eta >= 1.0) {
        return;
    }
    int n = space.mode_dim(mode);
    int s = space.stride(mode);
    Index d = rho.rows();
    std::vector<int> digit(d);
    for (Index i = 0; i < d; ++i) {
        digit[i] = static_cast<int>((i / s) % n);
    }
    double loss = 1.0 - eta;
    CMat out = CMat::Zero(d, d);
    std::vector<double> w(d);
    // A_k = sqrt(loss^k / k!) eta^{n/2} a^k.
    for (int k = 0; k < n; ++k) {
        double pref = std::sqrt(std::pow(loss, k) / std::tgamma(k + 1.0));
        double wmax = 0.0;
        for (Index i = 0; i < d; ++i) {
            int ni = digit[i];
            if (ni + k >= n) {
                w[i] = 0.0;
                continue;
            }
            double ratio = 1.0;
            for (int q = 1; q <= k; ++q) {
                ratio *= static_cast<double>(ni + q);
            }
            w[i] = pref * std::pow(eta, 0.5 * ni) * std::sqrt(ratio);
            wmax = std::max(wmax, w[i]);
        }
        if (k > 0 && wmax * wmax < 1e-17) {
            break;
        }
        Index shift = static_cast<Index>(k) * s;
        for (Index j = 0; j < d; ++j) {
            if (w[j] == 0.0) {
                continue;
            }
            const cx *src = rho.data() + (j + shift) * d + shift;
            cx *dst = out.data() + j * d;
            double wj = w[j];
            for (Index i = 0; i < d; ++i) {
                if (w[i] != 0.0) {
                    dst[i] += (w[i] * wj) * src[i];
                }
            }
        }
    }
    rho = std::move(out);
}

void ancilla_channel(CMat &rho, const HilbertSpace &space, double p_decay, double coherence_factor) {
    int m = space.mode_block();
    double keep = std::sqrt(std::max(0.0, 1.0 - p_decay)) * coherence_factor;
    rho.topLeftCorner(m, m) += p_decay * rho.bottomRightCorner(m, m);
    rho.bottomRightCorner(m, m) *= (1.0 - p_decay);
    rho.topRightCorner(m, m) *= keep;
    rho.bottomLeftCorner(m, m) *= keep;
}

Eigen::Matrix2cd ancilla_rotation(const double axis[3], double angle) {
    double c = std::cos(angle / 2.0);
    double s = std::sin(angle / 2.0);
    Eigen::Matrix2cd u;
    u(0, 0) = cx(c, -s * axis[2]);
    u(1, 1) = cx(c, s * axis[2]);
    // -i s (nx sx + ny sy): off-diagonals -i s (nx - i ny) and -i s (nx + i ny).
    u(0, 1) = -kI * s * cx(axis[0], -axis[1]);
    u(1, 0) = -kI * s * cx(axis[0], axis[1]);
    return u;
}

}  // namespace cnod
