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

#include "cnod/estimation.hpp"

#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cnod/dynamics.hpp"

namespace cnod {

namespace {

void require_psd(const CMat &m, const char *name) {
    if (m.rows() != m.cols()) {
        throw Error("validation_error", std::string(name) + " is not square");
    }
    if (max_abs(m - m.adjoint()) > 1e-8) {
        throw Error("validation_error", std::string(name) + " is not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8) {
        throw Error("validation_error", std::string(name) + " is not positive semidefinite");
    }
    if (std::abs(m.trace() - cx(1.0)) > 1e-6) {
        throw Error("validation_error", std::string(name) + " does not have unit trace");
    }
}

}  // namespace

double fidelity(const CMat &rho, const CMat &sigma) {
    if (rho.rows() != sigma.rows()) {
        throw Error("dimension_error", "fidelity of matrices with different dimensions");
    }
    require_psd(rho, "rho");
    require_psd(sigma, "sigma");
    return density_fidelity(rho, sigma);
}

double trace_distance(const CMat &rho, const CMat &sigma) {
    CMat d = rho - sigma;
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

CMat mode_density(const State &state, const std::vector<int> &keep_modes) {
    return partial_trace(state, keep_modes, false);
}

// ---- maximum-likelihood reconstruction ----

namespace {

struct MleProblem {
    std::vector<int> dims;
    int d = 0;
    std::vector<cx> measured;
    std::vector<double> weight;       // 1 / std error
    std::vector<CMat> full;           // precomputed D(lambda) (small problems)
    std::vector<std::vector<CMat>> per_mode;

    CMat displacement(std::size_t i) const {
        if (!full.empty()) {
            return full[i];
        }
        return build(i);
    }

    CMat build(std::size_t i) const {
        CMat m = per_mode[i][0];
        for (std::size_t k = 1; k < per_mode[i].size(); ++k) {
            m = kron(m, per_mode[i][k]);
        }
        return m;
    }
};

MleProblem make_problem(const CharFuncGrid &data, const std::vector<int> &dims, double floor) {
    if (static_cast<int>(dims.size()) != data.num_modes) {
        throw Error("dimension_error", "reconstruction dims must list one truncation per data mode");
    }
    if (data.values.size() != data.points.size()) {
        throw Error("validation_error", "dataset values and points differ in length");
    }
    MleProblem p;
    p.dims = dims;
    p.d = 1;
    for (int n : dims) {
        if (n < 1) {
            throw Error("validation_error", "reconstruction dimension must be positive");
        }
        p.d *= n;
    }
    std::size_t n = data.size();
    p.measured = data.values;
    p.weight.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double e = i < data.std_errors.size() ? data.std_errors[i] : 0.0;
        p.weight[i] = 1.0 / std::max(e, floor);
    }
    p.per_mode.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < dims.size(); ++k) {
            p.per_mode[i].push_back(displacement_elements(dims[k], data.points[i][k]));
        }
    }
    if (dims.size() == 1 || static_cast<double>(n) * p.d * p.d <= 1.2e7) {
        p.full.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            p.full[i] = p.build(i);
        }
        p.per_mode.clear();
    }
    return p;
}

// Likelihood and (optionally) the Hermitian subgradient H with dL = Tr[H d rho].
// Likelihood (L1) or, given per-point weights q, the quadratic form sum q |r|^2.
double evaluate(const MleProblem &p, const CMat &rho, CMat *h, const std::vector<double> *q = nullptr,
                std::vector<double> *abs_res = nullptr) {
    double l = 0.0;
    CMat a;
    if (h) {
        a = CMat::Zero(p.d, p.d);
    }
    CMat rt = rho.transpose();
    for (std::size_t i = 0; i < p.measured.size(); ++i) {
        CMat dm = p.displacement(i);
        cx f = dm.cwiseProduct(rt).sum();
        cx r = f - p.measured[i];
        double ar = std::abs(r);
        if (abs_res) {
            (*abs_res)[i] = ar;
        }
        if (q) {
            l += (*q)[i] * ar * ar;
            if (h) {
                a += (2.0 * (*q)[i]) * std::conj(r) * dm;
            }
        } else {
            l += ar * p.weight[i];
            if (h && ar > 1e-300) {
                a += (p.weight[i] / ar) * std::conj(r) * dm;
            }
        }
    }
    if (h) {
        *h = 0.5 * (a + a.adjoint());
    }
    return l;
}

int param_count(int d) {
    return d * (d + 1);
}

CMat unpack(const RVec &x, int d) {
    CMat t = CMat::Zero(d, d);
    int k = 0;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
            t(i, j) = cx(x[k], x[k + 1]);
            k += 2;
        }
    }
    return t;
}

RVec pack(const CMat &t) {
    int d = static_cast<int>(t.rows());
    RVec x(param_count(d));
    int k = 0;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
            x[k] = t(i, j).real();
            x[k + 1] = t(i, j).imag();
            k += 2;
        }
    }
    return x;
}

CMat rho_of(const CMat &t) {
    CMat r = t.adjoint() * t;
    double tau = r.trace().real();
    return r / tau;
}

double objective(const MleProblem &p, const RVec &x, RVec *grad, const std::vector<double> *q) {
    CMat t = unpack(x, p.d);
    CMat tt = t.adjoint() * t;
    double tau = tt.trace().real();
    CMat rho = tt / tau;
    if (!grad) {
        return evaluate(p, rho, nullptr, q);
    }
    CMat h;
    double l = evaluate(p, rho, &h, q);
    double hr = (h * rho).trace().real();
    CMat m = (h - hr * CMat::Identity(p.d, p.d)) * t.adjoint();
    grad->resize(x.size());
    int k = 0;
    for (int i = 0; i < p.d; ++i) {
        for (int j = 0; j <= i; ++j) {
            (*grad)[k] = 2.0 * m(j, i).real() / tau;
            (*grad)[k + 1] = -2.0 * m(j, i).imag() / tau;
            k += 2;
        }
    }
    return l;
}

}  // namespace

double mle_likelihood(const CharFuncGrid &data, const std::vector<int> &dims, const CMat &rho, double delta_floor) {
    MleProblem p = make_problem(data, dims, delta_floor);
    if (rho.rows() != p.d) {
        throw Error("dimension_error", "density matrix does not match the reconstruction dims");
    }
    return evaluate(p, rho, nullptr);
}

namespace {

struct LbfgsOutcome {
    RVec x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string reason;
};

// L-BFGS with a monotone Armijo backtracking search; falls back to the steepest (sub)gradient and stops
// when even that direction gives no decrease.
LbfgsOutcome lbfgs(const std::function<double(const RVec &, RVec *)> &f, RVec x, int max_iter, double tol,
                   int memory, std::vector<double> *history, double zero_level) {
    LbfgsOutcome out;
    x /= x.norm();
    RVec g;
    double l = f(x, &g);
    if (history) {
        history->push_back(l);
    }
    std::deque<RVec> s_hist, y_hist;
    int it = 0;
    while (it < max_iter) {
        RVec q = g;
        std::vector<double> al(s_hist.size());
        for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
            al[k] = s_hist[k].dot(q) / y_hist[k].dot(s_hist[k]);
            q -= al[k] * y_hist[k];
        }
        bool steepest = s_hist.empty();
        if (!steepest) {
            q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        }
        for (std::size_t k = 0; k < s_hist.size(); ++k) {
            double b = y_hist[k].dot(q) / y_hist[k].dot(s_hist[k]);
            q += (al[k] - b) * s_hist[k];
        }
        RVec dir = -q;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            dir = -g;
            slope = -g.squaredNorm();
            steepest = true;
            s_hist.clear();
            y_hist.clear();
        }
        double t = steepest ? std::min(1.0, 0.1 * x.norm() / std::max(dir.norm(), 1e-300)) : 1.0;
        RVec xn;
        double ln = l;
        bool accepted = false;
        while (t > 1e-18) {
            xn = x + t * dir;
            ln = f(xn, nullptr);
            if (ln <= l + 1e-4 * t * slope && ln < l) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            if (!steepest) {
                s_hist.clear();
                y_hist.clear();
                continue;
            }
            out.converged = true;
            out.reason = "no descent along the subgradient (stationary point)";
            break;
        }
        RVec gn;
        ln = f(xn, &gn);
        RVec s = xn - x, y = gn - g;
        // The objective is invariant under x -> k x; keep |x| = 1 so the gradient scale cannot drift.
        double k = xn.norm();
        xn /= k;
        gn *= k;
        s /= k;
        y = gn - g;
        for (auto &sh : s_hist) {
            sh /= k;
        }
        for (auto &yh : y_hist) {
            yh *= k;
        }
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            if (static_cast<int>(s_hist.size()) > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        double rel = (l - ln) / std::max(l, 1e-300);
        x = xn;
        g = gn;
        l = ln;
        ++it;
        if (history) {
            history->push_back(l);
        }
        if (rel < tol) {
            out.converged = true;
            out.reason = "relative likelihood change below tolerance";
            break;
        }
        if (l < zero_level) {
            out.converged = true;
            out.reason = "likelihood reached zero";
            break;
        }
    }
    if (!out.converged) {
        out.reason = "iteration cap reached";
    }
    out.x = x;
    out.value = l;
    out.iterations = it;
    return out;
}

// Weighted linear inversion over Hermitian matrices, projected onto the density matrices.
CMat linear_inversion(const MleProblem &p) {
    int d = p.d;
    int nb = d * d;
    std::size_t n = p.measured.size();
    RMat ata = RMat::Zero(nb, nb);
    RVec atb = RVec::Zero(nb);
    RVec row_re(nb), row_im(nb);
    for (std::size_t i = 0; i < n; ++i) {
        CMat dm = p.displacement(i);
        int b = 0;
        for (int k = 0; k < d; ++k) {
            cx v = dm(k, k);
            row_re[b] = v.real();
            row_im[b] = v.imag();
            ++b;
        }
        for (int k = 0; k < d; ++k) {
            for (int l = k + 1; l < d; ++l) {
                cx sym = dm(l, k) + dm(k, l);
                cx asym = kI * (dm(l, k) - dm(k, l));
                row_re[b] = sym.real();
                row_im[b] = sym.imag();
                row_re[b + 1] = asym.real();
                row_im[b + 1] = asym.imag();
                b += 2;
            }
        }
        double w2 = p.weight[i] * p.weight[i];
        ata.selfadjointView<Eigen::Lower>().rankUpdate(row_re, w2);
        ata.selfadjointView<Eigen::Lower>().rankUpdate(row_im, w2);
        atb += w2 * (row_re * p.measured[i].real() + row_im * p.measured[i].imag());
    }
    RMat full = ata.selfadjointView<Eigen::Lower>();
    full.diagonal().array() += 1e-10 * full.diagonal().maxCoeff();
    RVec c = full.ldlt().solve(atb);
    CMat rho = CMat::Zero(d, d);
    int b = 0;
    for (int k = 0; k < d; ++k) {
        rho(k, k) = c[b++];
    }
    for (int k = 0; k < d; ++k) {
        for (int l = k + 1; l < d; ++l) {
            cx v(c[b], c[b + 1]);  // rho_kl from the sym / antisym coefficients
            rho(k, l) = v;
            rho(l, k) = std::conj(v);
            b += 2;
        }
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(rho);
    RVec ev = es.eigenvalues().cwiseMax(0.0);
    if (ev.sum() <= 0.0) {
        return CMat::Identity(d, d) / static_cast<double>(d);
    }
    ev /= ev.sum();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

// Lower-triangular T with T^dag T = rho (rho positive definite).
CMat lower_factor(const CMat &rho) {
    int d = static_cast<int>(rho.rows());
    CMat j = CMat::Zero(d, d);
    for (int k = 0; k < d; ++k) {
        j(k, d - 1 - k) = 1.0;
    }
    Eigen::LLT<CMat> llt(j * rho * j);
    CMat l = llt.matrixL();
    return j * l.adjoint() * j;
}

}  // namespace

ReconstructionResult mle_reconstruct(const CharFuncGrid &data, const std::vector<int> &dims, const MleConfig &config) {
    MleProblem p = make_problem(data, dims, config.delta_floor);
    int d = p.d;
    if (2.0 * static_cast<double>(data.size()) < static_cast<double>(d) * d - 1.0) {
        warn("reconstruction is underdetermined: " + std::to_string(data.size()) + " complex samples for dimension " +
             std::to_string(d));
    }
    std::size_t n = data.size();
    // Warm start: PSD-projected linear inversion, then weighted least squares in the T parametrization.
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = p.weight[i] * p.weight[i];
    }
    auto quadratic = [&](const RVec &x, RVec *g) { return objective(p, x, g, &q); };
    CMat start = CMat::Identity(d, d) / static_cast<double>(d);
    if (d <= config.linear_inversion_max_dim) {
        start = 0.999 * linear_inversion(p) + 0.001 * start;
    }
    LbfgsOutcome warm = lbfgs(quadratic, pack(lower_factor(start)), config.warm_start_iterations, 1e-12,
                              config.memory, nullptr, 0.0);
    RVec x = warm.x;
    int iterations = warm.iterations;

    // Majorize-minimize on the L1 likelihood: |r| <= |r|^2 / (2c) + c / 2 for any c > 0, so each
    // reweighted quadratic step that lowers the surrogate lowers the likelihood.
    std::vector<double> res_abs(n);
    auto likelihood = [&](const RVec &xv) {
        return evaluate(p, rho_of(unpack(xv, d)), nullptr, nullptr, &res_abs);
    };
    double l = likelihood(x);
    ReconstructionResult res;
    res.dims = dims;
    if (config.record_history) {
        res.history.push_back(l);
    }
    double zero = 1e-12 * static_cast<double>(std::max<std::size_t>(n, 1));
    int outer = 0;
    while (iterations < config.max_iterations) {
        if (l < zero) {
            res.converged = true;
            res.stop_reason = "likelihood reached zero";
            break;
        }
        double rmax = *std::max_element(res_abs.begin(), res_abs.end());
        for (std::size_t i = 0; i < n; ++i) {
            q[i] = p.weight[i] / (2.0 * std::max(res_abs[i], 1e-9 * rmax + 1e-300));
        }
        int budget = std::min(config.inner_iterations, config.max_iterations - iterations);
        LbfgsOutcome inner = lbfgs(quadratic, x, budget, 1e-10, config.memory, nullptr, 0.0);
        iterations += std::max(inner.iterations, 1);
        ++outer;
        std::vector<double> saved = res_abs;
        double ln = likelihood(inner.x);
        if (!(ln < l)) {
            res_abs = saved;
            res.converged = true;
            res.stop_reason = "no further likelihood decrease";
            break;
        }
        double rel = (l - ln) / l;
        x = inner.x;
        l = ln;
        if (config.record_history) {
            res.history.push_back(l);
        }
        if (rel < config.tolerance) {
            res.converged = true;
            res.stop_reason = "relative likelihood change below tolerance";
            break;
        }
    }
    if (!res.converged) {
        res.stop_reason = "iteration cap reached";
    }
    res.rho = rho_of(unpack(x, d));
    res.rho = 0.5 * (res.rho + res.rho.adjoint());
    res.final_likelihood = l;
    res.iterations = iterations;
    return res;
}

CharFuncGrid marginal_grid(const CharFuncGrid &grid, int mode) {
    if (mode < 0 || mode >= grid.num_modes) {
        throw Error("dimension_error", "marginal mode out of range");
    }
    CharFuncGrid out = grid;
    out.num_modes = 1;
    out.axes.clear();
    for (auto &p : out.points) {
        for (int k = 0; k < grid.num_modes; ++k) {
            if (k != mode && p[k] != cx(0.0)) {
                throw Error("validation_error", "grid displaces more than the marginal mode");
            }
        }
        p = {p[mode]};
    }
    for (const auto &a : grid.axes) {
        if (a.mode == mode) {
            GridAxis b = a;
            b.mode = 0;
            out.axes.push_back(b);
        }
    }
    if (out.axes.size() != grid.axes.size()) {
        out.axes.clear();
    }
    return out;
}

std::string reconstruction_json(const ReconstructionResult &r, double fidelity_to_target) {
    nlohmann::json j;
    j["dims"] = r.dims;
    j["final_likelihood"] = r.final_likelihood;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["stop_reason"] = r.stop_reason;
    j["convergence_contract"] = "implementation-defined: monotone likelihood, relative change < tolerance";
    if (fidelity_to_target >= 0.0) {
        j["fidelity"] = fidelity_to_target;
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(r.rho, Eigen::EigenvaluesOnly);
    j["min_eigenvalue"] = es.eigenvalues().minCoeff();
    j["trace"] = r.rho.trace().real();
    j["purity"] = (r.rho * r.rho).trace().real();
    return j.dump(2);
}

// ---- logical witness and direct fidelity estimation ----

namespace {

std::vector<cx> zz_point(double alpha_a, double alpha_b) {
    return {cx(0.0, kPi / (4.0 * alpha_a)), cx(0.0, -kPi / (4.0 * alpha_b))};
}

void check_alphas(double alpha_a, double alpha_b) {
    if (!(alpha_a > 0.0) || !(alpha_b > 0.0)) {
        throw Error("validation_error", "witness needs positive cat amplitudes");
    }
    if (kPi / (4.0 * alpha_a) >= 0.5 || kPi / (4.0 * alpha_b) >= 0.5) {
        warn("cat amplitude too small for the small-displacement ZZ readout (pi / 4 alpha >= 0.5)");
    }
}

WitnessResult combine(double sz_zz, double se_zz, double sz_xy, double se_xy, double alpha_a, double alpha_b) {
    WitnessResult w;
    std::vector<cx> c = zz_point(alpha_a, alpha_b);
    double norm = std::exp(-(std::norm(c[0]) + std::norm(c[1])) / 2.0);
    w.sz_zz = sz_zz;
    w.sz_xy = sz_xy;
    w.zz = sz_zz / norm;
    w.xx_minus_yy = 4.0 * sz_xy;
    w.xx = 0.5 * w.xx_minus_yy;
    w.yy = -0.5 * w.xx_minus_yy;
    w.f = 0.25 * (w.ii + w.zz + w.xx_minus_yy);
    w.std_error = 0.25 * std::sqrt(std::pow(se_zz / norm, 2) + std::pow(4.0 * se_xy, 2));
    return w;
}

}  // namespace

WitnessResult witness_protocol(const State &state, double alpha_a, double alpha_b, const DeviceParams &device,
                               const WitnessOptions &options) {
    if (state.space().num_modes() != 2) {
        throw Error("dimension_error", "witness needs a two-mode state");
    }
    check_alphas(alpha_a, alpha_b);
    // Both sequences are R_y(pi/2) CNOD(c) R_y(pi/2): <sigma_z> = Re C(c).
    CharFuncGrid pts = make_point_set({zz_point(alpha_a, alpha_b), {2.0 * alpha_a, 2.0 * alpha_b}});
    MeasureOptions mo;
    mo.mode = options.mode;
    mo.shots = options.shots;
    mo.seed = options.seed;
    mo.tau_s = options.tau_s;
    mo.threads = options.threads;
    mo.layout = CnodLayout::Simultaneous;
    CharFuncGrid m = measure_char_func(state, pts, device, mo);
    return combine(m.values[0].real(), m.std_errors[0], m.values[1].real(), m.std_errors[1], alpha_a, alpha_b);
}

WitnessResult witness_protocol(const State &initial, const GateSequence &seq, double alpha_a, double alpha_b,
                               const DeviceParams &device, const WitnessOptions &options) {
    return witness_protocol(prepare_state(initial, seq, device, options.mode), alpha_a, alpha_b, device, options);
}

std::vector<std::vector<cx>> dfe_points(double alpha_a, double alpha_b) {
    std::vector<cx> c = zz_point(alpha_a, alpha_b);
    return {c, {-c[0], -c[1]}, {2.0 * alpha_a, 2.0 * alpha_b}, {-2.0 * alpha_a, -2.0 * alpha_b}};
}

double direct_fidelity_estimation(const CharFuncGrid &samples, double alpha_a, double alpha_b) {
    check_alphas(alpha_a, alpha_b);
    if (samples.num_modes != 2) {
        throw Error("validation_error", "direct fidelity estimation needs joint two-mode samples");
    }
    auto want = dfe_points(alpha_a, alpha_b);
    cx v[4];
    for (int k = 0; k < 4; ++k) {
        bool found = false;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (std::abs(samples.points[i][0] - want[k][0]) < 1e-9 && std::abs(samples.points[i][1] - want[k][1]) < 1e-9) {
                v[k] = samples.values[i];
                found = true;
                break;
            }
        }
        if (!found) {
            throw Error("validation_error", "samples do not contain the four logical-operator points");
        }
    }
    double norm = std::exp(-(std::norm(want[0][0]) + std::norm(want[0][1])) / 2.0);
    // Hermitian pairs average to the real part.
    double zz = 0.5 * (v[0] + v[1]).real() / norm;
    double xy = 4.0 * 0.5 * (v[2] + v[3]).real();
    return 0.25 * (1.0 + zz + xy);
}

// ---- fidelity table ----

CMat target_density(int dim, TargetKind kind, const TargetParams &p) {
    cx a = p.alpha * std::exp(kI * p.theta_ph);
    CMat disp = displacement_elements(dim, p.delta);
    if (kind == TargetKind::PureCat) {
        CVec v = coherent_vector(dim, a) + std::exp(kI * p.phi_rot) * coherent_vector(dim, -a);
        v = disp * v;
        v /= v.norm();
        return v * v.adjoint();
    }
    CVec u = disp * coherent_vector(dim, a);
    CVec w = disp * coherent_vector(dim, -a);
    CMat r = 0.5 * (u * u.adjoint() / u.squaredNorm() + w * w.adjoint() / w.squaredNorm());
    return r;
}

namespace {

struct FitData {
    const TableInput *in;
    int dim;
};

TargetParams from_vector(const gsl_vector *v, const TableInput &in) {
    TargetParams p;
    p.alpha = gsl_vector_get(v, 0);
    p.delta = cx(gsl_vector_get(v, 1), gsl_vector_get(v, 2));
    p.theta_ph = gsl_vector_get(v, 3);
    p.phi_rot = in.kind == TargetKind::PureCat ? gsl_vector_get(v, 4) : 0.0;
    return p;
}

double target_fidelity(const CMat &rho, TargetKind kind, const TargetParams &p) {
    CMat t = target_density(static_cast<int>(rho.rows()), kind, p);
    if (kind == TargetKind::PureCat) {
        // Pure target: <psi|rho|psi> = Tr[rho t].
        // Not clamped: a flat top would stall the simplex.
        return (rho * t).trace().real();
    }
    return density_fidelity(rho, t);
}

double neg_fidelity(const gsl_vector *v, void *params) {
    auto *fd = static_cast<FitData *>(params);
    return -target_fidelity(fd->in->rho, fd->in->kind, from_vector(v, *fd->in));
}

}  // namespace

TableEntry fit_target(const TableInput &input) {
    require_psd(input.rho, "reconstructed state");
    TableEntry e;
    e.mode = input.mode;
    e.state_type = input.state_type;
    e.kind = input.kind;
    e.reference_fidelity = input.reference_fidelity;
    e.fidelity_nominal = target_fidelity(input.rho, input.kind, input.initial);
    std::size_t n = input.kind == TargetKind::PureCat ? 5 : 4;
    FitData fd{&input, static_cast<int>(input.rho.rows())};
    gsl_multimin_function f{&neg_fidelity, n, &fd};
    gsl_vector *x = gsl_vector_alloc(n);
    gsl_vector *step = gsl_vector_alloc(n);
    gsl_vector_set(x, 0, input.initial.alpha);
    gsl_vector_set(x, 1, input.initial.delta.real());
    gsl_vector_set(x, 2, input.initial.delta.imag());
    gsl_vector_set(x, 3, input.initial.theta_ph);
    if (n == 5) {
        gsl_vector_set(x, 4, input.initial.phi_rot);
    }
    gsl_vector_set_all(step, 0.05);
    gsl_multimin_fminimizer *s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(s, &f, x, step);
    int status = GSL_CONTINUE;
    for (int it = 0; it < 2000 && status == GSL_CONTINUE; ++it) {
        if (gsl_multimin_fminimizer_iterate(s)) {
            break;
        }
        status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-7);
    }
    e.converged = status == GSL_SUCCESS;
    e.params = from_vector(s->x, input);
    e.fidelity = std::clamp(-s->fval, 0.0, 1.0);
    e.fidelity_nominal = std::clamp(e.fidelity_nominal, 0.0, 1.0);
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(x);
    gsl_vector_free(step);
    if (!e.converged) {
        warn("fidelity fit for " + input.mode + " " + input.state_type + " did not converge");
    }
    return e;
}

std::vector<TableEntry> table_fidelities(const std::vector<TableInput> &inputs) {
    std::vector<TableEntry> out;
    for (const auto &in : inputs) {
        out.push_back(fit_target(in));
    }
    return out;
}

std::string table_json(const std::vector<TableEntry> &entries) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto &e : entries) {
        nlohmann::json r;
        r["mode"] = e.mode;
        r["state_type"] = e.state_type;
        r["target"] = e.kind == TargetKind::PureCat ? "cat" : "mixed_logical";
        r["fidelity"] = e.fidelity;
        r["fidelity_nominal"] = e.fidelity_nominal;
        r["reference_fidelity"] = e.reference_fidelity;
        r["alpha"] = e.params.alpha;
        r["delta"] = format_complex(e.params.delta);
        r["theta_ph"] = e.params.theta_ph;
        r["phi_rot"] = e.params.phi_rot;
        r["converged"] = e.converged;
        j.push_back(r);
    }
    return j.dump(2);
}

}  // namespace cnod
