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

#include "cnod/gates.hpp"

#include <cmath>
#include <sstream>

#include "cnod/kernels.hpp"

namespace cnod {

Gate Gate::rotation(const double axis[3], double angle) {
    double norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (!(norm > 0.0)) {
        throw Error("validation_error", "rotation axis must be non-zero");
    }
    Gate g;
    g.kind = Kind::Rotation;
    for (int i = 0; i < 3; ++i) {
        g.axis[i] = axis[i] / norm;
    }
    g.angle = angle;
    return g;
}

Gate Gate::rotation(char axis, double angle) {
    double n[3] = {0.0, 0.0, 0.0};
    switch (axis) {
        case 'x':
            n[0] = 1.0;
            break;
        case 'y':
            n[1] = 1.0;
            break;
        case 'z':
            n[2] = 1.0;
            break;
        default:
            throw Error("validation_error", std::string("unknown rotation axis ") + axis);
    }
    return rotation(n, angle);
}

Gate Gate::cnod(std::vector<cx> alpha, double tau_s) {
    if (alpha.empty()) {
        throw Error("validation_error", "CNOD needs at least one amplitude");
    }
    Gate g;
    g.kind = Kind::Cnod;
    g.alpha = std::move(alpha);
    g.tau_s = tau_s;
    return g;
}

Gate Gate::displace(int mode, cx alpha) {
    Gate g;
    g.kind = Kind::Displace;
    g.mode = mode;
    g.displacement = alpha;
    return g;
}

Gate Gate::digital_rotation(int mode, double angle) {
    Gate g;
    g.kind = Kind::DigitalRotation;
    g.mode = mode;
    g.angle = angle;
    return g;
}

Gate Gate::wait(double duration_s) {
    if (duration_s < 0.0) {
        throw Error("validation_error", "wait duration must be >= 0");
    }
    Gate g;
    g.kind = Kind::Wait;
    g.duration_s = duration_s;
    return g;
}

bool Gate::operator==(const Gate &o) const {
    if (kind != o.kind) {
        return false;
    }
    switch (kind) {
        case Kind::Rotation:
            return axis[0] == o.axis[0] && axis[1] == o.axis[1] && axis[2] == o.axis[2] && angle == o.angle;
        case Kind::Cnod:
            return alpha == o.alpha && tau_s == o.tau_s;
        case Kind::Displace:
            return mode == o.mode && displacement == o.displacement;
        case Kind::DigitalRotation:
            return mode == o.mode && angle == o.angle;
        case Kind::Wait:
            return duration_s == o.duration_s;
    }
    return false;
}

bool GateSequence::operator==(const GateSequence &o) const {
    return gates == o.gates && label == o.label && nominal_duration_s == o.nominal_duration_s;
}

GateSequence restrict_sequence(const GateSequence &seq, const std::vector<int> &modes) {
    auto position = [&](int mode) {
        for (std::size_t i = 0; i < modes.size(); ++i) {
            if (modes[i] == mode) {
                return static_cast<int>(i);
            }
        }
        return -1;
    };
    GateSequence out = seq;
    out.gates.clear();
    for (const auto &g : seq.gates) {
        Gate h = g;
        if (g.kind == Gate::Kind::Cnod) {
            h.alpha.assign(modes.size(), 0.0);
            for (std::size_t k = 0; k < g.alpha.size(); ++k) {
                int p = position(static_cast<int>(k));
                if (p >= 0) {
                    h.alpha[p] = g.alpha[k];
                } else if (g.alpha[k] != cx(0.0)) {
                    throw Error("dimension_error", "sequence drives a mode outside the selection");
                }
            }
        } else if (g.kind == Gate::Kind::Displace || g.kind == Gate::Kind::DigitalRotation) {
            int p = position(g.mode);
            if (p < 0) {
                if (g.kind == Gate::Kind::Displace && g.displacement != cx(0.0)) {
                    throw Error("dimension_error", "sequence drives a mode outside the selection");
                }
                continue;
            }
            h.mode = p;
        }
        out.gates.push_back(h);
    }
    return out;
}

std::string serialize_sequence(const GateSequence &seq) {
    std::ostringstream out;
    if (!seq.label.empty()) {
        out << "# label=" << seq.label << "\n";
    }
    if (seq.nominal_duration_s > 0.0) {
        out << "# duration_s=" << format_double(seq.nominal_duration_s) << "\n";
    }
    for (const auto &g : seq.gates) {
        switch (g.kind) {
            case Gate::Kind::Rotation: {
                out << "ROT ";
                const double *n = g.axis;
                if (n[1] == 0.0 && n[2] == 0.0 && n[0] == 1.0) {
                    out << "x";
                } else if (n[0] == 0.0 && n[2] == 0.0 && n[1] == 1.0) {
                    out << "y";
                } else if (n[0] == 0.0 && n[1] == 0.0 && n[2] == 1.0) {
                    out << "z";
                } else {
                    out << format_double(n[0]) << "," << format_double(n[1]) << "," << format_double(n[2]);
                }
                out << " " << format_double(g.angle) << "\n";
                break;
            }
            case Gate::Kind::Cnod:
                out << "CNOD";
                for (const auto &a : g.alpha) {
                    out << " " << format_complex(a);
                }
                if (g.tau_s > 0.0) {
                    out << " tau=" << format_double(g.tau_s);
                }
                out << "\n";
                break;
            case Gate::Kind::Displace:
                out << "DISP " << g.mode << " " << format_complex(g.displacement) << "\n";
                break;
            case Gate::Kind::DigitalRotation:
                out << "FRAME " << g.mode << " " << format_double(g.angle) << "\n";
                break;
            case Gate::Kind::Wait:
                out << "WAIT " << format_double(g.duration_s) << "\n";
                break;
        }
    }
    return out.str();
}

namespace {

double parse_real(const std::string &s, int line) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used == s.size()) {
            return v;
        }
    } catch (const std::logic_error &) {
    }
    throw Error("parse_error", "line " + std::to_string(line) + ": bad number '" + s + "'");
}

}  // namespace

GateSequence parse_sequence(const std::string &text) {
    GateSequence seq;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (!raw.empty() && raw.back() == '\r') {
            raw.pop_back();
        }
        if (raw.empty()) {
            continue;
        }
        if (raw[0] == '#') {
            auto eq = raw.find('=');
            if (raw.rfind("# label=", 0) == 0) {
                seq.label = raw.substr(eq + 1);
            } else if (raw.rfind("# duration_s=", 0) == 0) {
                seq.nominal_duration_s = parse_real(raw.substr(eq + 1), line);
            }
            continue;
        }
        std::istringstream ls(raw);
        std::string op;
        ls >> op;
        std::vector<std::string> args;
        for (std::string a; ls >> a;) {
            args.push_back(a);
        }
        auto need = [&](std::size_t n) {
            if (args.size() != n) {
                throw Error("parse_error", "line " + std::to_string(line) + ": " + op + " expects " +
                                               std::to_string(n) + " arguments");
            }
        };
        if (op == "ROT") {
            need(2);
            double angle = parse_real(args[1], line);
            if (args[0].size() == 1) {
                seq.gates.push_back(Gate::rotation(args[0][0], angle));
            } else {
                double n[3];
                std::stringstream as(args[0]);
                std::string part;
                for (int i = 0; i < 3; ++i) {
                    if (!std::getline(as, part, ',')) {
                        throw Error("parse_error", "line " + std::to_string(line) + ": bad axis");
                    }
                    n[i] = parse_real(part, line);
                }
                // Keep the stored axis bit-exact: it was normalized when written.
                Gate g = Gate::rotation(n, angle);
                for (int i = 0; i < 3; ++i) {
                    g.axis[i] = n[i];
                }
                seq.gates.push_back(g);
            }
        } else if (op == "CNOD") {
            std::vector<cx> alpha;
            double tau = 0.0;
            for (const auto &a : args) {
                if (a.rfind("tau=", 0) == 0) {
                    tau = parse_real(a.substr(4), line);
                } else {
                    alpha.push_back(parse_complex(a));
                }
            }
            seq.gates.push_back(Gate::cnod(alpha, tau));
        } else if (op == "DISP") {
            need(2);
            seq.gates.push_back(Gate::displace(static_cast<int>(parse_real(args[0], line)), parse_complex(args[1])));
        } else if (op == "FRAME") {
            need(2);
            seq.gates.push_back(
                Gate::digital_rotation(static_cast<int>(parse_real(args[0], line)), parse_real(args[1], line)));
        } else if (op == "WAIT") {
            need(1);
            seq.gates.push_back(Gate::wait(parse_real(args[0], line)));
        } else {
            throw Error("parse_error", "line " + std::to_string(line) + ": unknown gate '" + op + "'");
        }
    }
    if (seq.gates.empty()) {
        throw Error("parse_error", "sequence is empty");
    }
    return seq;
}

Operator ideal_cnod(const HilbertSpace &space, const std::vector<cx> &alpha) {
    for (int k = 0; k < space.num_modes(); ++k) {
        if (std::norm(alpha.at(k) / 2.0) > space.mode_dim(k) / 4.0) {
            warn("CNOD displacement exceeds truncation budget on mode " + std::to_string(k));
        }
    }
    CMat x = CMat::Identity(space.dim(), space.dim());
    apply_cnod_left(x, space, alpha);
    return {x, space};
}

Operator rotation(const HilbertSpace &space, const double axis[3], double angle) {
    Gate g = Gate::rotation(axis, angle);
    return tensor_embed_ancilla(CMat(ancilla_rotation(g.axis, angle)), space);
}

Operator rotation(const HilbertSpace &space, char axis, double angle) {
    Gate g = Gate::rotation(axis, angle);
    return tensor_embed_ancilla(CMat(ancilla_rotation(g.axis, angle)), space);
}

Operator unconditional_displacement(const HilbertSpace &space, int mode, cx alpha) {
    return displacement_op(space, mode, alpha);
}

namespace {

void left_apply(CMat &x, const HilbertSpace &space, const Gate &gate) {
    switch (gate.kind) {
        case Gate::Kind::Rotation:
            apply_ancilla_left(x, space, ancilla_rotation(gate.axis, gate.angle));
            break;
        case Gate::Kind::Cnod:
            if (static_cast<int>(gate.alpha.size()) != space.num_modes()) {
                throw Error("dimension_error", "CNOD amplitude count does not match mode count");
            }
            apply_cnod_left(x, space, gate.alpha);
            break;
        case Gate::Kind::Displace:
            apply_mode_left(x, space, gate.mode, mode_displacement(space.mode_dim(gate.mode), gate.displacement));
            break;
        case Gate::Kind::DigitalRotation: {
            int n = space.mode_dim(gate.mode);
            CMat r = CMat::Zero(n, n);
            for (int k = 0; k < n; ++k) {
                r(k, k) = std::exp(kI * (gate.angle * k));
            }
            apply_mode_left(x, space, gate.mode, r);
            break;
        }
        case Gate::Kind::Wait:
            break;
    }
}

}  // namespace

void apply_gate(CMat &x, const HilbertSpace &space, const Gate &gate, bool density) {
    if (density) {
        conjugate(x, [&](CMat &m) { left_apply(m, space, gate); });
    } else {
        left_apply(x, space, gate);
    }
}

State apply_sequence(const State &state, const GateSequence &seq) {
    const HilbertSpace &space = state.space();
    bool density = !state.is_pure();
    CMat x = density ? state.rho() : CMat(state.ket());
    for (const auto &g : seq.gates) {
        apply_gate(x, space, g, density);
    }
    if (density) {
        return State::from_density(x, space);
    }
    return State::from_ket(x.col(0), space);
}

double gate_duration(const Gate &gate, const DeviceParams &device) {
    switch (gate.kind) {
        case Gate::Kind::Rotation:
            if (gate.angle == 0.0) {
                return 0.0;
            }
            return std::abs(gate.angle) <= kPi / 2.0 * (1.0 + 1e-9) ? device.half_pi_pulse_s : device.pi_pulse_s;
        case Gate::Kind::Cnod:
            return 2.0 * (gate.tau_s > 0.0 ? gate.tau_s : device.pulse_tau_s) + device.pi_pulse_s;
        case Gate::Kind::Wait:
            return gate.duration_s;
        default:
            return 0.0;
    }
}

double sequence_duration(const GateSequence &seq, const DeviceParams &device) {
    double t = 0.0;
    for (const auto &g : seq.gates) {
        t += gate_duration(g, device);
    }
    return t;
}

CatTarget parse_cat_target(const std::string &name) {
    if (name == "single_A" || name == "single-a" || name == "single_a" || name == "alice") {
        return CatTarget::SingleA;
    }
    if (name == "single_B" || name == "single-b" || name == "single_b" || name == "bob") {
        return CatTarget::SingleB;
    }
    if (name == "product") {
        return CatTarget::Product;
    }
    if (name == "bell") {
        return CatTarget::Bell;
    }
    throw Error("validation_error", "unknown cat target '" + name + "'");
}

std::string cat_target_name(CatTarget t) {
    switch (t) {
        case CatTarget::SingleA:
            return "single_A";
        case CatTarget::SingleB:
            return "single_B";
        case CatTarget::Product:
            return "product";
        case CatTarget::Bell:
            return "bell";
    }
    return "";
}

double reported_generation_time(CatTarget t) {
    switch (t) {
        case CatTarget::SingleA:
            return 476e-9;
        case CatTarget::SingleB:
            return 620e-9;
        case CatTarget::Bell:
            return 1312e-9;
        case CatTarget::Product:
            return 0.0;
    }
    return 0.0;
}

namespace {

std::vector<cx> one_mode(int n, int mode, cx value) {
    std::vector<cx> v(n, 0.0);
    v.at(mode) = value;
    return v;
}

// Single-mode recipe on `mode`: [R_n(theta)] -> CNOD(2 alpha) -> R_y(pi/2) -> CNOD(i beta).
std::vector<Gate> single_recipe(int n_modes, int mode, cx alpha, const CatOptions &opt, bool with_rotation,
                                double tau) {
    std::vector<Gate> g;
    if (with_rotation) {
        double axis[3] = {std::cos(opt.phi), std::sin(opt.phi), 0.0};
        g.push_back(Gate::rotation(axis, opt.theta));
    }
    cx big = 2.0 * alpha;
    // beta along i * alpha / |alpha| keeps the small step perpendicular for complex alpha.
    double beta = kPi / (2.0 * std::abs(big));
    cx small = kI * beta * (alpha / std::abs(alpha));
    g.push_back(Gate::cnod(one_mode(n_modes, mode, big), tau));
    g.push_back(Gate::rotation('y', kPi / 2.0));
    g.push_back(Gate::cnod(one_mode(n_modes, mode, small), tau));
    return g;
}

double solve_tau(const std::vector<Gate> &gates, double total, const DeviceParams &device) {
    double fixed = 0.0;
    int cnods = 0;
    for (const auto &g : gates) {
        if (g.kind == Gate::Kind::Cnod) {
            fixed += device.pi_pulse_s;
            ++cnods;
        } else {
            fixed += gate_duration(g, device);
        }
    }
    double tau = (total - fixed) / (2.0 * cnods);
    if (!(tau > 0.0)) {
        throw Error("validation_error", "reported timing leaves no room for the CNOD pulses");
    }
    return tau;
}

void set_tau(std::vector<Gate> &gates, double tau) {
    for (auto &g : gates) {
        if (g.kind == Gate::Kind::Cnod) {
            g.tau_s = tau;
        }
    }
}

}  // namespace

GateSequence compile_cat_sequence(CatTarget target, const std::vector<cx> &alpha, const DeviceParams &device,
                                  const CatOptions &opt) {
    int n = static_cast<int>(alpha.size());
    if (n < 1) {
        throw Error("validation_error", "compile_cat_sequence needs per-mode amplitudes");
    }
    auto check = [&](int mode) {
        if (mode >= n) {
            throw Error("validation_error", "target mode missing from amplitude vector");
        }
        if (std::abs(alpha[mode]) == 0.0) {
            throw Error("validation_error", "beta is undetermined for a zero cat amplitude");
        }
    };
    GateSequence seq;
    seq.label = cat_target_name(target);
    auto finish = [&](std::vector<Gate> gates, CatTarget timing) {
        double tau = opt.match_reported_timing ? solve_tau(gates, reported_generation_time(timing), device)
                                               : device.pulse_tau_s;
        set_tau(gates, tau);
        return gates;
    };
    switch (target) {
        case CatTarget::SingleA:
            check(0);
            seq.gates = finish(single_recipe(n, 0, alpha[0], opt, true, 0.0), CatTarget::SingleA);
            break;
        case CatTarget::SingleB:
            check(1);
            seq.gates = finish(single_recipe(n, 1, alpha[1], opt, true, 0.0), CatTarget::SingleB);
            break;
        case CatTarget::Product: {
            check(0);
            check(1);
            auto bob = finish(single_recipe(n, 1, alpha[1], opt, true, 0.0), CatTarget::SingleB);
            // Alice's recipe starts from the ancilla left in |+i> by Bob's recipe, which is
            // what her first rotation would have produced.
            auto alice_full = single_recipe(n, 0, alpha[0], opt, true, 0.0);
            double tau_a = opt.match_reported_timing
                               ? solve_tau(alice_full, reported_generation_time(CatTarget::SingleA), device)
                               : device.pulse_tau_s;
            auto alice = single_recipe(n, 0, alpha[0], opt, false, tau_a);
            seq.gates = bob;
            seq.gates.insert(seq.gates.end(), alice.begin(), alice.end());
            break;
        }
        case CatTarget::Bell: {
            check(0);
            check(1);
            std::vector<Gate> g;
            double axis[3] = {std::cos(opt.phi), std::sin(opt.phi), 0.0};
            g.push_back(Gate::rotation(axis, opt.theta));
            g.push_back(Gate::cnod(one_mode(n, 1, 2.0 * alpha[1])));
            g.push_back(Gate::rotation('y', kPi));
            g.push_back(Gate::cnod(one_mode(n, 0, 2.0 * alpha[0])));
            g.push_back(Gate::rotation('y', kPi / 2.0));
            // sum_i |2 alpha_i| beta_i = pi/2 with beta_i proportional to 1/|alpha_i|.
            std::vector<cx> small(n, 0.0);
            for (int k = 0; k < 2; ++k) {
                double beta = kPi / (2.0 * 2.0 * std::abs(2.0 * alpha[k]));
                small[k] = kI * beta * (alpha[k] / std::abs(alpha[k]));
            }
            g.push_back(Gate::cnod(small));
            seq.gates = finish(g, CatTarget::Bell);
            break;
        }
    }
    seq.nominal_duration_s = sequence_duration(seq, device);
    return seq;
}

State cat_target_state(CatTarget target, const std::vector<cx> &alpha, const HilbertSpace &space, double theta,
                       double phi) {
    CVec anc(2);
    anc << 1.0 / std::sqrt(2.0), kI / std::sqrt(2.0);
    cx c0 = std::cos(theta / 2.0);
    cx c1 = -std::sin(theta / 2.0) * std::exp(kI * phi);
    auto logical = [&](int mode, cx a) {
        int n = space.mode_dim(mode);
        CVec v = c0 * coherent_vector(n, a) + c1 * coherent_vector(n, -a);
        return CVec(v / v.norm());
    };
    auto vac = [&](int mode) { return fock_vector(space.mode_dim(mode), 0); };
    int nm = space.num_modes();
    switch (target) {
        case CatTarget::SingleA: {
            std::vector<CVec> modes;
            for (int k = 0; k < nm; ++k) {
                modes.push_back(k == 0 ? logical(0, alpha.at(0)) : vac(k));
            }
            return product_state(space, anc, modes);
        }
        case CatTarget::SingleB: {
            std::vector<CVec> modes;
            for (int k = 0; k < nm; ++k) {
                modes.push_back(k == 1 ? logical(1, alpha.at(1)) : vac(k));
            }
            return product_state(space, anc, modes);
        }
        case CatTarget::Product: {
            int na = space.mode_dim(0);
            CVec even = cat_vector(na, alpha.at(0), 0.0);
            return product_state(space, anc, {even, logical(1, alpha.at(1))});
        }
        case CatTarget::Bell: {
            int na = space.mode_dim(0), nb = space.mode_dim(1);
            CVec plus = kron(coherent_vector(na, alpha.at(0)), coherent_vector(nb, alpha.at(1))).col(0);
            CVec minus = kron(coherent_vector(na, -alpha.at(0)), coherent_vector(nb, -alpha.at(1))).col(0);
            CVec modes = c0 * plus + c1 * minus;
            modes /= modes.norm();
            CVec full = kron(anc, modes).col(0);
            return State::from_ket(full, space);
        }
    }
    throw Error("validation_error", "unknown target");
}

QcMapResult qc_map(double theta, double phi, const std::vector<cx> &alpha, const std::vector<double> &beta,
                   const HilbertSpace &space) {
    int nm = space.num_modes();
    if (static_cast<int>(alpha.size()) != nm || static_cast<int>(beta.size()) != nm) {
        throw Error("dimension_error", "qc_map needs one alpha and beta per mode");
    }
    double constraint = 0.0;
    for (int k = 0; k < nm; ++k) {
        constraint += std::abs(alpha[k]) * beta[k];
    }
    if (std::abs(constraint - kPi / 2.0) > 1e-9) {
        throw Error("validation_error", "sum alpha_i beta_i must equal pi/2");
    }
    GateSequence seq;
    double axis[3] = {std::cos(phi), std::sin(phi), 0.0};
    seq.gates.push_back(Gate::rotation(axis, theta));
    seq.gates.push_back(Gate::cnod(alpha));
    seq.gates.push_back(Gate::rotation('y', kPi / 2.0));
    std::vector<cx> small(nm);
    for (int k = 0; k < nm; ++k) {
        small[k] = std::abs(alpha[k]) > 0.0 ? kI * beta[k] * alpha[k] / std::abs(alpha[k]) : cx(0.0);
    }
    seq.gates.push_back(Gate::cnod(small));
    QcMapResult r;
    r.state = apply_sequence(vacuum(space), seq);

    CVec anc(2);
    anc << 1.0 / std::sqrt(2.0), kI / std::sqrt(2.0);
    CMat plus = CMat::Ones(1, 1), minus = CMat::Ones(1, 1);
    for (int k = 0; k < nm; ++k) {
        plus = kron(plus, coherent_vector(space.mode_dim(k), alpha[k] / 2.0));
        minus = kron(minus, coherent_vector(space.mode_dim(k), -alpha[k] / 2.0));
    }
    CVec modes = std::cos(theta / 2.0) * plus.col(0) - std::sin(theta / 2.0) * std::exp(kI * phi) * minus.col(0);
    modes /= modes.norm();
    r.approximate = State::from_ket(kron(anc, modes).col(0), space);
    r.overlap = std::norm(r.approximate.ket().dot(r.state.ket()));
    return r;
}

CnodPulsePlan plan_cnod_pulses(const DeviceParams &device, const std::vector<cx> &alpha, double tau_s,
                               const PulseOptions &options) {
    if (static_cast<int>(alpha.size()) > device.num_modes()) {
        throw Error("dimension_error", "more CNOD amplitudes than device modes");
    }
    CnodPulsePlan plan;
    plan.tau_s = tau_s;
    double dt = options.dt_s > 0.0 ? options.dt_s : device.dt_s;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        const ModeParams &m = device.modes[k];
        AntiSymmetricSpec spec;
        spec.duration_s = tau_s;
        spec.sigma_s = options.sigma_fraction * tau_s;
        spec.null_offset_hz = options.null_offset_hz;
        spec.dt_s = dt;
        // The excited branch of mode k sits at detuning - chi in the rotating frame.
        spec.target_null_hz = m.detuning_hz - m.chi_hz;
        PulseShape base = make_antisymmetric(spec);
        // Size so the ground branch ends at alpha/2: alpha_g(T) = e^{-i omega_g T} x semiclassical.
        double omega_g = kTwoPi * m.detuning_hz;
        cx target = alpha[k] / 2.0 * std::exp(kI * (omega_g * base.duration()));
        PulseShape first = base.scaled(target / semiclassical_displacement(base, m.detuning_hz));
        plan.first.push_back(first);
        plan.second.push_back(first.scaled(-1.0));
        plan.frame_angle.push_back(-device.chi_angular(static_cast<int>(k)) * first.duration() + device.frame_error_rad);
    }
    return plan;
}

namespace {

struct BranchTrack {
    std::vector<cx> alpha;
    double phase = 0.0;
};

void track_pulses(BranchTrack br[2], const std::vector<PulseShape> &pulses, const DeviceParams &device) {
    for (int b = 0; b < 2; ++b) {
        for (std::size_t k = 0; k < pulses.size(); ++k) {
            const PulseShape p = pulses[k].scaled(device.drive_scale);
            double omega = kTwoPi * device.modes[k].detuning_hz - (b == 1 ? device.chi_angular(static_cast<int>(k)) : 0.0);
            cx a = br[b].alpha[k];
            for (std::size_t s = 0; s < p.samples.size(); ++s) {
                br[b].phase -= branch_energy(a, p, s, omega);
                a = branch_step(a, p, s, omega);
            }
            br[b].alpha[k] = a;
        }
    }
}

}  // namespace

double geometric_phase_of(const GateSequence &seq, const DeviceParams &device, const PulseOptions &options) {
    std::size_t nm = 0;
    for (const auto &g : seq.gates) {
        if (g.kind == Gate::Kind::Cnod) {
            nm = std::max(nm, g.alpha.size());
        } else if (g.kind == Gate::Kind::Displace || g.kind == Gate::Kind::DigitalRotation) {
            nm = std::max(nm, static_cast<std::size_t>(g.mode + 1));
        }
    }
    BranchTrack br[2];
    br[0].alpha.assign(nm, 0.0);
    br[1].alpha.assign(nm, 0.0);
    auto swap_labels = [&] { std::swap(br[0], br[1]); };
    for (const auto &g : seq.gates) {
        switch (g.kind) {
            case Gate::Kind::Rotation: {
                double a = std::remainder(g.angle, 2.0 * kPi);
                if (std::abs(a) < 1e-12) {
                    break;
                }
                if (std::abs(std::abs(a) - kPi) > 1e-9 || std::abs(g.axis[2]) > 1e-12) {
                    throw Error("validation_error", "geometric phase tracking supports only in-plane pi rotations");
                }
                swap_labels();
                break;
            }
            case Gate::Kind::Displace:
                for (auto &b : br) {
                    cx prev = b.alpha[g.mode];
                    b.phase += std::imag(g.displacement * std::conj(prev));
                    b.alpha[g.mode] = prev + g.displacement;
                }
                break;
            case Gate::Kind::DigitalRotation:
                for (auto &b : br) {
                    b.alpha[g.mode] *= std::exp(kI * g.angle);
                }
                break;
            case Gate::Kind::Wait:
                for (int b = 0; b < 2; ++b) {
                    for (std::size_t k = 0; k < nm; ++k) {
                        double omega = kTwoPi * device.modes[k].detuning_hz -
                                       (b == 1 ? device.chi_angular(static_cast<int>(k)) : 0.0);
                        br[b].alpha[k] *= std::exp(-kI * (omega * g.duration_s));
                    }
                }
                break;
            case Gate::Kind::Cnod: {
                double tau = g.tau_s > 0.0 ? g.tau_s : device.pulse_tau_s;
                CnodPulsePlan plan = plan_cnod_pulses(device, g.alpha, tau, options);
                track_pulses(br, plan.first, device);
                swap_labels();
                for (auto &b : br) {
                    for (std::size_t k = 0; k < g.alpha.size(); ++k) {
                        b.alpha[k] *= std::exp(kI * plan.frame_angle[k]);
                    }
                }
                track_pulses(br, plan.second, device);
                break;
            }
        }
    }
    return std::remainder(br[1].phase - br[0].phase, 2.0 * kPi);
}

}  // namespace cnod
