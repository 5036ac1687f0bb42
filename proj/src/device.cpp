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

#include "cnod/device.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace cnod {

int DeviceParams::mode_index(const std::string &name) const {
    for (int k = 0; k < num_modes(); ++k) {
        if (modes[k].name == name) {
            return k;
        }
    }
    throw Error("validation_error", "unknown mode '" + name + "'");
}

double DeviceParams::chi_angular(int mode) const {
    return kTwoPi * modes.at(mode).chi_hz;
}

double DeviceParams::kerr_hz(int i, int j) const {
    if (i > j) {
        std::swap(i, j);
    }
    auto it = kerr_overrides.find({i, j});
    if (it != kerr_overrides.end()) {
        return it->second;
    }
    return modes.at(i).chi_hz * modes.at(j).chi_hz / (2.0 * anharmonicity_hz);
}

double DeviceParams::ancilla_dephasing_rate() const {
    double r = 1.0 / ancilla_t2e_s - 1.0 / (2.0 * ancilla_t1_s);
    return std::max(0.0, r);
}

void DeviceParams::validate() const {
    auto positive = [](double v, const std::string &field) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw Error("validation_error", field + " must be positive");
        }
    };
    if (modes.empty()) {
        throw Error("validation_error", "device has no modes");
    }
    for (const auto &m : modes) {
        positive(m.chi_hz, m.name + ".chi_hz");
        positive(m.t1_s, m.name + ".t1_s");
        positive(m.freq_hz, m.name + ".freq_hz");
    }
    positive(ancilla_t1_s, "ancilla.t1_s");
    positive(ancilla_t2e_s, "ancilla.t2e_s");
    positive(ancilla_freq_hz, "ancilla.freq_hz");
    positive(anharmonicity_hz, "transmon.anharmonicity_hz");
    positive(dt_s, "sim.dt_s");
    positive(drive_scale, "sim.drive_scale");
    positive(pulse_tau_s, "pulse.tau_s");
    positive(pi_pulse_s, "pulse.pi_s");
    positive(half_pi_pulse_s, "pulse.half_pi_s");
    if (truncation < 2) {
        throw Error("validation_error", "sim.truncation must be >= 2");
    }
    if (ancilla_t2e_s > 2.0 * ancilla_t1_s) {
        throw Error("validation_error", "ancilla.t2e_s exceeds 2*ancilla.t1_s");
    }
    if (readout_error < 0.0 || readout_error >= 0.5) {
        throw Error("validation_error", "readout.error must be in [0, 0.5)");
    }
    for (const auto &[key, v] : kerr_overrides) {
        if (!std::isfinite(v)) {
            throw Error("validation_error", "kerr override must be finite");
        }
    }
}

DeviceParams default_device() {
    DeviceParams d;
    d.modes.push_back({"alice", 6.56e9, 220e3, 61e-6, 0.0});
    d.modes.push_back({"bob", 8.02e9, 33.5e3, 37e-6, 0.0});
    return d;
}

namespace {

std::string trim(const std::string &s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
        return "";
    }
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string &text, const std::string &key, int line) {
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) {
            throw std::invalid_argument("trailing");
        }
        return v;
    } catch (const std::logic_error &) {
        throw Error("parse_error", "line " + std::to_string(line) + ": bad number for " + key);
    }
}

int mode_letter(char c, const DeviceParams &d) {
    if (c == 'a' || c == '0') {
        return 0;
    }
    if (c == 'b' || c == '1') {
        return 1;
    }
    (void)d;
    return -1;
}

}  // namespace

DeviceParams load_device(const std::string &config_text) {
    DeviceParams d = default_device();
    std::istringstream in(config_text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::size_t hash = raw.find('#');
        std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) {
            continue;
        }
        std::size_t eq = body.find('=');
        if (eq == std::string::npos) {
            throw Error("parse_error", "line " + std::to_string(line) + ": expected 'section.key = value'");
        }
        std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        std::size_t dot = key.find('.');
        if (dot == std::string::npos || value.empty()) {
            throw Error("parse_error", "line " + std::to_string(line) + ": expected 'section.key = value'");
        }
        std::string section = key.substr(0, dot);
        std::string field = key.substr(dot + 1);
        double v = parse_number(value, key, line);

        if (section == "alice" || section == "bob") {
            ModeParams &m = d.modes[section == "alice" ? 0 : 1];
            if (field == "chi_hz") {
                m.chi_hz = v;
            } else if (field == "t1_s") {
                m.t1_s = v;
            } else if (field == "freq_hz") {
                m.freq_hz = v;
            } else if (field == "detuning_hz") {
                m.detuning_hz = v;
            } else {
                throw Error("validation_error", "unknown key " + key);
            }
        } else if (section == "ancilla") {
            if (field == "t1_s") {
                d.ancilla_t1_s = v;
            } else if (field == "t2e_s") {
                d.ancilla_t2e_s = v;
            } else if (field == "freq_hz") {
                d.ancilla_freq_hz = v;
            } else {
                throw Error("validation_error", "unknown key " + key);
            }
        } else if (section == "transmon" && field == "anharmonicity_hz") {
            d.anharmonicity_hz = v;
        } else if (section == "kerr") {
            if (field.size() != 5 || field.substr(2) != "_hz") {
                throw Error("validation_error", "unknown key " + key);
            }
            int i = mode_letter(field[0], d);
            int j = mode_letter(field[1], d);
            if (i < 0 || j < 0) {
                throw Error("validation_error", "unknown key " + key);
            }
            d.kerr_overrides[{std::min(i, j), std::max(i, j)}] = v;
        } else if (section == "sim") {
            if (field == "truncation") {
                if (v != std::floor(v)) {
                    throw Error("validation_error", "sim.truncation must be an integer");
                }
                d.truncation = static_cast<int>(v);
            } else if (field == "dt_s") {
                d.dt_s = v;
            } else if (field == "drive_scale") {
                d.drive_scale = v;
            } else {
                throw Error("validation_error", "unknown key " + key);
            }
        } else if (section == "pulse") {
            if (field == "tau_s") {
                d.pulse_tau_s = v;
            } else if (field == "pi_s") {
                d.pi_pulse_s = v;
            } else if (field == "half_pi_s") {
                d.half_pi_pulse_s = v;
            } else if (field == "frame_error_rad") {
                d.frame_error_rad = v;
            } else {
                throw Error("validation_error", "unknown key " + key);
            }
        } else if (section == "readout" && field == "error") {
            d.readout_error = v;
        } else {
            throw Error("validation_error", "unknown key " + key);
        }
    }
    d.validate();
    return d;
}

DeviceParams load_device_file(const std::string &path) {
    std::ifstream f(path);
    if (!f) {
        throw Error("io_error", "cannot read config " + path);
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return load_device(ss.str());
}

std::string device_to_config(const DeviceParams &d) {
    std::ostringstream out;
    for (const auto &m : d.modes) {
        out << m.name << ".freq_hz = " << format_double(m.freq_hz) << "\n";
        out << m.name << ".chi_hz = " << format_double(m.chi_hz) << "\n";
        out << m.name << ".t1_s = " << format_double(m.t1_s) << "\n";
        out << m.name << ".detuning_hz = " << format_double(m.detuning_hz) << "\n";
    }
    out << "ancilla.freq_hz = " << format_double(d.ancilla_freq_hz) << "\n";
    out << "ancilla.t1_s = " << format_double(d.ancilla_t1_s) << "\n";
    out << "ancilla.t2e_s = " << format_double(d.ancilla_t2e_s) << "\n";
    out << "transmon.anharmonicity_hz = " << format_double(d.anharmonicity_hz) << "\n";
    const char letters[] = {'a', 'b'};
    for (const auto &[key, v] : d.kerr_overrides) {
        out << "kerr." << letters[key.first] << letters[key.second] << "_hz = " << format_double(v) << "\n";
    }
    out << "sim.truncation = " << d.truncation << "\n";
    out << "sim.dt_s = " << format_double(d.dt_s) << "\n";
    out << "sim.drive_scale = " << format_double(d.drive_scale) << "\n";
    out << "pulse.tau_s = " << format_double(d.pulse_tau_s) << "\n";
    out << "pulse.pi_s = " << format_double(d.pi_pulse_s) << "\n";
    out << "pulse.half_pi_s = " << format_double(d.half_pi_pulse_s) << "\n";
    out << "pulse.frame_error_rad = " << format_double(d.frame_error_rad) << "\n";
    out << "readout.error = " << format_double(d.readout_error) << "\n";
    return out.str();
}

std::string config_hash(const DeviceParams &device) {
    // FNV-1a, 64 bit.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : device_to_config(device)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

DeviceParams select_modes(const DeviceParams &device, const std::vector<int> &modes) {
    DeviceParams out = device;
    out.modes.clear();
    out.kerr_overrides.clear();
    for (int k : modes) {
        if (k < 0 || k >= device.num_modes()) {
            throw Error("dimension_error", "mode index out of range");
        }
        out.modes.push_back(device.modes[k]);
    }
    // Pin every Kerr value so the estimate stays tied to the original pairs.
    for (std::size_t i = 0; i < modes.size(); ++i) {
        for (std::size_t j = i; j < modes.size(); ++j) {
            out.kerr_overrides[{static_cast<int>(i), static_cast<int>(j)}] = device.kerr_hz(modes[i], modes[j]);
        }
    }
    return out;
}

double speedup_ratio(double generation_time_s, double chi_hz) {
    if (!(generation_time_s > 0.0) || !(chi_hz > 0.0)) {
        throw Error("validation_error", "speedup_ratio needs positive inputs");
    }
    double chi_angular = kTwoPi * chi_hz;
    return (3.0 * kPi / chi_angular) / generation_time_s;
}

}  // namespace cnod
