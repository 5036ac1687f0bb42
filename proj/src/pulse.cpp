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

#include "cnod/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include <fftw3.h>

namespace cnod {

namespace {

// (e^z - 1) / z, accurate near z = 0.
cx phi1(cx z) {
    if (std::abs(z) < 1e-5) {
        return 1.0 + z / 2.0 + z * z / 6.0;
    }
    return (std::exp(z) - 1.0) / z;
}

// FFTW planning is not thread-safe.
std::mutex fftw_mutex;

}  // namespace

cx PulseShape::drive_at(double t) const {
    if (t < 0.0 || samples.empty()) {
        return 0.0;
    }
    auto k = static_cast<std::size_t>(t / dt);
    if (k >= samples.size()) {
        return 0.0;
    }
    return samples[k] * std::exp(-kI * (kTwoPi * carrier_detuning_hz * t));
}

PulseShape PulseShape::scaled(cx factor) const {
    PulseShape out = *this;
    for (auto &s : out.samples) {
        s *= factor;
    }
    return out;
}

void PulseShape::validate() const {
    if (samples.empty() || !(dt > 0.0)) {
        throw Error("validation_error", "pulse needs samples and dt > 0");
    }
    for (const auto &s : samples) {
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
            throw Error("validation_error", "pulse sample is not finite");
        }
    }
}

double AntiSymmetricSpec::effective_null_offset() const {
    return null_offset_hz > 0.0 ? null_offset_hz : 0.5 / duration_s;
}

void AntiSymmetricSpec::validate() const {
    if (!(sigma_s > 0.0) || !(duration_s > 0.0) || !(dt_s > 0.0)) {
        throw Error("validation_error", "pulse spec needs positive sigma, duration and dt");
    }
    if (duration_s < 2.0 * sigma_s * (1.0 - 1e-12)) {
        throw Error("validation_error", "pulse duration must be >= 2 sigma");
    }
    if (duration_s < 2.0 * dt_s) {
        throw Error("validation_error", "pulse shorter than two samples");
    }
}

namespace {

std::size_t sample_count(const AntiSymmetricSpec &spec) {
    return static_cast<std::size_t>(std::llround(spec.duration_s / spec.dt_s));
}

double centre_offset(std::size_t k, std::size_t n, double dt) {
    return (static_cast<double>(k) + 0.5 - 0.5 * static_cast<double>(n)) * dt;
}

}  // namespace

PulseShape make_antisymmetric(const AntiSymmetricSpec &spec) {
    spec.validate();
    std::size_t n = sample_count(spec);
    PulseShape p;
    p.dt = spec.duration_s / static_cast<double>(n);
    p.carrier_detuning_hz = spec.target_null_hz;
    p.samples.assign(n, 0.0);
    double delta = spec.effective_null_offset();
    // Fill the second half and mirror, so odd symmetry holds bit for bit.
    for (std::size_t k = n / 2; k < n; ++k) {
        double u = centre_offset(k, n, p.dt);
        double g = std::exp(-u * u / (2.0 * spec.sigma_s * spec.sigma_s));
        cx v = spec.amplitude * g * std::sin(kTwoPi * delta * u);
        p.samples[k] = v;
        p.samples[n - 1 - k] = -v;
    }
    if (n % 2 == 1) {
        p.samples[n / 2] = 0.0;
    }
    return p;
}

PulseShape make_two_gaussian(const AntiSymmetricSpec &spec) {
    spec.validate();
    std::size_t n = sample_count(spec);
    PulseShape p;
    p.dt = spec.duration_s / static_cast<double>(n);
    p.carrier_detuning_hz = spec.target_null_hz;
    p.samples.resize(n);
    double delta = spec.effective_null_offset();
    for (std::size_t k = 0; k < n; ++k) {
        double u = centre_offset(k, n, p.dt);
        double g = std::exp(-u * u / (2.0 * spec.sigma_s * spec.sigma_s));
        cx upper = std::exp(kI * (kTwoPi * delta * u));
        cx lower = std::exp(-kI * (kTwoPi * delta * u));
        p.samples[k] = spec.amplitude * g * (upper - lower) / (2.0 * kI);
    }
    return p;
}

PulseShape make_gaussian(const AntiSymmetricSpec &spec) {
    spec.validate();
    std::size_t n = sample_count(spec);
    PulseShape p;
    p.dt = spec.duration_s / static_cast<double>(n);
    p.carrier_detuning_hz = spec.target_null_hz;
    p.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        double u = centre_offset(k, n, p.dt);
        p.samples[k] = spec.amplitude * std::exp(-u * u / (2.0 * spec.sigma_s * spec.sigma_s));
    }
    return p;
}

PulseShape make_ecd_pulse(double duration_s, double sigma_s, double length_s, double dt_s,
                          double carrier_detuning_hz) {
    if (!(duration_s >= 2.0 * length_s) || !(sigma_s > 0.0) || !(dt_s > 0.0)) {
        throw Error("validation_error", "ECD pulse needs duration >= 2 * length");
    }
    auto n = static_cast<std::size_t>(std::llround(duration_s / dt_s));
    PulseShape p;
    p.dt = duration_s / static_cast<double>(n);
    p.carrier_detuning_hz = carrier_detuning_hz;
    p.samples.assign(n, 0.0);
    auto bump = [&](double t, double c) {
        double u = t - c;
        return std::abs(u) <= 0.5 * length_s ? std::exp(-u * u / (2.0 * sigma_s * sigma_s)) : 0.0;
    };
    for (std::size_t k = 0; k < n; ++k) {
        double t = (static_cast<double>(k) + 0.5) * p.dt;
        p.samples[k] = bump(t, 0.5 * length_s) - bump(t, duration_s - 0.5 * length_s);
    }
    return p;
}

Spectrum spectrum(const PulseShape &pulse, int padding_factor) {
    pulse.validate();
    if (padding_factor < 8) {
        throw Error("validation_error", "spectrum zero-padding factor must be >= 8");
    }
    std::size_t n = pulse.samples.size();
    std::size_t m = n * static_cast<std::size_t>(padding_factor);
    std::vector<cx> in(m, 0.0), out(m);
    std::copy(pulse.samples.begin(), pulse.samples.end(), in.begin());
    {
        std::lock_guard<std::mutex> lock(fftw_mutex);
        fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(m), reinterpret_cast<fftw_complex *>(in.data()),
                                          reinterpret_cast<fftw_complex *>(out.data()), FFTW_BACKWARD,
                                          FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
    double dt = pulse.dt;
    double t0 = pulse.duration() / 2.0;
    double wc = kTwoPi * pulse.carrier_detuning_hz;
    cx global = std::exp(-kI * (wc * t0)) * dt;
    Spectrum s;
    s.padding_factor = padding_factor;
    s.resolution_hz = 1.0 / (static_cast<double>(m) * dt);
    s.freq_hz.resize(m);
    s.values.resize(m);
    auto half = static_cast<long long>(m / 2);
    for (std::size_t idx = 0; idx < m; ++idx) {
        long long j = static_cast<long long>(idx) - half;
        std::size_t src = static_cast<std::size_t>((j + static_cast<long long>(m)) % static_cast<long long>(m));
        double nu = static_cast<double>(j) * s.resolution_hz;
        s.freq_hz[idx] = pulse.carrier_detuning_hz + nu;
        s.values[idx] = global * std::exp(kI * (kTwoPi * nu * (0.5 * dt - t0))) * out[src];
    }
    return s;
}

cx spectrum_at(const PulseShape &pulse, double freq_hz) {
    double dt = pulse.dt;
    double t0 = pulse.duration() / 2.0;
    double wc = kTwoPi * pulse.carrier_detuning_hz;
    double nu = freq_hz - pulse.carrier_detuning_hz;
    cx acc = 0.0;
    for (std::size_t k = 0; k < pulse.samples.size(); ++k) {
        double u = (static_cast<double>(k) + 0.5) * dt - t0;
        acc += pulse.samples[k] * std::exp(kI * (kTwoPi * nu * u));
    }
    return acc * dt * std::exp(-kI * (wc * t0));
}

double null_depth(const PulseShape &pulse, double freq_hz) {
    Spectrum s = spectrum(pulse);
    double peak = 0.0;
    for (const auto &v : s.values) {
        peak = std::max(peak, std::abs(v));
    }
    if (peak == 0.0) {
        return 0.0;
    }
    return std::abs(spectrum_at(pulse, freq_hz)) / peak;
}

cx semiclassical_displacement(const PulseShape &pulse, double detuning_hz) {
    double x = kTwoPi * (detuning_hz - pulse.carrier_detuning_hz);
    double h = pulse.dt;
    cx step = h * phi1(kI * (x * h));
    cx acc = 0.0;
    for (std::size_t k = 0; k < pulse.samples.size(); ++k) {
        double t0 = static_cast<double>(k) * h;
        acc += pulse.samples[k] * std::exp(kI * (x * t0));
    }
    return -kI * acc * step;
}

cx branch_partial(cx alpha, const PulseShape &pulse, std::size_t k, double omega, double u) {
    double wc = kTwoPi * pulse.carrier_detuning_hz;
    double t0 = static_cast<double>(k) * pulse.dt;
    // Local time inside the pulse: the carrier phase is referenced to the pulse start.
    double x = omega - wc;
    cx integral = std::exp(kI * (x * t0)) * u * phi1(kI * (x * u));
    return std::exp(-kI * (omega * u)) * alpha - kI * pulse.samples[k] * std::exp(-kI * (omega * (t0 + u))) * integral;
}

cx branch_step(cx alpha, const PulseShape &pulse, std::size_t k, double omega) {
    return branch_partial(alpha, pulse, k, omega, pulse.dt);
}

double branch_energy(cx alpha, const PulseShape &pulse, std::size_t k, double omega) {
    // Composite Simpson rule; alpha(t) is evaluated exactly.
    constexpr int kPanels = 8;
    double h = pulse.dt / kPanels;
    double t0 = static_cast<double>(k) * pulse.dt;
    double wc = kTwoPi * pulse.carrier_detuning_hz;
    double acc = 0.0;
    for (int j = 0; j <= kPanels; ++j) {
        double u = j * h;
        cx a = branch_partial(alpha, pulse, k, omega, u);
        cx eps = pulse.samples[k] * std::exp(-kI * (wc * (t0 + u)));
        double f = (eps * std::conj(a)).real();
        double w = (j == 0 || j == kPanels) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
        acc += w * f;
    }
    return acc * h / 3.0;
}

std::vector<cx> branch_trajectory(const PulseShape &pulse, double omega, cx alpha0) {
    std::vector<cx> traj(pulse.samples.size() + 1);
    traj[0] = alpha0;
    for (std::size_t k = 0; k < pulse.samples.size(); ++k) {
        traj[k + 1] = branch_step(traj[k], pulse, k, omega);
    }
    return traj;
}

PulseShape size_for_displacement(const PulseShape &pulse, cx target) {
    cx unit = semiclassical_displacement(pulse, 0.0);
    if (std::abs(unit) < 1e-300) {
        if (std::abs(target) == 0.0) {
            return pulse.scaled(0.0);
        }
        throw Error("validation_error", "pulse produces no displacement on the ground branch");
    }
    return pulse.scaled(target / unit);
}

double compare_peak_amplitude(const PulseShape &cnod_pulse, const PulseShape &ecd_pulse, double offset_hz) {
    if (std::abs(cnod_pulse.duration() - ecd_pulse.duration()) > 1e-3 * cnod_pulse.duration() ||
        cnod_pulse.carrier_detuning_hz != ecd_pulse.carrier_detuning_hz) {
        throw Error("normalization_error", "pulses must share duration and carrier for the comparison");
    }
    auto peak_per_displacement = [&](const PulseShape &p) {
        double d = std::abs(semiclassical_displacement(p, p.carrier_detuning_hz + offset_hz));
        if (d < 1e-300) {
            throw Error("normalization_error", "pulse has no displacement at the comparison detuning");
        }
        double peak = 0.0;
        for (const auto &s : p.samples) {
            peak = std::max(peak, std::abs(s));
        }
        return peak / d;
    };
    return 20.0 * std::log10(peak_per_displacement(ecd_pulse) / peak_per_displacement(cnod_pulse));
}

void write_pulse_csv(const PulseShape &pulse, const std::string &path, const std::vector<std::string> &meta) {
    std::ofstream f(path);
    if (!f) {
        throw Error("io_error", "cannot write " + path);
    }
    f << "# dt_s=" << format_double(pulse.dt) << "\n";
    f << "# carrier_detuning_hz=" << format_double(pulse.carrier_detuning_hz) << "\n";
    for (const auto &m : meta) {
        f << "# " << m << "\n";
    }
    f << "t_s,re,im\n";
    for (std::size_t k = 0; k < pulse.samples.size(); ++k) {
        f << format_double((static_cast<double>(k) + 0.5) * pulse.dt) << "," << format_double(pulse.samples[k].real())
          << "," << format_double(pulse.samples[k].imag()) << "\n";
    }
}

PulseShape read_pulse_csv(const std::string &path) {
    std::ifstream f(path);
    if (!f) {
        throw Error("io_error", "cannot read " + path);
    }
    PulseShape p;
    p.dt = 0.0;
    std::string line;
    std::vector<double> times;
    while (std::getline(f, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            auto eq = line.find('=');
            if (eq == std::string::npos) {
                continue;
            }
            std::string key = line.substr(2, eq - 2);
            double v = std::stod(line.substr(eq + 1));
            if (key == "dt_s") {
                p.dt = v;
            } else if (key == "carrier_detuning_hz") {
                p.carrier_detuning_hz = v;
            }
            continue;
        }
        if (line.rfind("t_s", 0) == 0) {
            continue;
        }
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',')) {
            throw Error("parse_error", "bad pulse row '" + line + "'");
        }
        times.push_back(std::stod(a));
        p.samples.emplace_back(std::stod(b), std::stod(c));
    }
    if (p.dt <= 0.0 && times.size() >= 2) {
        p.dt = times[1] - times[0];
    }
    p.validate();
    return p;
}

}  // namespace cnod
