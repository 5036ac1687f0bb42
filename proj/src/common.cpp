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

#include "cnod/common.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

namespace cnod {

namespace {

std::mutex warning_mutex;
WarningHandler warning_handler;
std::atomic<int> default_threads{0};

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard<std::mutex> lock(warning_mutex);
    std::swap(handler, warning_handler);
    return handler;
}

void warn(const std::string &message) {
    std::lock_guard<std::mutex> lock(warning_mutex);
    if (warning_handler) {
        warning_handler(message);
    } else {
        std::cerr << "warning: " << message << "\n";
    }
}

CMat expm(const CMat &a) {
    return a.exp();
}

CMat expm_multiply(const CMat &a, const CMat &v, double tol) {
    double norm = a.cwiseAbs().colwise().sum().maxCoeff();
    int steps = std::max(1, static_cast<int>(std::ceil(norm / 2.0)));
    CMat scaled = a / static_cast<double>(steps);
    CMat out = v;
    for (int s = 0; s < steps; ++s) {
        CMat term = out;
        CMat acc = out;
        double base = std::max(acc.norm(), 1e-300);
        for (int k = 1; k < 60; ++k) {
            term = scaled * term / static_cast<double>(k);
            acc += term;
            if (term.norm() < tol * base) {
                break;
            }
        }
        out = acc;
    }
    return out;
}

CVec expmv(const CMat &a, const CVec &v, double tol) {
    return expm_multiply(a, CMat(v), tol).col(0);
}

CMat kron(const CMat &a, const CMat &b) {
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

void set_default_threads(int n) {
    default_threads = n;
}

int thread_count(int requested) {
    if (requested > 0) {
        return requested;
    }
    if (default_threads > 0) {
        return default_threads;
    }
    if (const char *env = std::getenv("CNODSIM_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) {
            return n;
        }
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &body) {
    int workers = std::min<int>(thread_count(threads), static_cast<int>(n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) {
                    return;
                }
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    next = n;
                }
            }
        });
    }
    for (auto &t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string format_complex(cx z) {
    std::string re = format_double(z.real());
    std::string im = format_double(z.imag());
    if (im[0] != '-') {
        im = "+" + im;
    }
    return re + im + "i";
}

cx parse_complex(const std::string &text) {
    std::string s;
    for (char c : text) {
        if (c != ' ') {
            s += c;
        }
    }
    if (s.empty()) {
        throw Error("parse_error", "empty complex literal");
    }
    if (s.back() != 'i') {
        std::size_t used = 0;
        double re = 0.0;
        try {
            re = std::stod(s, &used);
        } catch (const std::logic_error &) {
            used = 0;
        }
        if (used != s.size()) {
            throw Error("parse_error", "bad complex literal '" + text + "'");
        }
        return {re, 0.0};
    }
    // Find the sign that separates real and imaginary parts (not an exponent sign).
    std::size_t split = std::string::npos;
    for (std::size_t k = s.size() - 1; k > 0; --k) {
        if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
            split = k;
            break;
        }
    }
    try {
        if (split == std::string::npos) {
            std::string body = s.substr(0, s.size() - 1);
            return {0.0, body.empty() || body == "+" ? 1.0 : (body == "-" ? -1.0 : std::stod(body))};
        }
        double re = std::stod(s.substr(0, split));
        std::string body = s.substr(split, s.size() - 1 - split);
        double im = body == "+" ? 1.0 : (body == "-" ? -1.0 : std::stod(body));
        return {re, im};
    } catch (const std::logic_error &) {
        throw Error("parse_error", "bad complex literal '" + text + "'");
    }
}

}  // namespace cnod
