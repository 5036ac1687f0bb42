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

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cnod {

using cx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
constexpr cx kI{0.0, 1.0};

// All library failures are reported through this type. `kind` is a short
// machine-readable tag (e.g. "parse_error", "validation_error").
class Error : public std::runtime_error {
  public:
    Error(std::string kind, const std::string &message)
        : std::runtime_error(message), kind_(std::move(kind)) {}
    const std::string &kind() const { return kind_; }

  private:
    std::string kind_;
};

using WarningHandler = std::function<void(const std::string &)>;

// Warnings go to stderr unless a handler is installed. Returns the previous handler.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(const std::string &message);

// Dense matrix exponential (scaling and squaring, Pade).
CMat expm(const CMat &a);

// exp(a) * v without forming exp(a). Truncated Taylor series with scaling.
CVec expmv(const CMat &a, const CVec &v, double tol = 1e-14);
// exp(a) * v for a block of columns (Taylor series with scaling).
CMat expm_multiply(const CMat &a, const CMat &v, double tol = 1e-14);

// Kronecker product.
CMat kron(const CMat &a, const CMat &b);

// Worker count: explicit request if > 0, else CNODSIM_THREADS, else hardware concurrency.
int thread_count(int requested = 0);
void set_default_threads(int n);

// Runs body(i) for i in [0, n) on up to `threads` workers. Exceptions are rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &body);

// Seed for an independent stream derived from a master seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

std::string format_double(double x);
std::string format_complex(cx z);
cx parse_complex(const std::string &text);

}  // namespace cnod
