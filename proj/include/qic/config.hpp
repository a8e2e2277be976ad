// Copyright 2026 The qiclab Authors
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
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qic {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr const char* kVersion = "0.3.0";

enum class ErrorCode {
    invalid_argument,
    dimension_mismatch,
    cap_exceeded,
    not_unitary,
    not_isometry,
    not_hermitian,
    degenerate_spectrum,
    ill_conditioned,
    stream_collision,
    empty_shell,
    unstable_estimate,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::dimension_mismatch: return "dimension_mismatch";
        case ErrorCode::cap_exceeded: return "cap_exceeded";
        case ErrorCode::not_unitary: return "not_unitary";
        case ErrorCode::not_isometry: return "not_isometry";
        case ErrorCode::not_hermitian: return "not_hermitian";
        case ErrorCode::degenerate_spectrum: return "degenerate_spectrum";
        case ErrorCode::ill_conditioned: return "ill_conditioned";
        case ErrorCode::stream_collision: return "stream_collision";
        case ErrorCode::empty_shell: return "empty_shell";
        case ErrorCode::unstable_estimate: return "unstable_estimate";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Numerical tolerances and resource caps shared by every module.
///
/// All defaults live here; experiment configs may override individual fields.
struct Tolerances {
    double norm = 1e-10;               // | ||amp|| - 1 |
    double local_unitarity = 1e-10;    // single-qudit ops and write operators
    double global_unitarity = 1e-8;    // d^N x d^N scramblers
    double hermiticity = 1e-12;
    double density_hermiticity = 1e-12;
    double trace = 1e-10;
    double eigenvalue_floor = 1e-10;   // density matrices
    double isometry = 1e-10;           // basis columns handed to subspace samplers
    double frame_imaginary = 1e-8;     // <Psi|d_j Psi> in iR
    double metric_psd_floor = 1e-8;
    double orthogonality = 1e-10;      // reparameterisation matrices
    double frequency_gap = 1e-8;       // minimal separation of generator eigenvalues
    double node_condition_warn = 1e3;
    double node_condition_fail = 1e8;
    double rank_cutoff = 1e-10;        // relative singular-value cutoff for reachable subspaces
    double energy_grid = 1e-12;        // shell membership snapping

    std::size_t max_state_dim = std::size_t{1} << 16;
    std::size_t max_dense_unitary_dim = std::size_t{1} << 12;
    std::size_t max_density_entries = std::size_t{1} << 24;

    friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

/// d^exp with overflow detection. Returns 0 when the result would exceed `cap`.
inline std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t cap) {
    std::size_t out = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (out > cap / base) return 0;
        out *= base;
    }
    return out <= cap ? out : 0;
}

}  // namespace qic
