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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "qic/config.hpp"

namespace qic {

/// Dense pure state of N qudits of local dimension d.
///
/// Linear index = sum_p i_p d^{N-p} with qudit 1 most significant, so the
/// d x d^{N-1} cut after qudit 1 is a contiguous reshape.
class PureState {
public:
    PureState(int d, int num_qudits, CVector amplitudes, const Tolerances& tol = {})
        : d_(d), n_(num_qudits), amp_(std::move(amplitudes)) {
        if (d_ < 2) throw Error(ErrorCode::invalid_argument, "local dimension must be >= 2");
        if (n_ < 1) throw Error(ErrorCode::invalid_argument, "qudit count must be >= 1");
        const std::size_t dim = checked_power(std::size_t(d_), std::size_t(n_), tol.max_state_dim);
        if (dim == 0) throw Error(ErrorCode::cap_exceeded, "d^N exceeds the state-dimension cap");
        if (std::size_t(amp_.size()) != dim)
            throw Error(ErrorCode::dimension_mismatch, "amplitude vector length must be d^N");
        if (std::abs(amp_.norm() - 1.0) > tol.norm)
            throw Error(ErrorCode::invalid_argument, "state is not normalised");
    }

    int local_dim() const noexcept { return d_; }
    int num_qudits() const noexcept { return n_; }
    std::size_t dim() const noexcept { return std::size_t(amp_.size()); }
    const CVector& amplitudes() const noexcept { return amp_; }
    Complex operator[](std::size_t i) const { return amp_[Eigen::Index(i)]; }

private:
    int d_;
    int n_;
    CVector amp_;
};

struct DensityMatrix {
    CMatrix rho;

    std::size_t dim() const noexcept { return std::size_t(rho.rows()); }
    double purity() const { return (rho * rho).trace().real(); }

    /// Throws when Hermiticity, unit trace or the eigenvalue floor is violated.
    void validate(const Tolerances& tol = {}) const {
        if (rho.rows() != rho.cols()) throw Error(ErrorCode::dimension_mismatch, "density matrix not square");
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol.density_hermiticity)
            throw Error(ErrorCode::not_hermitian, "density matrix not Hermitian");
        if (std::abs(rho.trace() - Complex(1.0)) > tol.trace)
            throw Error(ErrorCode::invalid_argument, "density matrix trace != 1");
        Eigen::SelfAdjointEigenSolver<CMatrix> es(rho, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol.eigenvalue_floor)
            throw Error(ErrorCode::invalid_argument, "density matrix has negative eigenvalue");
    }
};

struct SchmidtDecomposition {
    RVector probs;  // descending
    CMatrix left;   // d x d, columns |u_k>
    CMatrix right;  // d^{N-1} x d, columns |v_k>

    /// sum_k sqrt(p_k) |u_k> (x) |v_k> in the shared index convention.
    CVector reassemble() const {
        const Eigen::Index dl = left.rows();
        const Eigen::Index dr = right.rows();
        CVector out = CVector::Zero(dl * dr);
        for (Eigen::Index k = 0; k < probs.size(); ++k) {
            const double s = std::sqrt(std::max(probs[k], 0.0));
            for (Eigen::Index a = 0; a < dl; ++a) out.segment(a * dr, dr) += s * left(a, k) * right.col(k);
        }
        return out;
    }
};

namespace detail {

inline std::size_t ipow(std::size_t base, std::size_t exp) {
    std::size_t out = 1;
    for (std::size_t i = 0; i < exp; ++i) out *= base;
    return out;
}

inline void require_port(int port, int num_qudits) {
    if (port < 1 || port > num_qudits)
        throw Error(ErrorCode::invalid_argument, "port " + std::to_string(port) + " outside 1.." + std::to_string(num_qudits));
}

inline double unitarity_defect(const CMatrix& u) {
    return (u.adjoint() * u - CMatrix::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Applies a d x d matrix (not necessarily unitary) to qudit `port` of a raw
/// amplitude vector. Used for write operators, generators and derivative insertions.
inline CVector apply_local_matrix(const CVector& amp, const CMatrix& op, int d, int num_qudits, int port) {
    detail::require_port(port, num_qudits);
    if (op.rows() != d || op.cols() != d) throw Error(ErrorCode::dimension_mismatch, "local operator must be d x d");
    const std::size_t inner = detail::ipow(std::size_t(d), std::size_t(num_qudits - port));
    const std::size_t outer = detail::ipow(std::size_t(d), std::size_t(port - 1));
    const std::size_t block = inner * std::size_t(d);
    CVector out(amp.size());
    for (std::size_t o = 0; o < outer; ++o) {
        const std::size_t base = o * block;
        for (int a = 0; a < d; ++a) {
            auto dst = out.segment(Eigen::Index(base + std::size_t(a) * inner), Eigen::Index(inner));
            dst.setZero();
            for (int b = 0; b < d; ++b) {
                const Complex c = op(a, b);
                if (c == Complex(0.0)) continue;
                dst += c * amp.segment(Eigen::Index(base + std::size_t(b) * inner), Eigen::Index(inner));
            }
        }
    }
    return out;
}

inline PureState make_basis_state(int d, int num_qudits, std::span<const int> digits, const Tolerances& tol = {}) {
    if (d < 2) throw Error(ErrorCode::invalid_argument, "local dimension must be >= 2");
    if (num_qudits < 1) throw Error(ErrorCode::invalid_argument, "qudit count must be >= 1");
    if (digits.size() != std::size_t(num_qudits))
        throw Error(ErrorCode::dimension_mismatch, "need one digit per qudit");
    const std::size_t dim = checked_power(std::size_t(d), std::size_t(num_qudits), tol.max_state_dim);
    if (dim == 0) throw Error(ErrorCode::cap_exceeded, "d^N exceeds the state-dimension cap");
    std::size_t index = 0;
    for (int digit : digits) {
        if (digit < 0 || digit >= d) throw Error(ErrorCode::invalid_argument, "digit out of range");
        index = index * std::size_t(d) + std::size_t(digit);
    }
    CVector amp = CVector::Zero(Eigen::Index(dim));
    amp[Eigen::Index(index)] = 1.0;
    return PureState(d, num_qudits, std::move(amp), tol);
}

inline PureState make_basis_state(int d, int num_qudits, std::initializer_list<int> digits, const Tolerances& tol = {}) {
    const std::vector<int> v(digits);
    return make_basis_state(d, num_qudits, std::span<const int>(v), tol);
}

inline PureState apply_local(const PureState& state, const CMatrix& op, int port, const Tolerances& tol = {}) {
    if (op.rows() != state.local_dim() || op.cols() != state.local_dim())
        throw Error(ErrorCode::dimension_mismatch, "local operator must be d x d");
    if (detail::unitarity_defect(op) > tol.local_unitarity)
        throw Error(ErrorCode::not_unitary, "local operator is not unitary");
    return PureState(state.local_dim(), state.num_qudits(),
                     apply_local_matrix(state.amplitudes(), op, state.local_dim(), state.num_qudits(), port), tol);
}

inline PureState apply_global(const PureState& state, const CMatrix& u, const Tolerances& tol = {}) {
    if (std::size_t(u.rows()) != state.dim() || std::size_t(u.cols()) != state.dim())
        throw Error(ErrorCode::dimension_mismatch, "global operator must be d^N x d^N");
    if (detail::unitarity_defect(u) > tol.global_unitarity)
        throw Error(ErrorCode::not_unitary, "global operator is not unitary");
    return PureState(state.local_dim(), state.num_qudits(), u * state.amplitudes(), tol);
}

/// <a|b>, conjugate-linear in the first argument.
inline Complex overlap(const PureState& a, const PureState& b) {
    if (a.local_dim() != b.local_dim() || a.num_qudits() != b.num_qudits())
        throw Error(ErrorCode::dimension_mismatch, "overlap of states with different shapes");
    return a.amplitudes().dot(b.amplitudes());
}

/// Partial trace onto the ports in `keep` (1-based). Row/column order of the
/// result follows the kept ports in ascending order, most significant first.
inline DensityMatrix reduced_density(const PureState& state, const std::set<int>& keep, const Tolerances& tol = {}) {
    if (keep.empty()) throw Error(ErrorCode::invalid_argument, "keep set is empty");
    const int n = state.num_qudits();
    const std::size_t d = std::size_t(state.local_dim());
    for (int p : keep) detail::require_port(p, n);

    const std::size_t dk = detail::ipow(d, keep.size());
    if (dk > tol.max_density_entries / dk) throw Error(ErrorCode::cap_exceeded, "reduced density matrix too large");
    const std::size_t dt = state.dim() / dk;

    // Amplitude matrix M[kept, traced]; rho = M M^dagger.
    CMatrix m = CMatrix::Zero(Eigen::Index(dk), Eigen::Index(dt));
    std::vector<char> kept(std::size_t(n) + 1, 0);
    for (int p : keep) kept[std::size_t(p)] = 1;
    const CVector& amp = state.amplitudes();
    for (std::size_t idx = 0; idx < state.dim(); ++idx) {
        std::size_t rem = idx, stride = state.dim();
        std::size_t ki = 0, ti = 0;
        for (int p = 1; p <= n; ++p) {
            stride /= d;
            const std::size_t digit = rem / stride;
            rem %= stride;
            if (kept[std::size_t(p)]) ki = ki * d + digit;
            else ti = ti * d + digit;
        }
        m(Eigen::Index(ki), Eigen::Index(ti)) = amp[Eigen::Index(idx)];
    }
    DensityMatrix out{m * m.adjoint()};
    out.rho = 0.5 * (out.rho + out.rho.adjoint()).eval();
    return out;
}

/// Schmidt decomposition across the cut after qudit 1.
inline SchmidtDecomposition schmidt(const PureState& state) {
    if (state.num_qudits() < 2) throw Error(ErrorCode::invalid_argument, "Schmidt cut needs N >= 2");
    const Eigen::Index d = state.local_dim();
    const Eigen::Index rest = Eigen::Index(state.dim()) / d;
    // Column-major map of the row-major d x rest amplitude matrix is its transpose.
    const Eigen::Map<const CMatrix> at(state.amplitudes().data(), rest, d);
    const CMatrix a = at.transpose();
    Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SchmidtDecomposition sd;
    sd.probs = svd.singularValues().array().square().matrix();
    sd.probs /= sd.probs.sum();
    sd.left = svd.matrixU();
    // a = U S V^dagger, so |v_k> = conj(V_k) in the rest-of-system basis.
    sd.right = svd.matrixV().conjugate();
    return sd;
}

/// Entanglement entropy in nats, with 0 ln 0 := 0.
inline double entropy(const SchmidtDecomposition& sd) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < sd.probs.size(); ++k) {
        const double p = sd.probs[k];
        if (p > 0.0) s -= p * std::log(p);
    }
    return s;
}

inline double schmidt_purity(const SchmidtDecomposition& sd) { return sd.probs.squaredNorm(); }

}  // namespace qic
