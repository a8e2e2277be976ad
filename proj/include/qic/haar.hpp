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

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/QR>

#include "qic/config.hpp"
#include "qic/rng.hpp"
#include "qic/state.hpp"

namespace qic {

struct UnitaryMatrix {
    CMatrix entries;
    std::optional<RngStream> provenance;  // empty: explicit

    Eigen::Index dim() const noexcept { return entries.rows(); }
    double unitarity_defect() const { return detail::unitarity_defect(entries); }
};

struct MomentEstimate {
    Complex value;
    double std_error = 0.0;
    std::size_t samples = 0;
};

namespace detail {

// D x k complex Ginibre block, filled column-major so the first k columns of a
// wider draw from the same stream are identical.
inline CMatrix ginibre(Eigen::Index rows, Eigen::Index cols, const RngStream& stream) {
    ComplexGaussian g(stream);
    CMatrix a(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) a(r, c) = g();
    return a;
}

// Q factor of `a` with every column rotated so that R has a positive real diagonal.
inline CMatrix phase_fixed_q(const CMatrix& a) {
    Eigen::HouseholderQR<CMatrix> qr(a);
    CMatrix q = qr.householderQ() * CMatrix::Identity(a.rows(), a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const Complex r = q.col(j).dot(a.col(j));
        const double mag = std::abs(r);
        if (mag > 0.0) q.col(j) *= r / mag;
    }
    return q;
}

}  // namespace detail

/// Haar-distributed D x D unitary: Ginibre draw followed by a QR with R's
/// diagonal normalised to positive reals.
inline UnitaryMatrix haar_sample(std::size_t dim, const RngStream& stream, const Tolerances& tol = {}) {
    if (dim < 1) throw Error(ErrorCode::invalid_argument, "Haar dimension must be >= 1");
    if (dim > tol.max_dense_unitary_dim) throw Error(ErrorCode::cap_exceeded, "Haar dimension exceeds dense-unitary cap");
    const auto d = Eigen::Index(dim);
    return {detail::phase_fixed_q(detail::ginibre(d, d, stream)), stream};
}

/// First k columns of haar_sample(D, stream), without forming the other D - k.
inline CMatrix haar_isometry(std::size_t dim, std::size_t k, const RngStream& stream, const Tolerances& tol = {}) {
    if (k < 1 || k > dim) throw Error(ErrorCode::invalid_argument, "isometry width must be in 1..D");
    if (dim > tol.max_state_dim) throw Error(ErrorCode::cap_exceeded, "isometry height exceeds state-dimension cap");
    return detail::phase_fixed_q(detail::ginibre(Eigen::Index(dim), Eigen::Index(k), stream));
}

/// B V B^dagger + (I - B B^dagger) with V Haar on the k-dimensional span of `basis`.
inline UnitaryMatrix haar_sample_subspace(const CMatrix& basis, const RngStream& stream, const Tolerances& tol = {}) {
    const Eigen::Index dim = basis.rows();
    const Eigen::Index k = basis.cols();
    if (k < 1 || k > dim) throw Error(ErrorCode::invalid_argument, "subspace dimension must be in 1..D");
    if (std::size_t(dim) > tol.max_dense_unitary_dim)
        throw Error(ErrorCode::cap_exceeded, "subspace sampler dimension exceeds dense-unitary cap");
    if ((basis.adjoint() * basis - CMatrix::Identity(k, k)).cwiseAbs().maxCoeff() > tol.isometry)
        throw Error(ErrorCode::not_isometry, "subspace basis columns are not orthonormal");
    const UnitaryMatrix v = haar_sample(std::size_t(k), stream, tol);
    CMatrix u = basis * (v.entries - CMatrix::Identity(k, k)) * basis.adjoint();
    u += CMatrix::Identity(dim, dim);
    return {std::move(u), stream};
}

inline int kron(int a, int b) { return a == b ? 1 : 0; }

/// E[U_ij (U^dagger)_kl] = delta_il delta_jk / D, indices 1-based.
///
/// The second factor is an entry of U^dagger, i.e. conj(U_lk).
inline double moment2_exact(std::size_t dim, int i, int j, int k, int l) {
    const int n = int(dim);
    for (int idx : {i, j, k, l})
        if (idx < 1 || idx > n) throw Error(ErrorCode::invalid_argument, "moment index out of range");
    return kron(i, l) * kron(j, k) / double(dim);
}

/// E[U_ij U_kl (U^dagger)_xy (U^dagger)_zw] for Haar U on U(D), indices 1-based.
inline double moment4_exact(std::size_t dim, int i, int j, int k, int l, int x, int y, int z, int w) {
    const int n = int(dim);
    for (int idx : {i, j, k, l, x, y, z, w})
        if (idx < 1 || idx > n) throw Error(ErrorCode::invalid_argument, "moment index out of range");
    if (dim == 1) return 1.0;  // U = e^{i a}: the monomial is |e^{i a}|^4
    const double dd = double(dim);
    const double b = 1.0 / (dd * dd - 1.0);
    const double c = -1.0 / (dd * (dd * dd - 1.0));
    const int same = kron(i, y) * kron(j, x) * kron(k, w) * kron(l, z) + kron(i, w) * kron(j, z) * kron(k, y) * kron(l, x);
    const int cross = kron(i, y) * kron(j, z) * kron(k, w) * kron(l, x) + kron(i, w) * kron(j, x) * kron(k, y) * kron(l, z);
    return b * same + c * cross;
}

/// One factor of a monomial in matrix entries; row/col are 1-based entries of U,
/// `conjugate` selects U* rather than U.
struct EntryFactor {
    int row;
    int col;
    bool conjugate;
};
using Monomial = std::vector<EntryFactor>;

/// U_ij (U^dagger)_kl as a monomial in entries of U.
inline Monomial moment2_monomial(int i, int j, int k, int l) { return {{i, j, false}, {l, k, true}}; }

/// U_ij U_kl (U^dagger)_xy (U^dagger)_zw as a monomial in entries of U.
inline Monomial moment4_monomial(int i, int j, int k, int l, int x, int y, int z, int w) {
    return {{i, j, false}, {k, l, false}, {y, x, true}, {w, z, true}};
}

inline Complex evaluate_monomial(const CMatrix& u, const Monomial& m) {
    Complex acc(1.0);
    for (const auto& f : m) {
        const Complex e = u(f.row - 1, f.col - 1);
        acc *= f.conjugate ? std::conj(e) : e;
    }
    return acc;
}

/// Monte-Carlo estimates of several monomials from the same Haar samples.
/// Sample t is drawn from stream.child(t); sums run in ascending t.
inline std::vector<MomentEstimate> moment_mc(std::size_t dim, std::span<const Monomial> monomials, std::size_t n_samples,
                                             const RngStream& stream, const Tolerances& tol = {}) {
    if (n_samples < 2) throw Error(ErrorCode::invalid_argument, "moment_mc needs at least 2 samples");
    for (const auto& m : monomials)
        for (const auto& f : m)
            if (f.row < 1 || f.col < 1 || f.row > int(dim) || f.col > int(dim))
                throw Error(ErrorCode::invalid_argument, "monomial index out of range");
    const std::size_t np = monomials.size();
    std::vector<Complex> sum(np, 0.0);
    std::vector<double> sq(np, 0.0);
    for (std::size_t t = 0; t < n_samples; ++t) {
        const UnitaryMatrix u = haar_sample(dim, stream.child(t), tol);
        for (std::size_t p = 0; p < np; ++p) {
            const Complex v = evaluate_monomial(u.entries, monomials[p]);
            sum[p] += v;
            sq[p] += std::norm(v);
        }
    }
    std::vector<MomentEstimate> out(np);
    const double n = double(n_samples);
    for (std::size_t p = 0; p < np; ++p) {
        const Complex mean = sum[p] / n;
        const double var = std::max(sq[p] / n - std::norm(mean), 0.0);
        out[p] = {mean, std::sqrt(var / n), n_samples};
    }
    return out;
}

inline MomentEstimate moment_mc(std::size_t dim, const Monomial& monomial, std::size_t n_samples, const RngStream& stream,
                                const Tolerances& tol = {}) {
    return moment_mc(dim, std::span<const Monomial>(&monomial, 1), n_samples, stream, tol).front();
}

}  // namespace qic
