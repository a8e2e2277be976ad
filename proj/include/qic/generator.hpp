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
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qic/config.hpp"
#include "qic/state.hpp"

namespace qic {

/// Traceless Hermitian write generator sigma = sum_s w_s |s><s|.
class Generator {
public:
    /// From a Hermitian traceless matrix; eigenpairs are sorted by descending eigenvalue.
    static Generator from_matrix(const CMatrix& sigma, const Tolerances& tol = {}) {
        if (sigma.rows() != sigma.cols() || sigma.rows() < 2)
            throw Error(ErrorCode::dimension_mismatch, "generator must be a square matrix with d >= 2");
        if ((sigma - sigma.adjoint()).cwiseAbs().maxCoeff() > tol.hermiticity)
            throw Error(ErrorCode::not_hermitian, "generator is not Hermitian");
        if (std::abs(sigma.trace()) > tol.trace) throw Error(ErrorCode::invalid_argument, "generator is not traceless");
        const CMatrix herm = 0.5 * (sigma + sigma.adjoint());
        Eigen::SelfAdjointEigenSolver<CMatrix> es(herm);
        const Eigen::Index d = herm.rows();
        Generator g;
        g.sigma_ = herm;
        g.w_.resize(d);
        g.vecs_.resize(d, d);
        for (Eigen::Index s = 0; s < d; ++s) {
            g.w_[s] = es.eigenvalues()[d - 1 - s];
            g.vecs_.col(s) = es.eigenvectors().col(d - 1 - s);
        }
        return g;
    }

    /// From a spectrum and eigenbasis (columns). The spectrum is re-sorted descending.
    static Generator from_spectrum(const RVector& w, const CMatrix& basis, const Tolerances& tol = {}) {
        const Eigen::Index d = w.size();
        if (basis.rows() != d || basis.cols() != d) throw Error(ErrorCode::dimension_mismatch, "eigenbasis must be d x d");
        if (detail::unitarity_defect(basis) > tol.local_unitarity)
            throw Error(ErrorCode::not_unitary, "eigenbasis is not orthonormal");
        if (std::abs(w.sum()) > tol.trace) throw Error(ErrorCode::invalid_argument, "generator is not traceless");
        std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return w[a] > w[b]; });
        Generator g;
        g.w_.resize(d);
        g.vecs_.resize(d, d);
        for (Eigen::Index s = 0; s < d; ++s) {
            g.w_[s] = w[order[std::size_t(s)]];
            g.vecs_.col(s) = basis.col(order[std::size_t(s)]);
        }
        g.sigma_ = g.vecs_ * g.w_.cast<Complex>().asDiagonal() * g.vecs_.adjoint();
        return g;
    }

    /// u sigma u^dagger: same spectrum, rotated eigenvectors.
    Generator rotated(const CMatrix& u, const Tolerances& tol = {}) const {
        if (detail::unitarity_defect(u) > tol.local_unitarity) throw Error(ErrorCode::not_unitary, "rotation is not unitary");
        return from_spectrum(w_, u * vecs_, tol);
    }

    int dim() const noexcept { return int(w_.size()); }
    const CMatrix& matrix() const noexcept { return sigma_; }
    const RVector& eigenvalues() const noexcept { return w_; }
    const CMatrix& eigenvectors() const noexcept { return vecs_; }
    CMatrix projector(Eigen::Index s) const { return vecs_.col(s) * vecs_.col(s).adjoint(); }

    bool nondegenerate(double gap) const {
        for (Eigen::Index s = 0; s + 1 < w_.size(); ++s)
            if (w_[s] - w_[s + 1] <= gap) return false;
        return true;
    }

    double max_abs_eigenvalue() const { return w_.cwiseAbs().maxCoeff(); }

    /// Variance of the eigenvalues under the uniform distribution on s.
    double uniform_variance() const {
        const double mean = w_.mean();
        return (w_.array() - mean).square().mean();
    }

private:
    Generator() = default;
    CMatrix sigma_;
    RVector w_;
    CMatrix vecs_;
};

struct GeneratorPreset {
    std::string name;
    std::string spectrum;
    std::string basis;
};

inline std::vector<GeneratorPreset> generator_presets() {
    return {
        {"pauli-z-like", "d=2, w=+1,-1", "computational basis"},
        {"pauli-x-like", "d=2, w=+1,-1", "(|0> +- |1>)/sqrt2"},
        {"spin-z", "any d, w=(d-1)/2,...,-(d-1)/2", "computational basis"},
        {"quadratic", "any d, w_s = s^2 - mean (uneven spacing)", "computational basis"},
    };
}

inline Generator make_generator(const std::string& preset, int d, const Tolerances& tol = {}) {
    if (d < 2) throw Error(ErrorCode::invalid_argument, "generator dimension must be >= 2");
    const CMatrix id = CMatrix::Identity(d, d);
    if (preset == "pauli-z-like" || preset == "pauli-x-like") {
        if (d != 2) throw Error(ErrorCode::invalid_argument, preset + " requires d = 2");
        RVector w(2);
        w << 1.0, -1.0;
        if (preset == "pauli-z-like") return Generator::from_spectrum(w, id, tol);
        CMatrix h(2, 2);
        h << M_SQRT1_2, M_SQRT1_2, M_SQRT1_2, -M_SQRT1_2;
        return Generator::from_spectrum(w, h, tol);
    }
    if (preset == "spin-z") {
        RVector w(d);
        for (int s = 0; s < d; ++s) w[s] = 0.5 * (d - 1) - s;
        return Generator::from_spectrum(w, id, tol);
    }
    if (preset == "quadratic") {
        RVector w(d);
        for (int s = 0; s < d; ++s) w[s] = double(s) * double(s);
        w.array() -= w.mean();
        return Generator::from_spectrum(w, id, tol);
    }
    throw Error(ErrorCode::invalid_argument, "unknown generator preset '" + preset + "'");
}

/// exp(i theta sigma) = sum_s e^{i w_s theta} |s><s| as a d x d matrix.
inline CMatrix write_matrix(const Generator& gen, double theta) {
    CVector phases(gen.dim());
    for (int s = 0; s < gen.dim(); ++s) phases[s] = std::polar(1.0, gen.eigenvalues()[s] * theta);
    return gen.eigenvectors() * phases.asDiagonal() * gen.eigenvectors().adjoint();
}

/// Local write operator placed at `port` of an N-qudit register.
struct WriteOperator {
    CMatrix local;
    int port;
    int num_qudits;

    PureState apply(const PureState& s, const Tolerances& tol = {}) const { return apply_local(s, local, port, tol); }
};

inline WriteOperator write_operator(const Generator& gen, double theta, int port, int num_qudits) {
    detail::require_port(port, num_qudits);
    return {write_matrix(gen, theta), port, num_qudits};
}

/// Ideal single-qudit capsule (1/sqrt d) sum_s e^{i w_s theta} |s>.
inline PureState qic_reference(const Generator& gen, double theta, const Tolerances& tol = {}) {
    const int d = gen.dim();
    CVector amp = CVector::Zero(d);
    for (int s = 0; s < d; ++s) amp += std::polar(1.0 / std::sqrt(double(d)), gen.eigenvalues()[s] * theta) * gen.eigenvectors().col(s);
    return PureState(d, 1, std::move(amp), tol);
}

/// |(1/d) sum_s e^{i w_s delta}|, the capsule overlap modulus for a shift delta.
inline double capsule_overlap(const Generator& gen, double delta) {
    Complex acc(0.0);
    for (int s = 0; s < gen.dim(); ++s) acc += std::polar(1.0, gen.eigenvalues()[s] * delta);
    return std::abs(acc) / gen.dim();
}

}  // namespace qic
