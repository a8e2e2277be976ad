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
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qic/config.hpp"
#include "qic/encoding.hpp"

namespace qic {

struct TangentFrame {
    CVector base;                 // |Psi(theta)>
    std::vector<CVector> derivs;  // |d_j Psi>, not normalised
    std::vector<double> theta;

    std::size_t size() const noexcept { return derivs.size(); }

    void validate(const Tolerances& tol = {}) const {
        for (const auto& v : derivs) {
            if (v.size() != base.size()) throw Error(ErrorCode::dimension_mismatch, "derivative length != state length");
            if (std::abs(base.dot(v).real()) > tol.frame_imaginary)
                throw Error(ErrorCode::invalid_argument, "<Psi|d_j Psi> is not purely imaginary");
        }
    }
};

enum class MetricConvention {
    reduced,   // SLD without the factor 2: g = Re<dj|dk> + <Psi|dj><Psi|dk>
    standard,  // 4 x reduced
};

inline const char* to_string(MetricConvention c) { return c == MetricConvention::reduced ? "reduced" : "standard"; }

struct FisherMetric {
    RMatrix g;  // reduced normalisation
    std::vector<double> theta;

    RMatrix in(MetricConvention c) const { return c == MetricConvention::reduced ? g : RMatrix(4.0 * g); }
    double min_eigenvalue() const {
        if (g.size() == 0) return 0.0;
        Eigen::SelfAdjointEigenSolver<RMatrix> es(g, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }
};

inline TangentFrame derivative_states(const Encoder& enc, std::span<const double> theta) {
    TangentFrame f{enc.encode_amplitudes(theta), enc.derivative_amplitudes(theta), {theta.begin(), theta.end()}};
    f.validate(enc.tolerances());
    return f;
}

inline TangentFrame derivative_states(const Encoder& enc, const std::vector<double>& theta) {
    return derivative_states(enc, std::span<const double>(theta));
}

/// Closed form of the pure-state metric built from L_j = |dj><Psi| + |Psi><dj|:
/// g_jk = Re<dj|dk> + <Psi|dj><Psi|dk>.
inline FisherMetric qfi_metric(const TangentFrame& frame) {
    const std::size_t n = frame.size();
    RMatrix g{Eigen::Index(n), Eigen::Index(n)};
    std::vector<Complex> a(n);
    for (std::size_t j = 0; j < n; ++j) a[j] = frame.base.dot(frame.derivs[j]);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = j; k < n; ++k) {
            const double v = frame.derivs[j].dot(frame.derivs[k]).real() + (a[j] * a[k]).real();
            g(Eigen::Index(j), Eigen::Index(k)) = v;
            g(Eigen::Index(k), Eigen::Index(j)) = v;
        }
    return {g, frame.theta};
}

/// L_j = |d_j Psi><Psi| + |Psi><d_j Psi| kept as its two rank-one terms.
struct SymmetricLogDerivative {
    CVector deriv;
    CVector state;

    CVector apply(const CVector& x) const { return deriv * state.dot(x) + state * deriv.dot(x); }
};

/// <Psi| (L_j L_k + L_k L_j) / 2 |Psi> evaluated by applying the operators.
inline FisherMetric qfi_metric_direct(const TangentFrame& frame) {
    const std::size_t n = frame.size();
    std::vector<SymmetricLogDerivative> ops;
    ops.reserve(n);
    for (const auto& d : frame.derivs) ops.push_back({d, frame.base});
    std::vector<CVector> l_psi;
    l_psi.reserve(n);
    for (const auto& op : ops) l_psi.push_back(op.apply(frame.base));
    RMatrix g{Eigen::Index(n), Eigen::Index(n)};
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
            const Complex jk = frame.base.dot(ops[j].apply(l_psi[k]));
            const Complex kj = frame.base.dot(ops[k].apply(l_psi[j]));
            g(Eigen::Index(j), Eigen::Index(k)) = (0.5 * (jk + kj)).real();
        }
    return {g, frame.theta};
}

struct ReparameterizationCheck {
    double residual;           // max |R g R^T - g'| between the two routes
    RMatrix original;          // g at theta
    RMatrix transformed;       // g' from derivative states of theta' -> Psi(R^T theta')
    double anisotropic_part;   // max |g - mean(diag g) I|
};

/// Metric of the reparameterised family theta' = R theta, computed (a) by
/// R g R^T from the closed form and (b) from the derivative states of the
/// composed map through the operator route.
inline ReparameterizationCheck reparameterize_check(const Encoder& enc, std::span<const double> theta, const RMatrix& r,
                                                    const Tolerances& tol = {}) {
    const std::size_t n = enc.num_parameters();
    if (std::size_t(r.rows()) != n || std::size_t(r.cols()) != n)
        throw Error(ErrorCode::dimension_mismatch, "R must be n x n");
    if ((r.transpose() * r - RMatrix::Identity(r.rows(), r.rows())).cwiseAbs().maxCoeff() > tol.orthogonality)
        throw Error(ErrorCode::invalid_argument, "R is not orthogonal");
    const TangentFrame frame = derivative_states(enc, theta);
    const FisherMetric g = qfi_metric(frame);

    // d/dtheta'_k Psi(R^T theta') = sum_j R_kj d_j Psi.
    TangentFrame composed{frame.base, {}, {}};
    const Eigen::Map<const RVector> th(theta.data(), Eigen::Index(theta.size()));
    const RVector th_prime = r * th;
    composed.theta.assign(th_prime.data(), th_prime.data() + th_prime.size());
    for (std::size_t k = 0; k < n; ++k) {
        CVector v = CVector::Zero(frame.base.size());
        for (std::size_t j = 0; j < n; ++j) v += r(Eigen::Index(k), Eigen::Index(j)) * frame.derivs[j];
        composed.derivs.push_back(std::move(v));
    }
    const FisherMetric gp = qfi_metric_direct(composed);
    const RMatrix chain = r * g.g * r.transpose();
    const double mean_diag = g.g.diagonal().mean();
    const RMatrix aniso = g.g - mean_diag * RMatrix::Identity(g.g.rows(), g.g.cols());
    return {(chain - gp.g).cwiseAbs().maxCoeff(), g.g, gp.g, aniso.cwiseAbs().maxCoeff()};
}

struct IsometryReport {
    std::vector<FisherMetric> samples;
    double f_estimate = 0.0;  // mean diagonal over the grid
    double anisotropy = 0.0;  // max |g_jk, j != k| / F
    double theta_drift = 0.0; // max |g_jj - F| / F
    double scale = 0.0;       // d^{-(N-3)/2}
};

/// Product grid with `per_axis` points theta = lo + k (hi - lo) / per_axis on each axis.
inline std::vector<std::vector<double>> product_grid(std::size_t n, std::size_t per_axis, double lo, double hi) {
    std::size_t total = 1;
    for (std::size_t j = 0; j < n; ++j) total *= per_axis;
    std::vector<std::vector<double>> out(total, std::vector<double>(n));
    for (std::size_t g = 0; g < total; ++g) {
        std::size_t rem = g;
        for (std::size_t j = n; j-- > 0;) {
            out[g][j] = lo + (hi - lo) * double(rem % per_axis) / double(per_axis);
            rem /= per_axis;
        }
    }
    return out;
}

inline IsometryReport summarize_isometry(std::vector<FisherMetric> samples, double scale) {
    if (samples.empty()) throw Error(ErrorCode::invalid_argument, "isometry grid is empty");
    IsometryReport rep;
    rep.scale = scale;
    double diag_sum = 0.0;
    std::size_t diag_count = 0;
    for (const auto& s : samples) {
        diag_sum += s.g.diagonal().sum();
        diag_count += std::size_t(s.g.rows());
    }
    rep.f_estimate = diag_sum / double(diag_count);
    const double f = rep.f_estimate;
    for (const auto& s : samples)
        for (Eigen::Index j = 0; j < s.g.rows(); ++j)
            for (Eigen::Index k = 0; k < s.g.cols(); ++k) {
                if (j == k) rep.theta_drift = std::max(rep.theta_drift, std::abs(s.g(j, j) - f) / f);
                else rep.anisotropy = std::max(rep.anisotropy, std::abs(s.g(j, k)) / f);
            }
    rep.samples = std::move(samples);
    return rep;
}

inline IsometryReport isometry_report(const Encoder& enc, const std::vector<std::vector<double>>& grid) {
    if (grid.empty()) throw Error(ErrorCode::invalid_argument, "isometry grid is empty");
    std::vector<FisherMetric> samples;
    samples.reserve(grid.size());
    for (const auto& th : grid) samples.push_back(qfi_metric(derivative_states(enc, th)));
    return summarize_isometry(std::move(samples), decoupling_scale(enc.spec().d, enc.spec().num_qudits));
}

}  // namespace qic
