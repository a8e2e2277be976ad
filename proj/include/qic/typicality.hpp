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
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qic/config.hpp"
#include "qic/rng.hpp"
#include "qic/state.hpp"
#include "qic/stats.hpp"

namespace qic {

/// Non-interacting H = sum_p H_p with each H_p diagonal in the computational basis.
struct HamiltonianSpec {
    int d = 2;
    int num_qudits = 1;
    std::vector<std::vector<double>> site_spectra;
    std::vector<double> total;  // energy of each of the d^N basis states

    std::size_t dim() const noexcept { return total.size(); }
};

inline HamiltonianSpec build_hamiltonian(const std::vector<std::vector<double>>& site_spectra, const Tolerances& tol = {}) {
    if (site_spectra.empty()) throw Error(ErrorCode::invalid_argument, "need at least one site");
    const std::size_t d = site_spectra.front().size();
    if (d < 2) throw Error(ErrorCode::invalid_argument, "site spectra need d >= 2 levels");
    for (const auto& s : site_spectra)
        if (s.size() != d) throw Error(ErrorCode::dimension_mismatch, "every site spectrum must have length d");
    const std::size_t dim = checked_power(d, site_spectra.size(), tol.max_state_dim);
    if (dim == 0) throw Error(ErrorCode::cap_exceeded, "d^N exceeds the state-dimension cap");
    HamiltonianSpec h;
    h.d = int(d);
    h.num_qudits = int(site_spectra.size());
    h.site_spectra = site_spectra;
    h.total.assign(1, 0.0);
    for (const auto& site : site_spectra) {
        std::vector<double> next;
        next.reserve(h.total.size() * d);
        for (double e : h.total)
            for (double w : site) next.push_back(e + w);
        h.total = std::move(next);
    }
    return h;
}

/// Hamiltonian of sites [first, last] (1-based, inclusive) of `h`.
inline HamiltonianSpec sub_hamiltonian(const HamiltonianSpec& h, int first, int last, const Tolerances& tol = {}) {
    if (first < 1 || last > h.num_qudits || first > last) throw Error(ErrorCode::invalid_argument, "bad site range");
    return build_hamiltonian({h.site_spectra.begin() + (first - 1), h.site_spectra.begin() + last}, tol);
}

inline double snap_energy(double e, double grid) { return std::round(e / grid) * grid; }

struct MESShell {
    double e_tot = 0.0;
    double delta_e = 0.0;
    std::vector<std::size_t> members;  // sorted basis indices

    std::size_t dim() const noexcept { return members.size(); }

    /// D x d_E isometry onto the shell.
    CMatrix isometry(std::size_t full_dim) const {
        CMatrix b = CMatrix::Zero(Eigen::Index(full_dim), Eigen::Index(members.size()));
        for (std::size_t i = 0; i < members.size(); ++i) b(Eigen::Index(members[i]), Eigen::Index(i)) = 1.0;
        return b;
    }
};

/// Basis states with energy in the closed window [E_tot - dE, E_tot], compared
/// after snapping to the shared energy grid.
inline MESShell mes_shell(const HamiltonianSpec& h, double e_tot, double delta_e, const Tolerances& tol = {}) {
    if (delta_e < 0.0) throw Error(ErrorCode::invalid_argument, "shell width must be >= 0");
    MESShell shell{e_tot, delta_e, {}};
    const double lo = snap_energy(e_tot - delta_e, tol.energy_grid);
    const double hi = snap_energy(e_tot, tol.energy_grid);
    for (std::size_t i = 0; i < h.total.size(); ++i) {
        const double e = snap_energy(h.total[i], tol.energy_grid);
        if (e >= lo && e <= hi) shell.members.push_back(i);
    }
    if (shell.members.empty())
        throw Error(ErrorCode::empty_shell, "no energy eigenstates in [" + std::to_string(e_tot - delta_e) + ", " +
                                                std::to_string(e_tot) + "]");
    return shell;
}

/// Haar-uniform unit vector supported on the shell.
inline PureState mes_sample(const HamiltonianSpec& h, const MESShell& shell, const RngStream& stream,
                            const Tolerances& tol = {}) {
    if (shell.members.empty()) throw Error(ErrorCode::empty_shell, "cannot sample an empty shell");
    ComplexGaussian g(stream);
    CVector amp = CVector::Zero(Eigen::Index(h.dim()));
    for (std::size_t i : shell.members) amp[Eigen::Index(i)] = g();
    amp /= amp.norm();
    return PureState(h.d, h.num_qudits, std::move(amp), tol);
}

struct EnergyLevel {
    double energy;
    std::size_t degeneracy;
};

inline std::vector<EnergyLevel> energy_levels(const HamiltonianSpec& h, const Tolerances& tol = {}) {
    std::map<double, std::size_t> counts;
    for (double e : h.total) ++counts[snap_energy(e, tol.energy_grid)];
    std::vector<EnergyLevel> out;
    for (const auto& [e, g] : counts) out.push_back({e, g});
    return out;
}

struct BetaOptions {
    double width = 0.0;  // Gaussian smoothing width; <= 0 selects 2 x mean level spacing
    double step = 0.0;   // central-difference step; <= 0 selects the mean distinct-level spacing
};

/// ln of the Gaussian-smoothed density of states, sum_l g_l exp(-(E - E_l)^2 / 2w^2).
inline double log_smoothed_dos(const std::vector<EnergyLevel>& levels, double e, double width) {
    double top = -std::numeric_limits<double>::infinity();
    std::vector<double> expo;
    expo.reserve(levels.size());
    for (const auto& l : levels) {
        const double x = std::log(double(l.degeneracy)) - (e - l.energy) * (e - l.energy) / (2.0 * width * width);
        expo.push_back(x);
        top = std::max(top, x);
    }
    double s = 0.0;
    for (double x : expo) s += std::exp(x - top);
    return top + std::log(s);
}

/// beta = d/dE ln Omega(E) for the spectrum of `h`, as a central difference
/// of the smoothed log density of states.
inline double estimate_beta(const HamiltonianSpec& h, double e, BetaOptions opts = {}, const Tolerances& tol = {}) {
    const auto levels = energy_levels(h, tol);
    const double emin = levels.front().energy;
    const double emax = levels.back().energy;
    if (levels.size() == 1) return 0.0;  // fully degenerate: flat Omega
    if (opts.width <= 0.0) opts.width = 2.0 * (emax - emin) / double(h.dim() - 1);
    if (opts.step <= 0.0) opts.step = (emax - emin) / double(levels.size() - 1);
    const double lo = e - 0.5 * opts.step;
    const double hi = e + 0.5 * opts.step;
    const double margin = 3.0 * opts.width;
    if (lo < emin - margin || hi > emax + margin)
        throw Error(ErrorCode::unstable_estimate, "E = " + std::to_string(e) + " lies outside the spectrum [" +
                                                      std::to_string(emin) + ", " + std::to_string(emax) + "]");
    // The stencil needs real levels on both sides, not just Gaussian tails.
    const double reach = std::max(opts.step, margin);
    std::size_t near = 0;
    for (const auto& l : levels)
        if (l.energy >= lo - reach && l.energy <= hi + reach) ++near;
    if (near < 2)
        throw Error(ErrorCode::unstable_estimate, "fewer than two levels within the stencil around E = " + std::to_string(e));
    return (log_smoothed_dos(levels, hi, opts.width) - log_smoothed_dos(levels, lo, opts.width)) / opts.step;
}

/// Normalised e^{-beta H_A} / Z for the sites described by `site_spectra`.
inline DensityMatrix gibbs_state(const std::vector<std::vector<double>>& site_spectra, double beta, const Tolerances& tol = {}) {
    if (!std::isfinite(beta)) throw Error(ErrorCode::invalid_argument, "beta must be finite");
    const HamiltonianSpec h = build_hamiltonian(site_spectra, tol);
    // Shift by the energy that maximises the weight so no exponent overflows.
    double ref = beta >= 0.0 ? *std::min_element(h.total.begin(), h.total.end())
                             : *std::max_element(h.total.begin(), h.total.end());
    RVector w(Eigen::Index(h.dim()));
    for (std::size_t i = 0; i < h.dim(); ++i) w[Eigen::Index(i)] = std::exp(-beta * (h.total[i] - ref));
    w /= w.sum();
    return {w.cast<Complex>().asDiagonal()};
}

inline double trace_distance(const CMatrix& a, const CMatrix& b) {
    const CMatrix diff = 0.5 * ((a - b) + (a - b).adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(diff, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline double hilbert_schmidt_distance(const CMatrix& a, const CMatrix& b) { return (a - b).norm(); }

struct GibbsComparison {
    int m = 1;
    double beta = 0.0;
    std::size_t shell_dim = 0;
    CMatrix exact_average;               // reduced shell-maximally-mixed state
    CMatrix gibbs;                       // Gibbs(beta) on the first m sites
    CMatrix mean_state;                  // ensemble mean of the sampled reduced states
    RMatrix mean_state_se_re;            // per-entry standard errors
    RMatrix mean_state_se_im;
    std::vector<double> trace_distances;  // per sample, to Gibbs(beta)
    std::vector<double> hs_distances;     // per sample, to Gibbs(beta)
    std::vector<double> hs_fluctuations;  // per sample, Tr[(rho - rho_ave)^2]
    double hs_variance = 0.0;             // mean of hs_fluctuations
    double bound = 0.0;                   // d^{2m} / (d_E + 1)

    double fraction_within(double trace_threshold) const {
        if (trace_distances.empty()) return 0.0;
        std::size_t ok = 0;
        for (double t : trace_distances) ok += t <= trace_threshold ? 1 : 0;
        return double(ok) / double(trace_distances.size());
    }

    /// max over entries of |mean - target| / SE (SE floored at 1e-300).
    double max_sigma_deviation(const CMatrix& target) const {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < target.rows(); ++i)
            for (Eigen::Index j = 0; j < target.cols(); ++j) {
                const Complex dev = mean_state(i, j) - target(i, j);
                const double re = std::abs(dev.real()), im = std::abs(dev.imag());
                const double sre = std::max(mean_state_se_re(i, j), 1e-300), sim = std::max(mean_state_se_im(i, j), 1e-300);
                if (re > 1e-14) worst = std::max(worst, re / sre);
                if (im > 1e-14) worst = std::max(worst, im / sim);
            }
        return worst;
    }
};

/// Reduced state of (1/d_E) sum_{i in shell} |E_i><E_i| on the first m sites.
inline CMatrix shell_average_reduced(const HamiltonianSpec& h, const MESShell& shell, int m) {
    const std::size_t rest = detail::ipow(std::size_t(h.d), std::size_t(h.num_qudits - m));
    const std::size_t da = detail::ipow(std::size_t(h.d), std::size_t(m));
    CMatrix rho = CMatrix::Zero(Eigen::Index(da), Eigen::Index(da));
    for (std::size_t i : shell.members) rho(Eigen::Index(i / rest), Eigen::Index(i / rest)) += 1.0 / double(shell.dim());
    return rho;
}

/// Compares reduced states of shell-random pure states on the first m sites
/// with the shell average and with Gibbs(beta_hat). beta_hat is the secant
/// slope of ln Omega of the complement across the energy span of the subsystem.
inline GibbsComparison typicality_report(const HamiltonianSpec& h, const MESShell& shell, int m, std::size_t n_samples,
                                         const RngStream& stream, unsigned threads = 1, BetaOptions beta_opts = {},
                                         const Tolerances& tol = {}) {
    if (shell.members.empty()) throw Error(ErrorCode::empty_shell, "empty shell");
    if (m < 1 || 2 * m > h.num_qudits) throw Error(ErrorCode::invalid_argument, "subsystem size must satisfy 1 <= m <= N/2");
    if (n_samples < 10) throw Error(ErrorCode::invalid_argument, "typicality_report needs at least 10 samples");

    GibbsComparison out;
    out.m = m;
    out.shell_dim = shell.dim();
    const std::vector<std::vector<double>> sub_spectra(h.site_spectra.begin(), h.site_spectra.begin() + m);
    const HamiltonianSpec ha = build_hamiltonian(sub_spectra, tol);
    const double ea_min = *std::min_element(ha.total.begin(), ha.total.end());
    const double ea_max = *std::max_element(ha.total.begin(), ha.total.end());
    if (ea_max - ea_min <= tol.energy_grid) {
        out.beta = 0.0;
    } else {
        const HamiltonianSpec hc = sub_hamiltonian(h, m + 1, h.num_qudits, tol);
        const double e_mid = shell.e_tot - 0.5 * shell.delta_e;
        if (beta_opts.step <= 0.0) beta_opts.step = ea_max - ea_min;
        out.beta = estimate_beta(hc, e_mid - 0.5 * (ea_min + ea_max), beta_opts, tol);
    }
    out.gibbs = gibbs_state(sub_spectra, out.beta, tol).rho;
    out.exact_average = shell_average_reduced(h, shell, m);
    const double da = double(ha.dim());
    out.bound = da * da / (double(shell.dim()) + 1.0);

    std::set<int> keep;
    for (int p = 1; p <= m; ++p) keep.insert(p);
    auto states = parallel_map(n_samples, threads, [&](std::size_t t) {
        return reduced_density(mes_sample(h, shell, stream.child(t), tol), keep, tol).rho;
    });

    const Eigen::Index k = Eigen::Index(ha.dim());
    out.mean_state = CMatrix::Zero(k, k);
    for (const auto& r : states) out.mean_state += r;
    out.mean_state /= double(n_samples);
    out.mean_state_se_re = RMatrix::Zero(k, k);
    out.mean_state_se_im = RMatrix::Zero(k, k);
    for (const auto& r : states) {
        const CMatrix dev = r - out.mean_state;
        out.mean_state_se_re += dev.real().cwiseAbs2();
        out.mean_state_se_im += dev.imag().cwiseAbs2();
    }
    const double n = double(n_samples);
    out.mean_state_se_re = (out.mean_state_se_re / n).cwiseSqrt() / std::sqrt(n);
    out.mean_state_se_im = (out.mean_state_se_im / n).cwiseSqrt() / std::sqrt(n);

    double fluct_sum = 0.0;
    for (const auto& r : states) {
        out.trace_distances.push_back(trace_distance(r, out.gibbs));
        out.hs_distances.push_back(hilbert_schmidt_distance(r, out.gibbs));
        const double f = (r - out.exact_average).squaredNorm();
        out.hs_fluctuations.push_back(f);
        fluct_sum += f;
    }
    out.hs_variance = fluct_sum / n;
    return out;
}

}  // namespace qic
