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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "qic/typicality.hpp"

using namespace qic;

namespace {

std::vector<std::vector<double>> uniform_sites(int n, std::vector<double> spectrum) {
    return std::vector<std::vector<double>>(std::size_t(n), spectrum);
}

double log_binomial(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

}  // namespace

TEST(Hamiltonian, examples) {
    const HamiltonianSpec zero = build_hamiltonian(uniform_sites(4, {0.0, 0.0}));
    EXPECT_EQ(zero.dim(), 16u);
    for (double e : zero.total) EXPECT_EQ(e, 0.0);
    const HamiltonianSpec h = build_hamiltonian(uniform_sites(3, {0.0, 1.0}));
    EXPECT_EQ(h.total, (std::vector<double>{0, 1, 1, 2, 1, 2, 2, 3}));
    std::vector<double> sorted = h.total;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (std::vector<double>{0, 1, 1, 1, 2, 2, 2, 3}));
    EXPECT_EQ(build_hamiltonian({{-1.0, 0.0, 1.0}}).total, (std::vector<double>{-1, 0, 1}));
    EXPECT_THROW(build_hamiltonian(uniform_sites(17, {0.0, 1.0})), Error);
    EXPECT_THROW(build_hamiltonian({{0.0, 1.0}, {0.0}}), Error);
}

TEST(Hamiltonian, additivity) {
    const HamiltonianSpec h = build_hamiltonian({{0.0, 0.3}, {-1.0, 2.0}, {0.5, 0.25}});
    const HamiltonianSpec a = sub_hamiltonian(h, 1, 1), b = sub_hamiltonian(h, 2, 3);
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < b.dim(); ++j) EXPECT_DOUBLE_EQ(h.total[i * b.dim() + j], a.total[i] + b.total[j]);
}

TEST(Shell, membership) {
    const HamiltonianSpec zero = build_hamiltonian(uniform_sites(3, {0.0, 0.0}));
    EXPECT_EQ(mes_shell(zero, 0.5, 1.0).dim(), 8u);
    const HamiltonianSpec h = build_hamiltonian(uniform_sites(3, {0.0, 1.0}));
    const MESShell s = mes_shell(h, 1.0, 0.0);
    EXPECT_EQ(s.members, (std::vector<std::size_t>{1, 2, 4}));
    EXPECT_EQ(mes_shell(h, 2.0, 1.0).dim(), 6u);
    try {
        mes_shell(h, -0.5, 0.2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::empty_shell);
    }
    const CMatrix b = s.isometry(8);
    EXPECT_LE((b.adjoint() * b - CMatrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 0.0);
    // Energies off by rounding noise still land on the grid.
    const HamiltonianSpec noisy = build_hamiltonian({{0.0, 0.1}, {0.0, 0.2}});
    EXPECT_EQ(mes_shell(noisy, 0.3, 0.0).dim(), 1u);
}

TEST(Shell, sampling) {
    const HamiltonianSpec h = build_hamiltonian(uniform_sites(4, {0.0, 1.0}));
    const MESShell s = mes_shell(h, 2.0, 0.0);
    ASSERT_EQ(s.dim(), 6u);
    std::vector<std::vector<double>> weights(s.dim());
    for (std::uint64_t t = 0; t < 10000; ++t) {
        const PureState psi = mes_sample(h, s, RngStream(3, {t}));
        for (std::size_t i = 0; i < 16; ++i)
            if (!std::binary_search(s.members.begin(), s.members.end(), i)) ASSERT_EQ(psi[Eigen::Index(i)], Complex(0.0));
        for (std::size_t k = 0; k < s.dim(); ++k) weights[k].push_back(std::norm(psi[Eigen::Index(s.members[k])]));
    }
    for (const auto& w : weights) {
        const MeanSe m = mean_se(w);
        EXPECT_LE(std::abs(m.mean - 1.0 / 6.0), 5 * m.std_error);
    }
    const MESShell single = mes_shell(h, 0.0, 0.0);
    const PureState one = mes_sample(h, single, RngStream(1));
    EXPECT_NEAR(std::abs(one[0]), 1.0, 1e-15);
}

TEST(Beta, symmetric_and_flat_cases) {
    EXPECT_EQ(estimate_beta(build_hamiltonian(uniform_sites(6, {0.0, 0.0})), 0.0), 0.0);
    const HamiltonianSpec h = build_hamiltonian(uniform_sites(8, {0.0, 0.7}));
    EXPECT_NEAR(estimate_beta(h, 4 * 0.7), 0.0, 1e-12);
}

TEST(Beta, follows_binomial_counts) {
    // Oracle: the exact secant ln C(7, k+1) - ln C(7, k) of the binomial level counts.
    const HamiltonianSpec h = build_hamiltonian(uniform_sites(7, {0.0, 1.0}));
    for (int k = 0; k < 6; ++k) {
        const double exact = log_binomial(7, k + 1) - log_binomial(7, k);
        BetaOptions opts;
        opts.step = 1.0;
        EXPECT_NEAR(estimate_beta(h, k + 0.5, opts), exact, 1e-9) << k;
    }
    EXPECT_GT(estimate_beta(h, 1.0), 0.0);
    EXPECT_GT(estimate_beta(h, 2.0), 0.0);
    EXPECT_LT(estimate_beta(h, 5.0), 0.0);
    EXPECT_THROW(estimate_beta(h, 30.0), Error);
    BetaOptions narrow;
    narrow.width = 0.01;
    narrow.step = 0.1;
    EXPECT_THROW(estimate_beta(h, 2.5, narrow), Error);
}

TEST(Gibbs, examples) {
    const DensityMatrix mixed = gibbs_state(uniform_sites(2, {0.0, 1.0}), 0.0);
    EXPECT_LE((mixed.rho - 0.25 * CMatrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-15);
    const DensityMatrix cold = gibbs_state({{0.0, 1.0, 2.5}}, 800.0);
    EXPECT_NEAR(cold.rho(0, 0).real(), 1.0, 1e-15);
    EXPECT_NEAR(cold.rho(1, 1).real(), 0.0, 1e-15);
    const DensityMatrix ln2 = gibbs_state({{0.0, 1.0}}, std::log(2.0));
    EXPECT_NEAR(ln2.rho(0, 0).real(), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(ln2.rho(1, 1).real(), 1.0 / 3.0, 1e-15);
    const DensityMatrix hot = gibbs_state({{0.0, 1.0, 2.5}}, -800.0);
    EXPECT_NEAR(hot.rho(2, 2).real(), 1.0, 1e-15);
    EXPECT_THROW(gibbs_state({{0.0, 1.0}}, std::numeric_limits<double>::infinity()), Error);
}

TEST(Distances, basics) {
    CMatrix a = CMatrix::Zero(2, 2), b = CMatrix::Zero(2, 2);
    a(0, 0) = 1.0;
    b(1, 1) = 1.0;
    EXPECT_NEAR(trace_distance(a, b), 1.0, 1e-15);
    EXPECT_NEAR(hilbert_schmidt_distance(a, b), std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(trace_distance(a, a), 0.0, 1e-15);
}

TEST(Typicality, bound_value) {
    // d_s = 2, m = 1, d_E = 16.
    const HamiltonianSpec zero = build_hamiltonian(uniform_sites(4, {0.0, 0.0}));
    const GibbsComparison c = typicality_report(zero, mes_shell(zero, 0.0, 0.0), 1, 10, RngStream(1));
    EXPECT_NEAR(c.bound, 4.0 / 17.0, 1e-15);
}

TEST(Typicality, zero_hamiltonian) {
    const HamiltonianSpec zero = build_hamiltonian(uniform_sites(8, {0.0, 0.0}));
    const MESShell full = mes_shell(zero, 0.0, 0.0);
    ASSERT_EQ(full.dim(), 256u);
    const GibbsComparison c = typicality_report(zero, full, 1, 100, RngStream(2));
    EXPECT_EQ(c.beta, 0.0);
    EXPECT_EQ(c.gibbs, 0.5 * CMatrix::Identity(2, 2));
    EXPECT_EQ(c.exact_average, c.gibbs);
    EXPECT_LE(c.max_sigma_deviation(0.5 * CMatrix::Identity(2, 2)), 5.0);
    EXPECT_LE(c.hs_variance, 4.0 / 257.0 * (1 + 5.0 / std::sqrt(100.0)));
    for (double t : c.trace_distances) {
        EXPECT_GE(t, 0.0);
        EXPECT_LE(t, 1.0);
    }
}

TEST(Typicality, quarter_filling_matches_gibbs) {
    const HamiltonianSpec h = build_hamiltonian(uniform_sites(8, {0.0, 1.0}));
    const MESShell shell = mes_shell(h, 2.0, 0.0);
    ASSERT_EQ(shell.dim(), 28u);
    const GibbsComparison c = typicality_report(h, shell, 1, 200, RngStream(4), 2);
    // The complement has C(7,2) = 21 and C(7,1) = 7 states at the two
    // relevant energies, so the exact reduced state is diag(3/4, 1/4).
    EXPECT_NEAR(c.beta, std::log(3.0), 1e-9);
    EXPECT_NEAR(c.exact_average(0, 0).real(), 0.75, 1e-15);
    EXPECT_LE((c.exact_average - c.gibbs).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GE(c.fraction_within(0.15), 0.9);
    EXPECT_LE(c.max_sigma_deviation(c.exact_average), 5.0);
    EXPECT_LE(c.hs_variance, c.bound * (1 + 5.0 / std::sqrt(200.0)));
}

TEST(Typicality, variance_bound_holds_across_configurations) {
    struct Case {
        int n;
        std::vector<double> spectrum;
        double e_tot, delta_e;
        int m;
    };
    const std::vector<Case> cases = {
        {6, {0.0, 1.0}, 3.0, 0.0, 1}, {6, {0.0, 1.0}, 3.0, 1.0, 2}, {4, {0.0, 0.5, 1.3}, 2.0, 0.6, 1}, {8, {0.0, 1.0}, 1.0, 0.0, 1},
    };
    std::uint64_t seed = 0;
    for (const auto& cs : cases) {
        const HamiltonianSpec h = build_hamiltonian(uniform_sites(cs.n, cs.spectrum));
        const MESShell shell = mes_shell(h, cs.e_tot, cs.delta_e);
        const GibbsComparison c = typicality_report(h, shell, cs.m, 400, RngStream(50, {seed++}));
        EXPECT_LE(c.hs_variance, c.bound * (1 + 5.0 / std::sqrt(400.0))) << "N=" << cs.n << " dE=" << shell.dim();
        EXPECT_LE(c.max_sigma_deviation(c.exact_average), 5.0);
    }
}

TEST(Typicality, rejects_bad_arguments) {
    const HamiltonianSpec h = build_hamiltonian(uniform_sites(4, {0.0, 1.0}));
    const MESShell s = mes_shell(h, 2.0, 0.0);
    EXPECT_THROW(typicality_report(h, s, 3, 100, RngStream(1)), Error);
    EXPECT_THROW(typicality_report(h, s, 1, 5, RngStream(1)), Error);
    EXPECT_THROW(typicality_report(h, MESShell{}, 1, 100, RngStream(1)), Error);
}

TEST(Typicality, thread_count_does_not_change_results) {
    const HamiltonianSpec h = build_hamiltonian(uniform_sites(6, {0.0, 1.0}));
    const MESShell s = mes_shell(h, 2.0, 0.0);
    const GibbsComparison a = typicality_report(h, s, 1, 50, RngStream(9), 1);
    const GibbsComparison b = typicality_report(h, s, 1, 50, RngStream(9), 4);
    EXPECT_EQ(a.trace_distances, b.trace_distances);
    EXPECT_EQ(a.mean_state, b.mean_state);
}
