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

#include "qic/haar.hpp"
#include "qic/stats.hpp"

using namespace qic;

TEST(HaarSample, unitary_and_deterministic) {
    for (std::size_t dim : {1u, 2u, 3u, 8u, 64u}) {
        const UnitaryMatrix u = haar_sample(dim, RngStream(1, {dim}));
        EXPECT_LE(u.unitarity_defect(), 1e-10) << dim;
        ASSERT_TRUE(u.provenance.has_value());
        const UnitaryMatrix again = haar_sample(dim, RngStream(1, {dim}));
        EXPECT_EQ(u.entries, again.entries);
    }
    EXPECT_NE(haar_sample(4, RngStream(1, {0})).entries, haar_sample(4, RngStream(1, {1})).entries);
}

TEST(HaarSample, cap) {
    Tolerances tol;
    tol.max_dense_unitary_dim = 16;
    EXPECT_THROW(haar_sample(17, RngStream(0), tol), Error);
    EXPECT_THROW(haar_sample(0, RngStream(0)), Error);
}

TEST(HaarSample, one_dimensional_is_uniform_phase) {
    std::vector<double> angles;
    Complex mean(0.0);
    for (std::uint64_t t = 0; t < 4000; ++t) {
        const Complex z = haar_sample(1, RngStream(2, {t})).entries(0, 0);
        EXPECT_NEAR(std::abs(z), 1.0, 1e-15);
        angles.push_back(std::arg(z) + M_PI);
        mean += z;
    }
    mean /= 4000.0;
    EXPECT_LT(std::abs(mean), 5.0 / std::sqrt(4000.0));
    // KS against U[0, 2pi).
    std::sort(angles.begin(), angles.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < angles.size(); ++i) {
        const double f = angles[i] / (2 * M_PI);
        ks = std::max({ks, std::abs(f - double(i) / 4000.0), std::abs(f - double(i + 1) / 4000.0)});
    }
    EXPECT_LT(ks, 1.628 / std::sqrt(4000.0));
}

TEST(HaarIsometry, matches_leading_columns_of_full_sample) {
    for (std::size_t k : {1u, 3u, 16u}) {
        const CMatrix y = haar_isometry(16, k, RngStream(8, {2}));
        const UnitaryMatrix u = haar_sample(16, RngStream(8, {2}));
        EXPECT_LT((y - u.entries.leftCols(Eigen::Index(k))).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Moment2Exact, closed_form) {
    EXPECT_DOUBLE_EQ(moment2_exact(4, 1, 1, 1, 1), 0.25);
    EXPECT_DOUBLE_EQ(moment2_exact(4, 1, 1, 2, 1), 0.0);
    EXPECT_DOUBLE_EQ(moment2_exact(2, 2, 1, 1, 2), 0.5);
    EXPECT_THROW(moment2_exact(2, 3, 1, 1, 1), Error);
}

TEST(Moment4Exact, closed_form) {
    // |U_11|^4 = U11 U11 (Ud)11 (Ud)11
    EXPECT_NEAR(moment4_exact(2, 1, 1, 1, 1, 1, 1, 1, 1), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(moment4_exact(4, 1, 1, 1, 1, 1, 1, 1, 1), 0.1, 1e-15);
    // |U_11|^2 |U_22|^2 = U11 U22 (Ud)11 (Ud)22
    EXPECT_NEAR(moment4_exact(4, 1, 1, 2, 2, 1, 1, 2, 2), 1.0 / 15.0, 1e-15);
    EXPECT_DOUBLE_EQ(moment4_exact(1, 1, 1, 1, 1, 1, 1, 1, 1), 1.0);
    // Column moment E|U_11|^4 = 2 / (D (D + 1)), an independent closed form.
    for (std::size_t dim = 2; dim <= 12; ++dim)
        EXPECT_NEAR(moment4_exact(dim, 1, 1, 1, 1, 1, 1, 1, 1), 2.0 / (double(dim) * (dim + 1)), 1e-15);
}

TEST(Moment4Exact, monte_carlo_oracle) {
    // Oracle: direct sampling. 2e5 samples keep the runtime small; 5 SE window.
    const std::vector<Monomial> ms = {
        moment4_monomial(1, 1, 1, 1, 1, 1, 1, 1),
        moment4_monomial(1, 1, 2, 2, 1, 1, 2, 2),
        moment4_monomial(1, 2, 2, 1, 2, 1, 1, 2),
    };
    for (std::size_t dim : {2u, 4u}) {
        const auto est = moment_mc(dim, ms, 200000, RngStream(77, {dim}));
        EXPECT_LE(std::abs(est[0].value - moment4_exact(dim, 1, 1, 1, 1, 1, 1, 1, 1)), 5 * est[0].std_error);
        EXPECT_LE(std::abs(est[1].value - moment4_exact(dim, 1, 1, 2, 2, 1, 1, 2, 2)), 5 * est[1].std_error);
        EXPECT_LE(std::abs(est[2].value - moment4_exact(dim, 1, 2, 2, 1, 2, 1, 1, 2)), 5 * est[2].std_error);
    }
}

TEST(MomentMc, second_moments) {
    const std::vector<Monomial> ms = {moment2_monomial(1, 1, 1, 1), {{1, 1, false}, {2, 1, true}}};
    const auto est = moment_mc(8, ms, 20000, RngStream(3));
    EXPECT_EQ(est[0].samples, 20000u);
    EXPECT_LE(std::abs(est[0].value - 0.125), 5 * est[0].std_error);
    EXPECT_LE(std::abs(est[1].value), 5 * est[1].std_error);
    EXPECT_GT(est[0].std_error, 0.0);
    EXPECT_THROW(moment_mc(8, ms[0], 1, RngStream(3)), Error);
}

TEST(HaarSample, left_invariance_ks) {
    const UnitaryMatrix v = haar_sample(6, RngStream(100));
    std::vector<double> a, b;
    for (std::uint64_t t = 0; t < 10000; ++t) {
        a.push_back(std::norm(haar_sample(6, RngStream(101, {t})).entries(0, 0)));
        b.push_back(std::norm((v.entries * haar_sample(6, RngStream(102, {t})).entries)(0, 0)));
    }
    EXPECT_LT(ks_statistic(a, b), ks_critical_1pct(a.size(), b.size()));
}

TEST(HaarSubspace, reductions_and_complement) {
    const UnitaryMatrix full = haar_sample_subspace(CMatrix::Identity(5, 5), RngStream(4));
    EXPECT_LT((full.entries - haar_sample(5, RngStream(4)).entries).cwiseAbs().maxCoeff(), 1e-14);

    // Random 3-dimensional subspace of C^8.
    const CMatrix basis = haar_isometry(8, 3, RngStream(5));
    const UnitaryMatrix u = haar_sample_subspace(basis, RngStream(6));
    EXPECT_LE(u.unitarity_defect(), 1e-10);
    const CMatrix proj = basis * basis.adjoint();
    EXPECT_LT((u.entries * proj - proj * u.entries).cwiseAbs().maxCoeff(), 1e-12);
    const CVector outside = (CMatrix::Identity(8, 8) - proj) * haar_isometry(8, 1, RngStream(7)).col(0);
    EXPECT_LT((u.entries * outside - outside).norm(), 1e-12);

    // k = 1: a phase on the ray.
    const CMatrix ray = haar_isometry(4, 1, RngStream(9));
    const UnitaryMatrix p = haar_sample_subspace(ray, RngStream(10));
    const CVector image = p.entries * ray.col(0);
    EXPECT_NEAR(std::abs(ray.col(0).dot(image)), 1.0, 1e-12);
}

TEST(HaarSubspace, restricted_second_moment) {
    const CMatrix basis = haar_isometry(8, 3, RngStream(50));
    double sum = 0.0;
    std::vector<double> vals;
    for (std::uint64_t t = 0; t < 20000; ++t) {
        const CMatrix v = basis.adjoint() * haar_sample_subspace(basis, RngStream(51, {t})).entries * basis;
        vals.push_back(std::norm(v(0, 0)));
        sum += vals.back();
    }
    const MeanSe m = mean_se(vals);
    EXPECT_LE(std::abs(m.mean - 1.0 / 3.0), 5 * m.std_error);
}

TEST(HaarSubspace, rejects_non_isometry) {
    CMatrix b = CMatrix::Zero(4, 2);
    b(0, 0) = 1.0;
    b(1, 1) = 1.1;
    try {
        haar_sample_subspace(b, RngStream(0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_isometry);
    }
}
