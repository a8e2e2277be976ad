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

#include <gtest/gtest.h>

#include "qic/generator.hpp"
#include "qic/haar.hpp"

using namespace qic;

namespace {

CMatrix random_traceless_hermitian(int d, std::uint64_t seed) {
    const CMatrix a = haar_sample(std::size_t(d), RngStream(seed)).entries;
    CMatrix h = a + a.adjoint();
    h -= (h.trace() / double(d)) * CMatrix::Identity(d, d);
    return h;
}

double max_diff(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Generator, invariants_for_random_matrix) {
    for (int d : {2, 3, 5}) {
        const Generator g = Generator::from_matrix(random_traceless_hermitian(d, 10 + d));
        EXPECT_LE(max_diff(g.matrix(), g.matrix().adjoint()), 1e-12);
        EXPECT_LE(std::abs(g.matrix().trace()), 1e-10);
        for (int s = 0; s < d; ++s) {
            EXPECT_LE((g.matrix() * g.eigenvectors().col(s) - g.eigenvalues()[s] * g.eigenvectors().col(s)).norm(), 1e-10);
            if (s + 1 < d) EXPECT_GE(g.eigenvalues()[s], g.eigenvalues()[s + 1]);
        }
    }
}

TEST(Generator, rejects_bad_input) {
    CMatrix not_herm = CMatrix::Zero(2, 2);
    not_herm(0, 1) = 1.0;
    EXPECT_THROW(Generator::from_matrix(not_herm), Error);
    CMatrix traceful = CMatrix::Identity(2, 2);
    EXPECT_THROW(Generator::from_matrix(traceful), Error);
    EXPECT_THROW(make_generator("pauli-z-like", 3), Error);
    EXPECT_THROW(make_generator("no-such", 2), Error);
    RVector w(2);
    w << 1.0, -1.0;
    EXPECT_THROW(Generator::from_spectrum(w, 2.0 * CMatrix::Identity(2, 2)), Error);
}

TEST(Generator, presets) {
    const Generator z = make_generator("pauli-z-like", 2);
    EXPECT_DOUBLE_EQ(z.eigenvalues()[0], 1.0);
    EXPECT_DOUBLE_EQ(z.eigenvalues()[1], -1.0);
    EXPECT_DOUBLE_EQ(z.uniform_variance(), 1.0);
    const Generator x = make_generator("pauli-x-like", 2);
    EXPECT_NEAR(std::abs(x.matrix()(0, 1)), 1.0, 1e-15);
    const Generator q = make_generator("quadratic", 4);
    EXPECT_TRUE(q.nondegenerate(1e-8));
    EXPECT_NEAR(q.eigenvalues().sum(), 0.0, 1e-12);
    const Generator sz = make_generator("spin-z", 3);
    EXPECT_DOUBLE_EQ(sz.eigenvalues()[0], 1.0);
    EXPECT_NEAR(sz.uniform_variance(), 2.0 / 3.0, 1e-15);
}

TEST(Generator, rotation_keeps_spectrum) {
    const Generator g = make_generator("spin-z", 3);
    const CMatrix u = haar_sample(3, RngStream(5)).entries;
    const Generator r = g.rotated(u);
    EXPECT_LE((r.eigenvalues() - g.eigenvalues()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(max_diff(r.matrix(), u * g.matrix() * u.adjoint()), 1e-12);
}

TEST(WriteOperator, zero_angle_is_identity) {
    const Generator g = Generator::from_matrix(random_traceless_hermitian(3, 4));
    EXPECT_LE(max_diff(write_matrix(g, 0.0), CMatrix::Identity(3, 3)), 1e-14);
}

TEST(WriteOperator, quarter_turn_qubit) {
    const Generator g = make_generator("pauli-x-like", 2);
    const CMatrix w = write_matrix(g, M_PI / 2);
    const CMatrix in_eigenbasis = g.eigenvectors().adjoint() * w * g.eigenvectors();
    EXPECT_NEAR(std::abs(in_eigenbasis(0, 0) - Complex(0, 1)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(in_eigenbasis(1, 1) - Complex(0, -1)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(in_eigenbasis(0, 1)), 0.0, 1e-14);
}

TEST(WriteOperator, one_parameter_group_and_unitarity) {
    const Generator g = Generator::from_matrix(random_traceless_hermitian(4, 6));
    for (double a : {0.1, -1.3, 2.9}) {
        for (double b : {0.7, 4.0}) {
            EXPECT_LE(max_diff(write_matrix(g, a) * write_matrix(g, b), write_matrix(g, a + b)), 1e-12);
        }
        EXPECT_LE(detail::unitarity_defect(write_matrix(g, a)), 1e-10);
    }
    // Against a matrix exponential computed by a truncated Taylor series.
    const double theta = 0.37;
    CMatrix term = CMatrix::Identity(4, 4), sum = term;
    for (int k = 1; k < 40; ++k) {
        term = term * (Complex(0, theta) * g.matrix()) / double(k);
        sum += term;
    }
    EXPECT_LE(max_diff(sum, write_matrix(g, theta)), 1e-12);
}

TEST(WriteOperator, applies_at_port) {
    const Generator g = make_generator("pauli-z-like", 2);
    const WriteOperator w = write_operator(g, M_PI / 2, 2, 3);
    const PureState out = w.apply(make_basis_state(2, 3, {0, 1, 0}));
    EXPECT_NEAR(std::abs(out[2] - Complex(0, -1)), 0.0, 1e-14);
    EXPECT_THROW(write_operator(g, 0.0, 4, 3), Error);
    EXPECT_THROW(write_operator(g, 0.0, 0, 3), Error);
}

TEST(QicReference, examples) {
    const Generator g = make_generator("pauli-z-like", 2);
    const PureState zero = qic_reference(g, 0.0);
    EXPECT_NEAR(std::abs(zero[0] - M_SQRT1_2), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(zero[1] - M_SQRT1_2), 0.0, 1e-15);
    for (double t : {0.0, 0.3, 1.2, M_PI / 2, 2.5}) {
        const PureState phi = qic_reference(g, t);
        EXPECT_NEAR(overlap(zero, phi).real(), std::cos(t), 1e-14);
        EXPECT_NEAR(std::abs(overlap(phi, phi)), 1.0, 1e-14);
        EXPECT_NEAR(capsule_overlap(g, t), std::abs(std::cos(t)), 1e-14);
    }
}

TEST(QicReference, eigenbasis_superposition) {
    const Generator g = Generator::from_matrix(random_traceless_hermitian(3, 9));
    const PureState phi = qic_reference(g, 0.0);
    for (int s = 0; s < 3; ++s)
        EXPECT_NEAR(std::abs(g.eigenvectors().col(s).dot(phi.amplitudes())), 1.0 / std::sqrt(3.0), 1e-12);
}
