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
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "qic/config.hpp"
#include "qic/generator.hpp"
#include "qic/haar.hpp"
#include "qic/rng.hpp"
#include "qic/state.hpp"
#include "qic/stats.hpp"

namespace qic {

/// One write operation: parameter theta_{parameter} imprinted at `port` by `generator`.
struct WriteStep {
    std::size_t parameter;
    int port;
    Generator generator;
};

enum class ScramblerKind {
    haar,      // Haar on the full d^N space
    shell,     // Haar on the span of `shell_members`, identity elsewhere
    identity,
    explicit_unitary,
};

struct ScramblerSpec {
    ScramblerKind kind = ScramblerKind::haar;
    RngStream stream{0};
    std::vector<std::size_t> shell_members;            // shell kind only, sorted basis indices
    std::shared_ptr<const CMatrix> matrix;             // explicit kind only

    static ScramblerSpec haar(RngStream s) { return {ScramblerKind::haar, std::move(s), {}, nullptr}; }
    static ScramblerSpec shell(RngStream s, std::vector<std::size_t> members) {
        return {ScramblerKind::shell, std::move(s), std::move(members), nullptr};
    }
    static ScramblerSpec identity() { return {ScramblerKind::identity, RngStream{0}, {}, nullptr}; }
    static ScramblerSpec explicit_matrix(CMatrix u) {
        return {ScramblerKind::explicit_unitary, RngStream{0}, {}, std::make_shared<const CMatrix>(std::move(u))};
    }
};

/// The encoding circuit U_n W(theta_{a_n}) ... U_1 W(theta_{a_1}) U_0 |digits>.
///
/// steps[k] is the write between scramblers[k] and scramblers[k+1]; the step
/// parameters must be a permutation of 0..n-1.
struct EncoderSpec {
    int d = 2;
    int num_qudits = 1;
    std::vector<int> initial_digits;
    std::vector<WriteStep> steps;
    std::vector<ScramblerSpec> scramblers;

    std::size_t num_parameters() const noexcept { return steps.size(); }

    const WriteStep& step_for_parameter(std::size_t j) const {
        for (const auto& s : steps)
            if (s.parameter == j) return s;
        throw Error(ErrorCode::invalid_argument, "no write step for parameter " + std::to_string(j));
    }
};

/// Standard circuit: n writes of `gen` at port 1 with independent full-space
/// Haar scramblers drawn from base.child(0..n), initial state |0...0>.
inline EncoderSpec make_standard_spec(int d, int num_qudits, std::size_t n, const Generator& gen, const RngStream& base) {
    EncoderSpec spec;
    spec.d = d;
    spec.num_qudits = num_qudits;
    spec.initial_digits.assign(std::size_t(num_qudits), 0);
    for (std::size_t j = 0; j < n; ++j) spec.steps.push_back({j, 1, gen});
    for (std::size_t k = 0; k <= n; ++k) spec.scramblers.push_back(ScramblerSpec::haar(base.child(k)));
    return spec;
}

namespace detail {

// Orthonormal basis of the column span of `a` (relative cutoff on singular values).
inline CMatrix orthonormal_span(const CMatrix& a, double rel_cutoff) {
    Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[0] == 0.0) throw Error(ErrorCode::invalid_argument, "empty reachable subspace");
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > rel_cutoff * sv[0]) ++rank;
    return svd.matrixU().leftCols(rank);
}

// Sub-stream of a scrambler stream reserved for its domain frame.
inline constexpr std::uint64_t kFrameTag = ~std::uint64_t{0};

// Orthonormal basis of span(b) that depends only on the subspace and the
// stream: a Gaussian frame projected onto the subspace, then orthonormalised.
inline CMatrix canonical_frame(const CMatrix& b, const RngStream& stream) {
    const CMatrix g = ginibre(b.rows(), b.cols(), stream.child(kFrameTag));
    return phase_fixed_q(b * (b.adjoint() * g));
}

// A realised scrambler. Full-space Haar scramblers are realised on the subspace
// the circuit can actually reach: with B an orthonormal basis of that subspace
// and Y the first r columns of a Haar unitary Q, U = Q [B B_perp]^dagger acts
// as x -> Y B^dagger x there. UB is a Haar isometry for any B independent of
// Q, so this is exactly the restriction of a Haar-distributed unitary. B is
// drawn from a separate sub-stream so that equal subspaces give equal U.
struct RealizedScrambler {
    ScramblerKind kind;
    CMatrix domain;                      // haar: B
    CMatrix image;                       // haar: Y
    std::vector<std::size_t> members;    // shell
    CMatrix shell_unitary;               // shell: V
    std::shared_ptr<const CMatrix> dense;

    CVector apply(const CVector& x) const {
        switch (kind) {
            case ScramblerKind::identity: return x;
            case ScramblerKind::explicit_unitary: return (*dense) * x;
            case ScramblerKind::shell: {
                const Eigen::Index k = Eigen::Index(members.size());
                CVector c(k);
                for (Eigen::Index i = 0; i < k; ++i) c[i] = x[Eigen::Index(members[std::size_t(i)])];
                const CVector dc = shell_unitary * c - c;
                CVector y = x;
                for (Eigen::Index i = 0; i < k; ++i) y[Eigen::Index(members[std::size_t(i)])] += dc[i];
                return y;
            }
            case ScramblerKind::haar: {
                const CVector coeff = domain.adjoint() * x;
                const double off = (x - domain * coeff).norm();
                if (off > 1e-8 * std::max(1.0, x.norm()))
                    throw Error(ErrorCode::invalid_argument, "vector outside the realised scrambler domain");
                return image * coeff;
            }
        }
        return x;
    }
};

}  // namespace detail

/// Immutable encoder with all scramblers realised from their streams at construction.
class Encoder {
public:
    explicit Encoder(EncoderSpec spec, const Tolerances& tol = {}) : spec_(std::move(spec)), tol_(tol) {
        validate();
        realize();
    }

    const EncoderSpec& spec() const noexcept { return spec_; }
    const Tolerances& tolerances() const noexcept { return tol_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t num_parameters() const noexcept { return spec_.steps.size(); }

    PureState encode(std::span<const double> theta) const {
        return PureState(spec_.d, spec_.num_qudits, encode_amplitudes(theta), tol_);
    }
    PureState encode(const std::vector<double>& theta) const { return encode(std::span<const double>(theta)); }

    CVector encode_amplitudes(std::span<const double> theta) const {
        check_theta(theta);
        CVector x = initial_amplitudes();
        x = scramblers_[0].apply(x);
        for (std::size_t k = 0; k < spec_.steps.size(); ++k) {
            x = write(k, x, theta[spec_.steps[k].parameter]);
            x = scramblers_[k + 1].apply(x);
        }
        return x;
    }

    /// Exact partial derivatives d/dtheta_j |Psi>, by inserting i sigma at the
    /// write that carries theta_j. Returned in parameter order.
    std::vector<CVector> derivative_amplitudes(std::span<const double> theta) const {
        check_theta(theta);
        const std::size_t n = spec_.steps.size();
        // after_write[k]: state right after write k, before scrambler k+1.
        std::vector<CVector> after_write(n);
        CVector x = scramblers_[0].apply(initial_amplitudes());
        for (std::size_t k = 0; k < n; ++k) {
            after_write[k] = write(k, x, theta[spec_.steps[k].parameter]);
            x = scramblers_[k + 1].apply(after_write[k]);
        }
        std::vector<CVector> out(n);
        for (std::size_t k = 0; k < n; ++k) {
            const auto& step = spec_.steps[k];
            CVector v = Complex(0.0, 1.0) *
                        apply_local_matrix(after_write[k], step.generator.matrix(), spec_.d, spec_.num_qudits, step.port);
            v = scramblers_[k + 1].apply(v);
            for (std::size_t l = k + 1; l < n; ++l) {
                v = write(l, v, theta[spec_.steps[l].parameter]);
                v = scramblers_[l + 1].apply(v);
            }
            out[step.parameter] = std::move(v);
        }
        return out;
    }

    /// Dense d^N x d^N matrix of scrambler k (for cross-checks at small N).
    CMatrix materialize(std::size_t k) const {
        const auto& r = scramblers_.at(k);
        const Eigen::Index dim = Eigen::Index(dim_);
        switch (r.kind) {
            case ScramblerKind::identity: return CMatrix::Identity(dim, dim);
            case ScramblerKind::explicit_unitary: return *r.dense;
            case ScramblerKind::shell: {
                CMatrix b = CMatrix::Zero(dim, Eigen::Index(r.members.size()));
                for (std::size_t i = 0; i < r.members.size(); ++i) b(Eigen::Index(r.members[i]), Eigen::Index(i)) = 1.0;
                const Eigen::Index ke = b.cols();
                return CMatrix::Identity(dim, dim) + b * (r.shell_unitary - CMatrix::Identity(ke, ke)) * b.adjoint();
            }
            case ScramblerKind::haar: {
                const UnitaryMatrix q = haar_sample(dim_, spec_.scramblers[k].stream, tol_);
                Eigen::HouseholderQR<CMatrix> qr(r.domain);
                CMatrix completion = qr.householderQ();
                completion.leftCols(r.domain.cols()) = r.domain;
                return q.entries * completion.adjoint();
            }
        }
        return {};
    }

    /// Width of the realised domain of scrambler k (d^N for non-Haar kinds).
    Eigen::Index realized_rank(std::size_t k) const {
        const auto& r = scramblers_.at(k);
        return r.kind == ScramblerKind::haar ? r.domain.cols() : Eigen::Index(dim_);
    }

private:
    void check_theta(std::span<const double> theta) const {
        if (theta.size() != spec_.steps.size())
            throw Error(ErrorCode::dimension_mismatch, "theta length must equal the parameter count");
    }

    CVector initial_amplitudes() const {
        std::size_t index = 0;
        for (int digit : spec_.initial_digits) index = index * std::size_t(spec_.d) + std::size_t(digit);
        CVector x = CVector::Zero(Eigen::Index(dim_));
        x[Eigen::Index(index)] = 1.0;
        return x;
    }

    CVector write(std::size_t k, const CVector& x, double theta) const {
        const auto& step = spec_.steps[k];
        return apply_local_matrix(x, write_matrix(step.generator, theta), spec_.d, spec_.num_qudits, step.port);
    }

    void validate() {
        const auto& s = spec_;
        if (s.d < 2) throw Error(ErrorCode::invalid_argument, "local dimension must be >= 2");
        if (s.num_qudits < 1) throw Error(ErrorCode::invalid_argument, "qudit count must be >= 1");
        dim_ = checked_power(std::size_t(s.d), std::size_t(s.num_qudits), tol_.max_state_dim);
        if (dim_ == 0) throw Error(ErrorCode::cap_exceeded, "d^N exceeds the state-dimension cap");
        if (s.initial_digits.size() != std::size_t(s.num_qudits))
            throw Error(ErrorCode::dimension_mismatch, "need one initial digit per qudit");
        for (int digit : s.initial_digits)
            if (digit < 0 || digit >= s.d) throw Error(ErrorCode::invalid_argument, "initial digit out of range");
        const std::size_t n = s.steps.size();
        if (s.scramblers.size() != n + 1) throw Error(ErrorCode::dimension_mismatch, "need n + 1 scramblers");
        std::vector<char> seen(n, 0);
        for (const auto& step : s.steps) {
            if (step.parameter >= n || seen[step.parameter])
                throw Error(ErrorCode::invalid_argument, "step parameters must be a permutation of 0..n-1");
            seen[step.parameter] = 1;
            detail::require_port(step.port, s.num_qudits);
            if (step.generator.dim() != s.d) throw Error(ErrorCode::dimension_mismatch, "generator dimension != d");
        }
        for (std::size_t a = 0; a < s.scramblers.size(); ++a) {
            const auto& sa = s.scramblers[a];
            if (sa.kind == ScramblerKind::explicit_unitary) {
                if (!sa.matrix || std::size_t(sa.matrix->rows()) != dim_ || std::size_t(sa.matrix->cols()) != dim_)
                    throw Error(ErrorCode::dimension_mismatch, "explicit scrambler must be d^N x d^N");
                if (detail::unitarity_defect(*sa.matrix) > tol_.global_unitarity)
                    throw Error(ErrorCode::not_unitary, "explicit scrambler is not unitary");
            }
            if (sa.kind == ScramblerKind::shell) {
                const auto& m = sa.shell_members;
                if (m.empty()) throw Error(ErrorCode::empty_shell, "shell scrambler with no members");
                if (!std::is_sorted(m.begin(), m.end()) || std::adjacent_find(m.begin(), m.end()) != m.end() ||
                    m.back() >= dim_)
                    throw Error(ErrorCode::invalid_argument, "shell members must be sorted unique basis indices");
            }
            if (sa.kind != ScramblerKind::haar && sa.kind != ScramblerKind::shell) continue;
            for (std::size_t b = 0; b < a; ++b) {
                const auto& sb = s.scramblers[b];
                if ((sb.kind == ScramblerKind::haar || sb.kind == ScramblerKind::shell) && sb.stream == sa.stream)
                    throw Error(ErrorCode::stream_collision, "scramblers " + std::to_string(b) + " and " +
                                                                 std::to_string(a) + " share stream " + sa.stream.label());
            }
        }
    }

    void realize() {
        const std::size_t n = spec_.steps.size();
        // Orthonormal basis of the subspace the circuit reaches at this point.
        CMatrix reach = CMatrix::Zero(Eigen::Index(dim_), 1);
        reach.col(0) = initial_amplitudes();
        scramblers_.reserve(n + 1);
        for (std::size_t k = 0; k <= n; ++k) {
            CMatrix domain = reach;
            if (k > 0) {
                // The write before scrambler k keeps states inside span{P_s reach}.
                const auto& step = spec_.steps[k - 1];
                const Eigen::Index r = reach.cols();
                CMatrix spread(Eigen::Index(dim_), r * spec_.d);
                for (int sidx = 0; sidx < spec_.d; ++sidx) {
                    const CMatrix proj = step.generator.projector(sidx);
                    for (Eigen::Index c = 0; c < r; ++c)
                        spread.col(sidx * r + c) = apply_local_matrix(reach.col(c), proj, spec_.d, spec_.num_qudits, step.port);
                }
                domain = detail::orthonormal_span(spread, tol_.rank_cutoff);
            }
            const auto& ss = spec_.scramblers[k];
            detail::RealizedScrambler rs{ss.kind, {}, {}, {}, {}, ss.matrix};
            if (ss.kind == ScramblerKind::haar) {
                rs.domain = detail::canonical_frame(domain, ss.stream);
                rs.image = haar_isometry(dim_, std::size_t(domain.cols()), ss.stream, tol_);
            } else if (ss.kind == ScramblerKind::shell) {
                rs.members = ss.shell_members;
                rs.shell_unitary = haar_sample(ss.shell_members.size(), ss.stream, tol_).entries;
            }
            CMatrix next(domain.rows(), domain.cols());
            for (Eigen::Index c = 0; c < domain.cols(); ++c) next.col(c) = rs.apply(domain.col(c));
            scramblers_.push_back(std::move(rs));
            reach = std::move(next);
        }
    }

    EncoderSpec spec_;
    Tolerances tol_;
    std::size_t dim_ = 0;
    std::vector<detail::RealizedScrambler> scramblers_;
};

/// |<Psi(theta)|Psi(theta')>| against the decoupled-capsule prediction
/// prod_j |(1/d) sum_s e^{i w_s (theta'_j - theta_j)}|.
struct FactorizationResult {
    double measured;
    double predicted;
};

inline FactorizationResult overlap_factorization(const Encoder& enc, std::span<const double> theta,
                                                 std::span<const double> theta_prime) {
    if (theta.size() != theta_prime.size()) throw Error(ErrorCode::dimension_mismatch, "theta lengths differ");
    const CVector a = enc.encode_amplitudes(theta);
    const CVector b = enc.encode_amplitudes(theta_prime);
    double predicted = 1.0;
    for (std::size_t j = 0; j < theta.size(); ++j)
        predicted *= capsule_overlap(enc.spec().step_for_parameter(j).generator, theta_prime[j] - theta[j]);
    return {std::abs(a.dot(b)), predicted};
}

/// Component vectors |phi(s_1..s_n sbar)> of the trigonometric expansion
/// |Psi(theta)> = sum_s e^{i sum_j w_{s_j} theta_j} X_s, sliced by the digit
/// sbar of qudit 1 and rescaled by sqrt(d)^{n+1}.
struct ComponentSet {
    int d = 2;
    int num_qudits = 2;
    std::size_t n = 0;
    // vectors[((s_1 d + s_2) d + ... + s_n) d + sbar], each of length d^{N-1}.
    std::vector<CVector> vectors;
    // raw[(s_1 d + ... ) + s_n]: the unscaled full-register component X_s.
    std::vector<CVector> raw;
    std::vector<RVector> frequencies;  // per parameter
    double node_condition = 1.0;       // worst cond(M) over parameters
    std::vector<std::string> warnings;

    std::size_t count() const noexcept { return vectors.size(); }
};

/// Per-parameter interpolation nodes theta^{(k)} = 2 pi k / (d (w_max - w_min)).
inline std::vector<double> default_nodes(const Generator& gen) {
    const int d = gen.dim();
    const double span = gen.eigenvalues().maxCoeff() - gen.eigenvalues().minCoeff();
    std::vector<double> nodes(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) nodes[std::size_t(k)] = 2.0 * M_PI * k / (d * span);
    return nodes;
}

/// Fourier extraction of the components on a d^n product grid.
/// `nodes[j]` overrides the grid for parameter j when nonempty.
inline ComponentSet extract_components(const Encoder& enc, const std::vector<std::vector<double>>& nodes = {}) {
    const auto& spec = enc.spec();
    const std::size_t n = enc.num_parameters();
    const int d = spec.d;
    const auto& tol = enc.tolerances();
    if (int(n) + 2 > spec.num_qudits) throw Error(ErrorCode::invalid_argument, "component extraction needs n + 2 <= N");
    if (n > 4) throw Error(ErrorCode::invalid_argument, "component extraction supports n <= 4");

    ComponentSet cs;
    cs.d = d;
    cs.num_qudits = spec.num_qudits;
    cs.n = n;
    std::vector<std::vector<double>> grid(n);
    std::vector<CMatrix> inverse(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Generator& gen = spec.step_for_parameter(j).generator;
        if (!gen.nondegenerate(tol.frequency_gap))
            throw Error(ErrorCode::degenerate_spectrum, "generator for parameter " + std::to_string(j) + " has colliding frequencies");
        cs.frequencies.push_back(gen.eigenvalues());
        grid[j] = (j < nodes.size() && !nodes[j].empty()) ? nodes[j] : default_nodes(gen);
        if (grid[j].size() != std::size_t(d)) throw Error(ErrorCode::invalid_argument, "need d nodes per parameter");
        CMatrix m(d, d);
        for (int k = 0; k < d; ++k)
            for (int s = 0; s < d; ++s) m(k, s) = std::polar(1.0, gen.eigenvalues()[s] * grid[j][std::size_t(k)]);
        Eigen::JacobiSVD<CMatrix> svd(m);
        const auto& sv = svd.singularValues();
        const double cond = sv[d - 1] > 0.0 ? sv[0] / sv[d - 1] : std::numeric_limits<double>::infinity();
        cs.node_condition = std::max(cs.node_condition, cond);
        if (cond > tol.node_condition_fail)
            throw Error(ErrorCode::ill_conditioned, "node matrix for parameter " + std::to_string(j) + " is singular");
        if (cond > tol.node_condition_warn)
            cs.warnings.push_back("node matrix for parameter " + std::to_string(j) + " has condition " + std::to_string(cond));
        inverse[j] = m.inverse();
    }

    const std::size_t points = detail::ipow(std::size_t(d), n);
    const Eigen::Index dim = Eigen::Index(enc.dim());
    CMatrix table(dim, Eigen::Index(points));
    std::vector<double> theta(n);
    for (std::size_t g = 0; g < points; ++g) {
        std::size_t rem = g;
        for (std::size_t j = n; j-- > 0;) {
            theta[j] = grid[j][rem % std::size_t(d)];
            rem /= std::size_t(d);
        }
        table.col(Eigen::Index(g)) = enc.encode_amplitudes(theta);
    }
    // Invert axis by axis: X[.., s_j, ..] = sum_k Minv(s_j, k) T[.., k, ..].
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t stride = detail::ipow(std::size_t(d), n - 1 - j);
        CMatrix next(dim, Eigen::Index(points));
        for (std::size_t g = 0; g < points; ++g) {
            const std::size_t digit = (g / stride) % std::size_t(d);
            const std::size_t base = g - digit * stride;
            CVector acc = CVector::Zero(dim);
            for (int k = 0; k < d; ++k) acc += inverse[j](Eigen::Index(digit), k) * table.col(Eigen::Index(base + std::size_t(k) * stride));
            next.col(Eigen::Index(g)) = acc;
        }
        table = std::move(next);
    }

    const Eigen::Index rest = dim / d;
    const double scale = std::pow(std::sqrt(double(d)), double(n + 1));
    for (std::size_t g = 0; g < points; ++g) {
        cs.raw.push_back(table.col(Eigen::Index(g)));
        for (int sbar = 0; sbar < d; ++sbar) cs.vectors.push_back(scale * table.col(Eigen::Index(g)).segment(sbar * rest, rest));
    }
    return cs;
}

/// sum_s e^{i sum_j w_{s_j} theta_j} X_s from the extracted components.
inline CVector reassemble(const ComponentSet& cs, std::span<const double> theta) {
    if (theta.size() != cs.n) throw Error(ErrorCode::dimension_mismatch, "theta length must equal n");
    CVector out = CVector::Zero(cs.raw.front().size());
    const std::size_t d = std::size_t(cs.d);
    for (std::size_t g = 0; g < cs.raw.size(); ++g) {
        double phase = 0.0;
        std::size_t rem = g;
        for (std::size_t j = cs.n; j-- > 0;) {
            phase += cs.frequencies[j][Eigen::Index(rem % d)] * theta[j];
            rem /= d;
        }
        out += std::polar(1.0, phase) * cs.raw[g];
    }
    return out;
}

/// max |G - I| over the Gram matrix of the rescaled component vectors.
inline double gram_residual(const ComponentSet& cs) {
    const std::size_t m = cs.vectors.size();
    double worst = 0.0;
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a; b < m; ++b) {
            const Complex g = cs.vectors[a].dot(cs.vectors[b]);
            worst = std::max(worst, std::abs(g - Complex(a == b ? 1.0 : 0.0)));
        }
    return worst;
}

/// Expected size of the finite-N corrections, d^{-(N-3)/2}.
inline double decoupling_scale(int d, int num_qudits) { return std::pow(double(d), -0.5 * (num_qudits - 3)); }

struct OverlapRecord {
    int lambda;
    int a;
    int lambda_prime;
    int a_prime;
    double magnitude;
};

struct OverlapStats {
    int d = 2;
    std::vector<int> sizes;                      // N values
    std::vector<std::vector<OverlapRecord>> tables;  // per N, all seeds concatenated
    std::vector<double> medians;                 // per N, over lambda' != lambda
    double decay_exponent = 0.0;                 // slope of ln median vs N
};

/// Schmidt vectors |psi(a, lambda)> of U|lambda> for lambda = 0..m-1 and the
/// full table of |<psi(a', lambda')|psi(a, lambda)>|.
inline std::vector<OverlapRecord> cross_schmidt_overlaps(const RngStream& stream, int m, int d, int num_qudits,
                                                         const Tolerances& tol = {}) {
    const std::size_t dim = checked_power(std::size_t(d), std::size_t(num_qudits), tol.max_state_dim);
    if (dim == 0) throw Error(ErrorCode::cap_exceeded, "d^N exceeds the state-dimension cap");
    if (m < 1 || std::size_t(m) > dim) throw Error(ErrorCode::invalid_argument, "need 1 <= m <= d^N");
    const CMatrix cols = haar_isometry(dim, std::size_t(m), stream, tol);
    std::vector<SchmidtDecomposition> sds;
    for (int l = 0; l < m; ++l) sds.push_back(schmidt(PureState(d, num_qudits, cols.col(l), tol)));
    std::vector<OverlapRecord> out;
    for (int l = 0; l < m; ++l)
        for (int lp = 0; lp < m; ++lp)
            for (int a = 0; a < d; ++a)
                for (int ap = 0; ap < d; ++ap)
                    out.push_back({l, a, lp, ap, std::min(1.0, std::abs(sds[std::size_t(lp)].right.col(ap).dot(sds[std::size_t(l)].right.col(a))))});
    return out;
}

/// Ensemble over `seeds` trials (stream base.child(N).child(t)) for each N.
inline OverlapStats cross_overlap_scaling(const RngStream& base, const std::vector<int>& sizes, std::size_t seeds, int m,
                                          int d, unsigned threads = 1, const Tolerances& tol = {}) {
    OverlapStats st;
    st.d = d;
    st.sizes = sizes;
    for (int nq : sizes) {
        auto per_seed = parallel_map(seeds, threads, [&](std::size_t t) {
            return cross_schmidt_overlaps(base.child(std::uint64_t(nq)).child(t), m, d, nq, tol);
        });
        std::vector<OverlapRecord> all;
        std::vector<double> cross;
        for (auto& rows : per_seed)
            for (auto& r : rows) {
                if (r.lambda != r.lambda_prime) cross.push_back(r.magnitude);
                all.push_back(r);
            }
        st.tables.push_back(std::move(all));
        st.medians.push_back(median(cross));
    }
    if (sizes.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double k = double(sizes.size());
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            const double x = sizes[i], y = std::log(st.medians[i]);
            sx += x; sy += y; sxx += x * x; sxy += x * y;
        }
        st.decay_exponent = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    }
    return st;
}

/// max_a |p(a) - 1/d| for the Schmidt spectrum of `state` across qudit 1.
inline double schmidt_uniformity(const PureState& state) {
    const SchmidtDecomposition sd = schmidt(state);
    const double target = 1.0 / state.local_dim();
    return (sd.probs.array() - target).abs().maxCoeff();
}

/// Haar-random state U|0> drawn from `stream`.
inline PureState haar_state(int d, int num_qudits, const RngStream& stream, const Tolerances& tol = {}) {
    const std::size_t dim = checked_power(std::size_t(d), std::size_t(num_qudits), tol.max_state_dim);
    if (dim == 0) throw Error(ErrorCode::cap_exceeded, "d^N exceeds the state-dimension cap");
    return PureState(d, num_qudits, haar_isometry(dim, 1, stream, tol).col(0), tol);
}

inline double schmidt_uniformity(const RngStream& stream, int d, int num_qudits, const Tolerances& tol = {}) {
    if (num_qudits < 3) throw Error(ErrorCode::invalid_argument, "schmidt_uniformity needs N >= 3");
    return schmidt_uniformity(haar_state(d, num_qudits, stream, tol));
}

/// Exact Haar average of the one-qudit marginal purity, (d + d^{N-1}) / (d^N + 1).
inline double page_purity_exact(int d, int num_qudits) {
    const double dn = std::pow(double(d), num_qudits);
    return (d + dn / d) / (dn + 1.0);
}

/// Ensemble mean of Tr rho_1^2 over Haar states from stream.child(t).
inline MeanSe page_purity_mc(int d, int num_qudits, std::size_t samples, const RngStream& stream, unsigned threads = 1,
                             const Tolerances& tol = {}) {
    auto purities = parallel_map(samples, threads, [&](std::size_t t) {
        return schmidt_purity(schmidt(haar_state(d, num_qudits, stream.child(t), tol)));
    });
    return mean_se(purities);
}

}  // namespace qic
