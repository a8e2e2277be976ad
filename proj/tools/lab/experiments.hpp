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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "lab/config.hpp"

namespace qic::lab {

struct Check {
    std::string name;
    double value;
    std::string relation;  // "<=", ">=", "<", ">"
    double threshold;
    bool passed;
};

/// Outcome of one run: per-trial rows, summary numbers and threshold checks.
struct ResultRecord {
    std::string kind;
    std::string config_hash;
    std::uint64_t master_seed = 0;
    std::string config_text;  // emitted config, [run] section excluded
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<std::string, double>> summary;
    std::vector<Check> checks;
    std::vector<std::string> notes;
    double wall_clock_seconds = 0.0;  // reported on stdout only

    bool passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }

    double stat(const std::string& name) const {
        for (const auto& [k, v] : summary)
            if (k == name) return v;
        throw std::out_of_range("no summary value '" + name + "'");
    }

    const Check& check(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return c;
        throw std::out_of_range("no check '" + name + "'");
    }

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw std::out_of_range("no column '" + name + "'");
    }
};

namespace detail {

inline std::string num(double x) { return to_text(x); }

inline void add(ResultRecord& r, const std::string& name, double v) { r.summary.emplace_back(name, v); }

inline void check(ResultRecord& r, const std::string& name, double value, const std::string& rel, double thr) {
    bool ok = false;
    if (rel == "<=") ok = value <= thr;
    else if (rel == ">=") ok = value >= thr;
    else if (rel == "<") ok = value < thr;
    else if (rel == ">") ok = value > thr;
    r.checks.push_back({name, value, rel, thr, ok});
}

inline std::string sigma_text(double dev, double se) {
    if (se > 0.0) return num(dev / se);
    return dev == 0.0 ? "0" : "inf";
}

/// Random spec over mixed d, N, ports, rotated generators and scrambler kinds.
inline EncoderSpec random_encoder_spec(const RngStream& stream) {
    auto eng = stream.engine();
    const int d = 2 + int(eng() % 2);
    const int nq = 3 + int(eng() % 3);
    const std::size_t n = 1 + eng() % 3;
    EncoderSpec spec;
    spec.d = d;
    spec.num_qudits = nq;
    for (int q = 0; q < nq; ++q) spec.initial_digits.push_back(int(eng() % std::uint64_t(d)));
    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < n; ++j) order[j] = j;
    std::shuffle(order.begin(), order.end(), eng);
    for (std::size_t k = 0; k < n; ++k) {
        const Generator base = make_generator(k % 2 ? "spin-z" : "quadratic", d);
        const Generator g = base.rotated(haar_sample(std::size_t(d), stream.child(100 + k)).entries);
        spec.steps.push_back({order[k], 1 + int(eng() % std::uint64_t(nq)), g});
    }
    const std::size_t dim = qic::detail::ipow(std::size_t(d), std::size_t(nq));
    std::vector<std::size_t> members(dim);
    for (std::size_t i = 0; i < dim; ++i) members[i] = i;
    std::shuffle(members.begin(), members.end(), eng);
    members.resize(dim / 3);
    std::sort(members.begin(), members.end());
    for (std::size_t k = 0; k <= n; ++k) {
        const auto pick = eng() % 4;
        if (k > 0 && pick == 0) spec.scramblers.push_back(ScramblerSpec::identity());
        else if (k > 0 && pick == 1) spec.scramblers.push_back(ScramblerSpec::shell(stream.child(k), members));
        else spec.scramblers.push_back(ScramblerSpec::haar(stream.child(k)));
    }
    return spec;
}

inline std::vector<double> random_angles(std::size_t n, const RngStream& stream) {
    auto eng = stream.engine();
    std::uniform_real_distribution<double> u(-M_PI, M_PI);
    std::vector<double> t(n);
    for (auto& x : t) x = u(eng);
    return t;
}

inline RMatrix random_orthogonal(int n, const RngStream& stream) {
    auto eng = stream.engine();
    std::normal_distribution<double> nd;
    RMatrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = nd(eng);
    Eigen::HouseholderQR<RMatrix> qr(a);
    return qr.householderQ() * RMatrix::Identity(n, n);
}

// ---------------------------------------------------------------------------

struct Pattern {
    int order;
    std::vector<int> idx;  // arguments of moment2_exact / moment4_exact
};

// |U11|^2 plus three patterns with zero mean.
inline std::vector<Pattern> second_moment_suite() {
    return {{2, {1, 1, 1, 1}}, {2, {1, 1, 2, 2}}, {2, {1, 2, 1, 2}}, {2, {1, 1, 1, 2}}};
}

// Fixed fourth-moment suite: both Weingarten terms, same-row and same-column
// products, and vanishing patterns.
inline std::vector<Pattern> fourth_moment_suite() {
    return {
        {4, {1, 1, 1, 1, 1, 1, 1, 1}}, {4, {1, 1, 2, 2, 1, 1, 2, 2}}, {4, {1, 2, 2, 1, 2, 1, 1, 2}},
        {4, {1, 1, 2, 2, 2, 1, 1, 2}}, {4, {1, 1, 1, 2, 1, 1, 2, 1}}, {4, {1, 1, 2, 1, 1, 1, 1, 2}},
        {4, {1, 1, 1, 1, 1, 2, 1, 1}}, {4, {1, 2, 1, 2, 2, 1, 2, 1}}, {4, {1, 1, 2, 2, 1, 1, 1, 1}},
        {4, {2, 1, 1, 2, 1, 2, 2, 1}}, {4, {1, 1, 1, 1, 2, 2, 2, 2}}, {4, {2, 2, 2, 2, 2, 2, 2, 2}},
    };
}

inline std::string pattern_label(const Pattern& p) {
    std::string s = "m" + std::to_string(p.order) + "(";
    for (std::size_t i = 0; i < p.idx.size(); ++i) s += (i ? "," : "") + std::to_string(p.idx[i]);
    return s + ")";
}

inline ResultRecord run_haar_moments(const ExperimentConfig& c, ResultRecord r) {
    r.columns = {"dim", "order", "pattern", "trial_stream", "mc_re", "mc_im", "exact", "std_error", "sigma"};
    std::vector<Pattern> suite = second_moment_suite();
    for (auto& p : fourth_moment_suite()) suite.push_back(p);
    std::vector<Monomial> monomials;
    for (const auto& p : suite) {
        const auto& i = p.idx;
        monomials.push_back(p.order == 2 ? moment2_monomial(i[0], i[1], i[2], i[3])
                                         : moment4_monomial(i[0], i[1], i[2], i[3], i[4], i[5], i[6], i[7]));
    }
    const RngStream base(c.seed);
    auto results = parallel_map(c.dims.size(), c.threads, [&](std::size_t k) {
        return moment_mc(std::size_t(c.dims[k]), monomials, c.samples, base.child(std::uint64_t(c.dims[k])), c.tol);
    });
    for (std::size_t k = 0; k < c.dims.size(); ++k) {
        const std::size_t dim = std::size_t(c.dims[k]);
        double worst2 = 0.0, worst4 = 0.0;
        for (std::size_t p = 0; p < suite.size(); ++p) {
            const auto& i = suite[p].idx;
            const double exact = suite[p].order == 2 ? moment2_exact(dim, i[0], i[1], i[2], i[3])
                                                     : moment4_exact(dim, i[0], i[1], i[2], i[3], i[4], i[5], i[6], i[7]);
            const MomentEstimate& e = results[k][p];
            const double dev = std::abs(e.value - exact);
            const double sig = e.std_error > 0.0 ? dev / e.std_error : (dev == 0.0 ? 0.0 : INFINITY);
            (suite[p].order == 2 ? worst2 : worst4) = std::max(suite[p].order == 2 ? worst2 : worst4, sig);
            r.rows.push_back({std::to_string(dim), std::to_string(suite[p].order), pattern_label(suite[p]),
                              base.child(dim).label(), num(e.value.real()), num(e.value.imag()), num(exact),
                              num(e.std_error), sigma_text(dev, e.std_error)});
            if (p == 0) add(r, "D" + std::to_string(dim) + ".abs_u11_sq", e.value.real());
            if (suite[p].order == 4 && p == second_moment_suite().size())
                add(r, "D" + std::to_string(dim) + ".abs_u11_4", e.value.real());
        }
        add(r, "D" + std::to_string(dim) + ".order2.max_sigma", worst2);
        add(r, "D" + std::to_string(dim) + ".order4.max_sigma", worst4);
        check(r, "D" + std::to_string(dim) + ".order2", worst2, "<=", c.thresholds.mc_sigma);
        check(r, "D" + std::to_string(dim) + ".order4", worst4, "<=", c.thresholds.mc_sigma);
    }
    return r;
}

inline ResultRecord run_page_purity(const ExperimentConfig& c, ResultRecord r) {
    r.columns = {"N", "sample", "trial_stream", "purity"};
    const RngStream base(c.seed);
    for (int nq : c.sizes) {
        const RngStream s = base.child(std::uint64_t(nq));
        auto purity = parallel_map(c.samples, c.threads, [&](std::size_t t) {
            return schmidt_purity(schmidt(haar_state(c.d, nq, s.child(t), c.tol)));
        });
        for (std::size_t t = 0; t < purity.size(); ++t)
            r.rows.push_back({std::to_string(nq), std::to_string(t), s.child(t).label(), num(purity[t])});
        const MeanSe m = mean_se(purity);
        const double exact = page_purity_exact(c.d, nq);
        const std::string tag = "N" + std::to_string(nq);
        add(r, tag + ".mean", m.mean);
        add(r, tag + ".std_error", m.std_error);
        add(r, tag + ".exact", exact);
        add(r, tag + ".sigma", std::abs(m.mean - exact) / m.std_error);
        check(r, tag + ".purity", std::abs(m.mean - exact) / m.std_error, "<=", c.thresholds.page_sigma);
    }
    return r;
}

inline ResultRecord run_cross_overlap(const ExperimentConfig& c, ResultRecord r) {
    r.columns = {"N", "trial", "trial_stream", "lambda", "a", "lambda_prime", "a_prime", "magnitude"};
    const RngStream base(c.seed);
    const int m = int(c.lambdas);
    const OverlapStats st = cross_overlap_scaling(base, c.sizes, c.seeds, m, c.d, c.threads, c.tol);
    const std::size_t per_trial = std::size_t(m * m * c.d * c.d);
    for (std::size_t k = 0; k < c.sizes.size(); ++k) {
        const RngStream s = base.child(std::uint64_t(c.sizes[k]));
        for (std::size_t i = 0; i < st.tables[k].size(); ++i) {
            const auto& o = st.tables[k][i];
            r.rows.push_back({std::to_string(c.sizes[k]), std::to_string(i / per_trial), s.child(i / per_trial).label(),
                              std::to_string(o.lambda), std::to_string(o.a), std::to_string(o.lambda_prime),
                              std::to_string(o.a_prime), num(o.magnitude)});
        }
        add(r, "N" + std::to_string(c.sizes[k]) + ".median", st.medians[k]);
    }
    add(r, "decay_exponent", st.decay_exponent);
    add(r, "fitted_ratio_per_2", std::exp(2.0 * st.decay_exponent));
    for (std::size_t k = 0; k + 1 < c.sizes.size(); ++k) {
        const std::string tag = "N" + std::to_string(c.sizes[k]) + "->" + std::to_string(c.sizes[k + 1]);
        const double ratio = std::pow(st.medians[k + 1] / st.medians[k], 2.0 / double(c.sizes[k + 1] - c.sizes[k]));
        add(r, tag + ".ratio_per_2", ratio);
        check(r, tag + ".decreasing", st.medians[k + 1], "<", st.medians[k]);
        check(r, tag + ".ratio_lo", ratio, ">=", c.thresholds.decay_ratio_lo);
        check(r, tag + ".ratio_hi", ratio, "<=", c.thresholds.decay_ratio_hi);
    }
    return r;
}

inline ResultRecord run_components(const ExperimentConfig& c, ResultRecord r) {
    r.columns = {"N", "trial", "trial_stream", "gram_residual", "ratio_to_scale", "node_condition"};
    const RngStream base(c.seed);
    const Generator gen = config_generator(c);
    std::vector<double> medians;
    for (int nq : c.sizes) {
        const RngStream s = base.child(std::uint64_t(nq));
        auto sets = parallel_map(c.seeds, c.threads, [&](std::size_t t) {
            const ComponentSet cs = extract_components(Encoder(make_standard_spec(c.d, nq, std::size_t(c.n), gen, s.child(t)), c.tol));
            return std::pair{gram_residual(cs), cs.node_condition};
        });
        const double scale = decoupling_scale(c.d, nq);
        std::vector<double> res;
        for (std::size_t t = 0; t < sets.size(); ++t) {
            res.push_back(sets[t].first);
            r.rows.push_back({std::to_string(nq), std::to_string(t), s.child(t).label(), num(sets[t].first),
                              num(sets[t].first / scale), num(sets[t].second)});
        }
        medians.push_back(median(res));
        add(r, "N" + std::to_string(nq) + ".median", medians.back());
        add(r, "N" + std::to_string(nq) + ".median_over_scale", medians.back() / scale);
        if (nq == c.num_qudits)
            check(r, "N" + std::to_string(nq) + ".gram", medians.back(), "<=", c.thresholds.decoupling_constant * scale);
    }
    if (c.sizes.size() >= 2)
        check(r, "N" + std::to_string(c.sizes.back()) + "<N" + std::to_string(c.sizes.front()), medians.back(), "<",
              medians.front());
    return r;
}

inline ResultRecord run_factorization(const ExperimentConfig& c, ResultRecord r) {
    r.columns = {"N", "trial", "trial_stream", "measured", "predicted", "error"};
    const RngStream base(c.seed);
    const Generator gen = config_generator(c);
    std::vector<double> theta_prime(c.theta.size());
    for (std::size_t j = 0; j < c.theta.size(); ++j) theta_prime[j] = c.theta[j] + c.delta[j];
    std::vector<double> medians;
    for (int nq : c.sizes) {
        const RngStream s = base.child(std::uint64_t(nq));
        auto out = parallel_map(c.seeds, c.threads, [&](std::size_t t) {
            return overlap_factorization(Encoder(make_standard_spec(c.d, nq, std::size_t(c.n), gen, s.child(t)), c.tol), c.theta,
                                         theta_prime);
        });
        std::vector<double> err;
        for (std::size_t t = 0; t < out.size(); ++t) {
            err.push_back(std::abs(out[t].measured - out[t].predicted));
            r.rows.push_back({std::to_string(nq), std::to_string(t), s.child(t).label(), num(out[t].measured),
                              num(out[t].predicted), num(err.back())});
        }
        medians.push_back(median(err));
        add(r, "N" + std::to_string(nq) + ".median_error", medians.back());
        if (nq == c.num_qudits) check(r, "N" + std::to_string(nq) + ".error", medians.back(), "<=", c.thresholds.factorization);
    }
    for (std::size_t k = 0; k + 1 < c.sizes.size(); ++k)
        check(r, "N" + std::to_string(c.sizes[k]) + "->" + std::to_string(c.sizes[k + 1]) + ".non_increasing", medians[k + 1],
              "<=", medians[k]);
    return r;
}

inline ResultRecord run_fisher(const ExperimentConfig& c, ResultRecord r) {
    r.columns = {"part", "trial", "trial_stream", "parameter", "quantity", "value"};
    const RngStream routes(c.seed, {0}), fd(c.seed, {1});
    struct RouteRow {
        double diff, min_eig;
    };
    auto route_rows = parallel_map(c.frames, c.threads, [&](std::size_t t) {
        const RngStream s = routes.child(t);
        const Encoder enc(random_encoder_spec(s), c.tol);
        const TangentFrame f = derivative_states(enc, random_angles(enc.num_parameters(), s.child(999)));
        const FisherMetric a = qfi_metric(f), b = qfi_metric_direct(f);
        return RouteRow{(a.g - b.g).cwiseAbs().maxCoeff(), std::min(a.min_eigenvalue(), b.min_eigenvalue())};
    });
    double worst_route = 0.0, worst_eig = INFINITY;
    for (std::size_t t = 0; t < route_rows.size(); ++t) {
        r.rows.push_back({"two-route", std::to_string(t), routes.child(t).label(), "", "max_abs_difference", num(route_rows[t].diff)});
        r.rows.push_back({"two-route", std::to_string(t), routes.child(t).label(), "", "min_eigenvalue", num(route_rows[t].min_eig)});
        worst_route = std::max(worst_route, route_rows[t].diff);
        worst_eig = std::min(worst_eig, route_rows[t].min_eig);
    }

    struct FdRow {
        std::vector<double> rel, order;
    };
    auto fd_rows = parallel_map(c.fd_specs, c.threads, [&](std::size_t t) {
        const RngStream s = fd.child(t);
        const Encoder enc(random_encoder_spec(s), c.tol);
        const std::vector<double> theta = random_angles(enc.num_parameters(), s.child(999));
        const TangentFrame f = derivative_states(enc, theta);
        FdRow row;
        for (std::size_t j = 0; j < enc.num_parameters(); ++j) {
            auto err = [&](double h) {
                std::vector<double> tp = theta, tm = theta;
                tp[j] += h;
                tm[j] -= h;
                const CVector diff = (enc.encode_amplitudes(tp) - enc.encode_amplitudes(tm)) / (2 * h);
                return (diff - f.derivs[j]).norm() / f.derivs[j].norm();
            };
            row.rel.push_back(err(c.fd_step));
            row.order.push_back(std::log10(err(1e-3) / err(1e-4)));
        }
        return row;
    });
    double worst_rel = 0.0, order_lo = INFINITY, order_hi = -INFINITY;
    for (std::size_t t = 0; t < fd_rows.size(); ++t)
        for (std::size_t j = 0; j < fd_rows[t].rel.size(); ++j) {
            r.rows.push_back({"finite-difference", std::to_string(t), fd.child(t).label(), std::to_string(j), "relative_error",
                              num(fd_rows[t].rel[j])});
            r.rows.push_back({"finite-difference", std::to_string(t), fd.child(t).label(), std::to_string(j), "observed_order",
                              num(fd_rows[t].order[j])});
            worst_rel = std::max(worst_rel, fd_rows[t].rel[j]);
            order_lo = std::min(order_lo, fd_rows[t].order[j]);
            order_hi = std::max(order_hi, fd_rows[t].order[j]);
        }
    add(r, "two_route.max_difference", worst_route);
    add(r, "metric.min_eigenvalue", worst_eig);
    add(r, "fd.max_relative_error", worst_rel);
    add(r, "fd.order_min", order_lo);
    add(r, "fd.order_max", order_hi);
    check(r, "two_route", worst_route, "<=", c.thresholds.two_route);
    check(r, "psd", worst_eig, ">=", -c.tol.metric_psd_floor);
    check(r, "fd.relative_error", worst_rel, "<=", c.thresholds.fd_relative);
    check(r, "fd.order_lo", order_lo, ">=", c.thresholds.fd_order_lo);
    check(r, "fd.order_hi", order_hi, "<=", c.thresholds.fd_order_hi);
    return r;
}

inline ResultRecord run_isometry(const ExperimentConfig& c, ResultRecord r) {
    r.columns = {"part", "trial", "trial_stream", "F", "anisotropy", "theta_drift", "residual"};
    const RngStream trials(c.seed, {0}), rots(c.seed, {1});
    const Generator gen = config_generator(c);
    const auto grid = product_grid(std::size_t(c.n), c.grid, c.theta_lo, c.theta_hi);
    auto reps = parallel_map(c.seeds, c.threads, [&](std::size_t t) {
        return isometry_report(Encoder(make_standard_spec(c.d, c.num_qudits, std::size_t(c.n), gen, trials.child(t)), c.tol), grid);
    });
    const double target = gen.uniform_variance();
    std::vector<double> aniso, drift, f;
    for (std::size_t t = 0; t < reps.size(); ++t) {
        aniso.push_back(reps[t].anisotropy);
        drift.push_back(reps[t].theta_drift);
        f.push_back(reps[t].f_estimate);
        r.rows.push_back({"grid", std::to_string(t), trials.child(t).label(), num(reps[t].f_estimate), num(reps[t].anisotropy),
                          num(reps[t].theta_drift), ""});
    }
    auto residuals = parallel_map(c.rotations, c.threads, [&](std::size_t k) {
        const RngStream s = rots.child(k);
        const Encoder enc(make_standard_spec(c.d, c.num_qudits, std::size_t(c.n), gen, s), c.tol);
        return reparameterize_check(enc, random_angles(std::size_t(c.n), s.child(999)), random_orthogonal(c.n, s.child(998)), c.tol)
            .residual;
    });
    double worst = 0.0;
    for (std::size_t k = 0; k < residuals.size(); ++k) {
        worst = std::max(worst, residuals[k]);
        r.rows.push_back({"chain-rule", std::to_string(k), rots.child(k).label(), "", "", "", num(residuals[k])});
    }
    const double scale = decoupling_scale(c.d, c.num_qudits);
    add(r, "scale", scale);
    add(r, "F.target", target);
    add(r, "F.median", median(f));
    add(r, "anisotropy.median", median(aniso));
    add(r, "anisotropy.median_over_scale", median(aniso) / scale);
    add(r, "theta_drift.median", median(drift));
    add(r, "theta_drift.median_over_scale", median(drift) / scale);
    add(r, "chain_rule.max_residual", worst);
    check(r, "anisotropy", median(aniso), "<=", c.thresholds.isometry);
    check(r, "theta_drift", median(drift), "<=", c.thresholds.isometry);
    check(r, "F", std::abs(median(f) - target), "<=", c.thresholds.isometry);
    check(r, "chain_rule", worst, "<=", c.thresholds.chain_rule);
    return r;
}

inline ResultRecord run_isometry_lowt(const ExperimentConfig& c, ResultRecord r) {
    r.columns = {"trial", "trial_stream", "arm", "F", "anisotropy", "theta_drift"};
    const RngStream trials(c.seed);
    const Generator gen = config_generator(c);
    const HamiltonianSpec h = build_hamiltonian(std::vector<std::vector<double>>(std::size_t(c.num_qudits), c.spectrum), c.tol);
    const MESShell shell = mes_shell(h, c.e_tot, c.delta_e, c.tol);
    // Start from a shell member so the shell arm never leaves the shell.
    std::vector<int> digits(std::size_t(c.num_qudits));
    for (std::size_t q = digits.size(), rem = shell.members.front(); q-- > 0; rem /= std::size_t(c.d))
        digits[q] = int(rem % std::size_t(c.d));
    const auto grid = product_grid(std::size_t(c.n), c.grid, c.theta_lo, c.theta_hi);
    struct Pair {
        IsometryReport full, narrow;
    };
    auto pairs = parallel_map(c.seeds, c.threads, [&](std::size_t t) {
        EncoderSpec full = make_standard_spec(c.d, c.num_qudits, std::size_t(c.n), gen, trials.child(t));
        full.initial_digits = digits;
        EncoderSpec narrow = full;
        for (auto& s : narrow.scramblers) s = ScramblerSpec::shell(s.stream, shell.members);
        return Pair{isometry_report(Encoder(full, c.tol), grid), isometry_report(Encoder(narrow, c.tol), grid)};
    });
    std::size_t broken = 0;
    std::vector<double> af, an;
    for (std::size_t t = 0; t < pairs.size(); ++t) {
        const auto& p = pairs[t];
        for (const auto* rep : {&p.full, &p.narrow})
            r.rows.push_back({std::to_string(t), trials.child(t).label(), rep == &p.full ? "full" : "shell", num(rep->f_estimate),
                              num(rep->anisotropy), num(rep->theta_drift)});
        broken += p.narrow.anisotropy > p.full.anisotropy ? 1 : 0;
        af.push_back(p.full.anisotropy);
        an.push_back(p.narrow.anisotropy);
    }
    const double frac = double(broken) / double(pairs.size());
    add(r, "shell_dim", double(shell.dim()));
    add(r, "anisotropy.full.median", median(af));
    add(r, "anisotropy.shell.median", median(an));
    add(r, "fraction_shell_larger", frac);
    check(r, "narrow_shell", double(shell.dim()), "<=", double(c.thresholds.lowt_max_shell_dim));
    check(r, "isometry_broken", frac, ">=", c.thresholds.lowt_fraction);
    return r;
}

inline ResultRecord run_typicality(const ExperimentConfig& c, ResultRecord r) {
    r.columns = {"arm", "sample", "trial_stream", "trace_distance", "hs_distance", "hs_fluctuation"};
    auto arm = [&](const std::string& name, const std::vector<double>& spectrum, double e_tot, double delta_e, const RngStream& s) {
        const HamiltonianSpec h = build_hamiltonian(std::vector<std::vector<double>>(std::size_t(c.num_qudits), spectrum), c.tol);
        const MESShell shell = mes_shell(h, e_tot, delta_e, c.tol);
        const GibbsComparison g = typicality_report(h, shell, c.m, c.samples, s, c.threads, {}, c.tol);
        for (std::size_t t = 0; t < g.trace_distances.size(); ++t)
            r.rows.push_back({name, std::to_string(t), s.child(t).label(), num(g.trace_distances[t]), num(g.hs_distances[t]),
                              num(g.hs_fluctuations[t])});
        add(r, name + ".shell_dim", double(shell.dim()));
        add(r, name + ".beta", g.beta);
        add(r, name + ".bound", g.bound);
        add(r, name + ".hs_variance", g.hs_variance);
        add(r, name + ".fraction_within", g.fraction_within(c.thresholds.trace_distance));
        add(r, name + ".mean_state_sigma_to_average", g.max_sigma_deviation(g.exact_average));
        add(r, name + ".gibbs_vs_average_trace_distance", trace_distance(g.gibbs, g.exact_average));
        check(r, name + ".variance_bound", g.hs_variance, "<=", g.bound * (1.0 + 5.0 / std::sqrt(double(c.samples))));
        return g;
    };
    if (c.zero_h_arm) {
        const GibbsComparison g = arm("zero-H", std::vector<double>(std::size_t(c.d), 0.0), 0.0, 0.0, RngStream(c.seed, {0}));
        const CMatrix mixed = CMatrix::Identity(g.gibbs.rows(), g.gibbs.cols()) / double(g.gibbs.rows());
        add(r, "zero-H.mean_state_sigma_to_mixed", g.max_sigma_deviation(mixed));
        check(r, "zero-H.mean_state", g.max_sigma_deviation(mixed), "<=", c.thresholds.typicality_sigma);
    }
    const GibbsComparison g = arm("shell", c.spectrum, c.e_tot, c.delta_e, RngStream(c.seed, {1}));
    check(r, "shell.trace_fraction", g.fraction_within(c.thresholds.trace_distance), ">=", c.thresholds.trace_fraction);
    r.notes.push_back("beta is the secant slope of the Gaussian-smoothed log density of states of the complement");
    return r;
}

}  // namespace detail

/// Runs one experiment. Results depend only on the config, never on c.threads.
inline ResultRecord run(const ExperimentConfig& c) {
    validate(c);
    const auto start = std::chrono::steady_clock::now();
    ResultRecord r;
    r.kind = c.kind;
    r.config_hash = config_hash(c);
    r.master_seed = c.seed;
    r.config_text = emit(c, false);
    if (c.kind == "haar-moments") r = detail::run_haar_moments(c, std::move(r));
    else if (c.kind == "page-purity") r = detail::run_page_purity(c, std::move(r));
    else if (c.kind == "cross-overlap") r = detail::run_cross_overlap(c, std::move(r));
    else if (c.kind == "components") r = detail::run_components(c, std::move(r));
    else if (c.kind == "factorization") r = detail::run_factorization(c, std::move(r));
    else if (c.kind == "fisher") r = detail::run_fisher(c, std::move(r));
    else if (c.kind == "isometry") r = detail::run_isometry(c, std::move(r));
    else if (c.kind == "isometry-lowT") r = detail::run_isometry_lowt(c, std::move(r));
    else if (c.kind == "typicality") r = detail::run_typicality(c, std::move(r));
    r.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

namespace detail {

inline std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

inline std::string provenance_header(const ResultRecord& r) {
    return "# tool: " + std::string(kToolName) + " " + kVersion + "\n# experiment: " + r.kind + "\n# config_hash: " +
           r.config_hash + "\n# master_seed: " + std::to_string(r.master_seed) + "\n";
}

}  // namespace detail

inline std::string to_csv(const ResultRecord& r) {
    std::string out = detail::provenance_header(r);
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + detail::csv_cell(cells[i]);
        out += "\n";
    };
    line(r.columns);
    for (const auto& row : r.rows) line(row);
    return out;
}

/// Sidecar summary. Wall-clock time is deliberately absent so reruns match byte for byte.
inline std::string to_json(const ResultRecord& r) {
    nlohmann::ordered_json j;
    j["tool"] = kToolName;
    j["version"] = kVersion;
    j["experiment"] = r.kind;
    j["config_hash"] = r.config_hash;
    j["master_seed"] = r.master_seed;
    j["passed"] = r.passed();
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : r.checks)
        j["checks"].push_back({{"name", c.name}, {"value", c.value}, {"relation", c.relation}, {"threshold", c.threshold}, {"passed", c.passed}});
    j["summary"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.summary) j["summary"][k] = v;
    j["notes"] = r.notes;
    j["config"] = r.config_text;
    return j.dump(2) + "\n";
}

/// Output directory: the explicit path, else $QIC_OUTPUT_DIR, else ".".
inline std::filesystem::path output_dir(const ExperimentConfig& c) {
    if (!c.output.empty()) return c.output;
    if (const char* env = std::getenv("QIC_OUTPUT_DIR"); env && *env) return env;
    return ".";
}

/// Writes <dir>/<kind>.csv and <dir>/<kind>.json and returns their paths.
inline std::vector<std::filesystem::path> write_outputs(const ResultRecord& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::vector<std::pair<std::filesystem::path, std::string>> files = {
        {dir / (r.kind + ".csv"), to_csv(r)},
        {dir / (r.kind + ".json"), to_json(r)},
    };
    std::vector<std::filesystem::path> out;
    for (const auto& [path, text] : files) {
        std::ofstream f(path, std::ios::binary);
        f << text;
        if (!f) throw std::runtime_error("cannot write " + path.string());
        out.push_back(path);
    }
    return out;
}

/// Human-readable listing of generator presets, experiments and default tolerances.
inline std::string list_presets() {
    std::string out = "generator presets:\n";
    for (const auto& p : generator_presets()) out += "  " + p.name + " (" + p.spectrum + ") eigenbasis: " + p.basis + "\n";
    out += "\nexperiments:\n";
    for (const auto& k : experiment_kinds()) out += "  " + k.name + ": " + k.summary + "\n";
    out += "\ndefault tolerances:\n";
    const ExperimentConfig c;
    for (const auto& f : detail::fields())
        if (f.section == "tolerances" || f.section == "thresholds") out += "  " + f.name() + " = " + f.get(c) + "\n";
    return out;
}

}  // namespace qic::lab
