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

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "qic/qic.hpp"

namespace qic::lab {

inline constexpr const char* kToolName = "qic_lab";

/// Invalid configuration. The message names the line and/or field at fault.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentKind {
    std::string name;
    std::string summary;
};

inline const std::vector<ExperimentKind>& experiment_kinds() {
    static const std::vector<ExperimentKind> kinds = {
        {"haar-moments", "Monte-Carlo second and fourth Haar moments against the exact formulas"},
        {"page-purity", "mean one-qudit purity of Haar states against (d + d^{N-1}) / (d^N + 1)"},
        {"cross-overlap", "cross-Schmidt overlaps of U|lambda> across N, with decay ratio"},
        {"components", "Fourier extraction of component vectors and their Gram residual"},
        {"factorization", "overlap of two encodings against the product of capsule overlaps"},
        {"fisher", "two-route metric identity and finite-difference check of derivatives"},
        {"isometry", "rotational isometry of the metric on a theta grid, plus chain-rule residuals"},
        {"isometry-lowT", "paired full-space vs narrow-shell scrambling anisotropy"},
        {"typicality", "shell-random reduced states against the shell average and Gibbs(beta)"},
    };
    return kinds;
}

inline bool is_experiment_kind(const std::string& k) {
    for (const auto& e : experiment_kinds())
        if (e.name == k) return true;
    return false;
}

/// Pass/fail thresholds. Defaults are the desk-scale acceptance settings.
struct Thresholds {
    double mc_sigma = 5.0;              // Haar moments, |mc - exact| <= k SE
    double page_sigma = 3.0;
    double decay_ratio_lo = 0.3;        // cross-overlap shrink factor per 2 qudits
    double decay_ratio_hi = 0.8;
    double decoupling_constant = 5.0;   // gram residual <= c d^{-(N-3)/2}
    double factorization = 0.1;
    double two_route = 1e-10;
    double fd_relative = 1e-6;
    double fd_order_lo = 1.7;           // observed convergence order of central differences
    double fd_order_hi = 2.3;
    double isometry = 0.2;              // anisotropy, drift and |F - Var_u(w)|
    double chain_rule = 1e-8;
    double lowt_fraction = 0.8;
    std::size_t lowt_max_shell_dim = 16;
    double typicality_sigma = 5.0;
    double trace_distance = 0.15;
    double trace_fraction = 0.9;

    friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

/// One experiment run. Every field is emitted, so a saved config pins all defaults.
struct ExperimentConfig {
    std::string kind = "isometry";
    std::uint64_t seed = 1;

    int d = 2;
    int num_qudits = 8;
    int n = 2;
    std::string generator = "pauli-z-like";
    std::vector<double> generator_re;   // row-major d x d; overrides the preset when set
    std::vector<double> generator_im;
    int m = 1;                          // subsystem size (typicality)
    std::vector<double> spectrum{0.0, 1.0};  // per-site energies
    double e_tot = 2.0;
    double delta_e = 0.0;

    std::size_t samples = 100000;
    std::size_t seeds = 50;
    std::size_t lambdas = 2;
    std::size_t grid = 3;
    std::size_t frames = 50;
    std::size_t fd_specs = 20;
    std::size_t rotations = 10;
    std::vector<int> sizes;
    std::vector<int> dims;
    std::vector<double> theta;
    std::vector<double> delta;
    double theta_lo = 0.0;
    double theta_hi = M_PI;
    double fd_step = 1e-5;
    bool zero_h_arm = true;

    Thresholds thresholds;
    Tolerances tol;

    // Run options; not part of the config hash.
    std::string output;
    unsigned threads = 1;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::string to_text(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
inline std::string to_text(bool b) { return b ? "true" : "false"; }
inline std::string to_text(const std::string& s) { return s; }
template <class T>
    requires std::is_integral_v<T>
std::string to_text(T x) {
    return std::to_string(x);
}
template <class T>
std::string to_text(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + to_text(v[i]);
    return out;
}

template <class T>
T from_text(const std::string& raw);

template <>
inline std::string from_text<std::string>(const std::string& raw) {
    return trim(raw);
}

template <>
inline double from_text<double>(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) throw std::invalid_argument("expected a number");
    char* end = nullptr;
    const double x = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(x)) throw std::invalid_argument("expected a finite number, got '" + s + "'");
    return x;
}

template <>
inline bool from_text<bool>(const std::string& raw) {
    const std::string s = trim(raw);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("expected true or false, got '" + s + "'");
}

template <class T>
    requires std::is_integral_v<T>
T parse_integer(const std::string& raw) {
    const std::string s = trim(raw);
    T x{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw std::invalid_argument(std::string("expected ") + (std::is_signed_v<T> ? "an integer" : "a non-negative integer") +
                                    ", got '" + s + "'");
    return x;
}
template <>
inline int from_text<int>(const std::string& raw) {
    return parse_integer<int>(raw);
}
template <>
inline unsigned from_text<unsigned>(const std::string& raw) {
    return parse_integer<unsigned>(raw);
}
template <>
inline unsigned long from_text<unsigned long>(const std::string& raw) {
    return parse_integer<unsigned long>(raw);
}

template <class T>
std::vector<T> list_from_text(const std::string& raw) {
    std::vector<T> out;
    const std::string s = trim(raw);
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(from_text<T>(item));
    return out;
}
template <>
inline std::vector<int> from_text<std::vector<int>>(const std::string& raw) {
    return list_from_text<int>(raw);
}
template <>
inline std::vector<double> from_text<std::vector<double>>(const std::string& raw) {
    return list_from_text<double>(raw);
}

struct Field {
    std::string section;
    std::string key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;

    std::string name() const { return section + "." + key; }
};

template <class Proj>
Field make_field(std::string section, std::string key, Proj proj) {
    return {std::move(section), std::move(key), [proj](const ExperimentConfig& c) { return to_text(proj(c)); },
            [proj](ExperimentConfig& c, const std::string& v) {
                using T = std::remove_cvref_t<decltype(proj(c))>;
                proj(c) = from_text<T>(v);
            }};
}

#define QIC_FIELD(section, key, member) make_field(section, key, [](auto& c) -> auto& { return c.member; })

inline const std::vector<Field>& fields() {
    static const std::vector<Field> all = {
        QIC_FIELD("experiment", "kind", kind),
        QIC_FIELD("experiment", "seed", seed),

        QIC_FIELD("system", "d", d),
        QIC_FIELD("system", "N", num_qudits),
        QIC_FIELD("system", "n", n),
        QIC_FIELD("system", "generator", generator),
        QIC_FIELD("system", "generator_re", generator_re),
        QIC_FIELD("system", "generator_im", generator_im),
        QIC_FIELD("system", "m", m),
        QIC_FIELD("system", "spectrum", spectrum),
        QIC_FIELD("system", "e_tot", e_tot),
        QIC_FIELD("system", "delta_e", delta_e),

        QIC_FIELD("sampling", "samples", samples),
        QIC_FIELD("sampling", "seeds", seeds),
        QIC_FIELD("sampling", "lambdas", lambdas),
        QIC_FIELD("sampling", "grid", grid),
        QIC_FIELD("sampling", "frames", frames),
        QIC_FIELD("sampling", "fd_specs", fd_specs),
        QIC_FIELD("sampling", "rotations", rotations),
        QIC_FIELD("sampling", "sizes", sizes),
        QIC_FIELD("sampling", "dims", dims),
        QIC_FIELD("sampling", "theta", theta),
        QIC_FIELD("sampling", "delta", delta),
        QIC_FIELD("sampling", "theta_lo", theta_lo),
        QIC_FIELD("sampling", "theta_hi", theta_hi),
        QIC_FIELD("sampling", "fd_step", fd_step),
        QIC_FIELD("sampling", "zero_h_arm", zero_h_arm),

        QIC_FIELD("thresholds", "mc_sigma", thresholds.mc_sigma),
        QIC_FIELD("thresholds", "page_sigma", thresholds.page_sigma),
        QIC_FIELD("thresholds", "decay_ratio_lo", thresholds.decay_ratio_lo),
        QIC_FIELD("thresholds", "decay_ratio_hi", thresholds.decay_ratio_hi),
        QIC_FIELD("thresholds", "decoupling_constant", thresholds.decoupling_constant),
        QIC_FIELD("thresholds", "factorization", thresholds.factorization),
        QIC_FIELD("thresholds", "two_route", thresholds.two_route),
        QIC_FIELD("thresholds", "fd_relative", thresholds.fd_relative),
        QIC_FIELD("thresholds", "fd_order_lo", thresholds.fd_order_lo),
        QIC_FIELD("thresholds", "fd_order_hi", thresholds.fd_order_hi),
        QIC_FIELD("thresholds", "isometry", thresholds.isometry),
        QIC_FIELD("thresholds", "chain_rule", thresholds.chain_rule),
        QIC_FIELD("thresholds", "lowt_fraction", thresholds.lowt_fraction),
        QIC_FIELD("thresholds", "lowt_max_shell_dim", thresholds.lowt_max_shell_dim),
        QIC_FIELD("thresholds", "typicality_sigma", thresholds.typicality_sigma),
        QIC_FIELD("thresholds", "trace_distance", thresholds.trace_distance),
        QIC_FIELD("thresholds", "trace_fraction", thresholds.trace_fraction),

        QIC_FIELD("tolerances", "norm", tol.norm),
        QIC_FIELD("tolerances", "local_unitarity", tol.local_unitarity),
        QIC_FIELD("tolerances", "global_unitarity", tol.global_unitarity),
        QIC_FIELD("tolerances", "hermiticity", tol.hermiticity),
        QIC_FIELD("tolerances", "density_hermiticity", tol.density_hermiticity),
        QIC_FIELD("tolerances", "trace", tol.trace),
        QIC_FIELD("tolerances", "eigenvalue_floor", tol.eigenvalue_floor),
        QIC_FIELD("tolerances", "isometry", tol.isometry),
        QIC_FIELD("tolerances", "frame_imaginary", tol.frame_imaginary),
        QIC_FIELD("tolerances", "metric_psd_floor", tol.metric_psd_floor),
        QIC_FIELD("tolerances", "orthogonality", tol.orthogonality),
        QIC_FIELD("tolerances", "frequency_gap", tol.frequency_gap),
        QIC_FIELD("tolerances", "node_condition_warn", tol.node_condition_warn),
        QIC_FIELD("tolerances", "node_condition_fail", tol.node_condition_fail),
        QIC_FIELD("tolerances", "rank_cutoff", tol.rank_cutoff),
        QIC_FIELD("tolerances", "energy_grid", tol.energy_grid),
        QIC_FIELD("tolerances", "max_state_dim", tol.max_state_dim),
        QIC_FIELD("tolerances", "max_dense_unitary_dim", tol.max_dense_unitary_dim),
        QIC_FIELD("tolerances", "max_density_entries", tol.max_density_entries),

        QIC_FIELD("run", "output", output),
        QIC_FIELD("run", "threads", threads),
    };
    return all;
}

#undef QIC_FIELD

inline const Field* find_field(const std::string& section, const std::string& key) {
    for (const auto& f : fields())
        if (f.section == section && f.key == key) return &f;
    return nullptr;
}

// 1-based line of `key` inside `[section]` of an INI text, 0 if not found.
inline int line_of(const std::string& text, const std::string& section, const std::string& key) {
    std::istringstream in(text);
    std::string line, current;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t[0] == ';' || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            current = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq != std::string::npos && current == section && trim(t.substr(0, eq)) == key) return number;
    }
    return 0;
}

inline std::string where(int line, const std::string& field) {
    return (line > 0 ? "line " + std::to_string(line) + ", " : std::string{}) + "field " + field;
}

}  // namespace detail

/// Desk-scale defaults for one experiment kind.
inline ExperimentConfig defaults_for(const std::string& kind) {
    if (!is_experiment_kind(kind)) throw ConfigError("field experiment.kind: unknown experiment '" + kind + "'");
    ExperimentConfig c;
    c.kind = kind;
    if (kind == "haar-moments") {
        c.dims = {2, 4, 8};
        c.samples = 100000;
    } else if (kind == "page-purity") {
        c.sizes = {3, 8};
        c.samples = 10000;
    } else if (kind == "cross-overlap") {
        c.sizes = {4, 6, 8, 10};
        c.seeds = 50;
    } else if (kind == "components") {
        c.sizes = {6, 8, 10};
        c.seeds = 20;
    } else if (kind == "factorization") {
        c.sizes = {5, 6, 7, 8};
        c.seeds = 50;
        c.theta = {0.0, 0.0};
        c.delta = {0.3, 0.7};
    } else if (kind == "fisher") {
        c.frames = 50;
        c.fd_specs = 20;
    } else if (kind == "isometry-lowT") {
        c.e_tot = 1.0;
    } else if (kind == "typicality") {
        c.samples = 100;
        c.e_tot = 2.0;
    }
    return c;
}

/// Checks the values of `c` for its experiment kind.
inline void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& field, const std::string& what) { throw ConfigError("field " + field + ": " + what); };
    if (!is_experiment_kind(c.kind)) fail("experiment.kind", "unknown experiment '" + c.kind + "'");
    if (c.d < 2) fail("system.d", "local dimension must be >= 2");
    if (c.num_qudits < 1) fail("system.N", "qudit count must be >= 1");
    if (c.n < 0) fail("system.n", "parameter count must be >= 0");
    if (c.threads < 1) fail("run.threads", "need at least one worker");
    if (c.seeds < 1) fail("sampling.seeds", "need at least one seed");
    if (c.samples < 1) fail("sampling.samples", "need at least one sample");
    if (!c.generator_re.empty()) {
        if (c.generator_re.size() != std::size_t(c.d * c.d)) fail("system.generator_re", "need d*d entries");
        if (!c.generator_im.empty() && c.generator_im.size() != c.generator_re.size())
            fail("system.generator_im", "need d*d entries or none");
    } else {
        bool known = false;
        for (const auto& p : generator_presets()) known = known || p.name == c.generator;
        if (!known) fail("system.generator", "unknown preset '" + c.generator + "'");
    }
    const std::string& k = c.kind;
    const bool sized = k == "page-purity" || k == "cross-overlap" || k == "components" || k == "factorization";
    if (sized && c.sizes.empty()) fail("sampling.sizes", "need at least one N");
    for (int s : c.sizes)
        if (s < 1) fail("sampling.sizes", "every N must be >= 1");
    if (k == "haar-moments") {
        if (c.dims.empty()) fail("sampling.dims", "need at least one dimension");
        for (int dim : c.dims)
            if (dim < 2) fail("sampling.dims", "the moment suite needs dimension >= 2");
        if (c.samples < 2) fail("sampling.samples", "need at least two samples");
    }
    if (k == "page-purity")
        for (int s : c.sizes)
            if (s < 2) fail("sampling.sizes", "purity needs N >= 2");
    if (k == "cross-overlap" && c.lambdas < 2) fail("sampling.lambdas", "cross overlaps need at least two inputs");
    if (k == "components") {
        for (int s : c.sizes)
            if (c.n + 2 > s) fail("sampling.sizes", "extraction needs n + 2 <= N for every N");
        if (c.n > 4) fail("system.n", "extraction supports n <= 4");
        if (std::find(c.sizes.begin(), c.sizes.end(), c.num_qudits) == c.sizes.end())
            fail("sampling.sizes", "must include system.N, where the threshold is checked");
    }
    if (k == "factorization") {
        if (c.theta.size() != std::size_t(c.n)) fail("sampling.theta", "need n values");
        if (c.delta.size() != std::size_t(c.n)) fail("sampling.delta", "need n values");
        if (std::find(c.sizes.begin(), c.sizes.end(), c.num_qudits) == c.sizes.end())
            fail("sampling.sizes", "must include system.N, where the threshold is checked");
    }
    if (k == "fisher") {
        if (c.frames < 1) fail("sampling.frames", "need at least one frame");
        if (c.fd_specs < 1) fail("sampling.fd_specs", "need at least one spec");
        if (!(c.fd_step > 0.0)) fail("sampling.fd_step", "step must be positive");
    }
    if (k == "isometry" || k == "isometry-lowT") {
        if (c.n < 1) fail("system.n", "the metric needs n >= 1");
        if (c.grid < 1) fail("sampling.grid", "need at least one point per axis");
        if (!(c.theta_hi > c.theta_lo)) fail("sampling.theta_hi", "must exceed theta_lo");
    }
    if (k == "isometry-lowT" || k == "typicality") {
        if (c.spectrum.size() != std::size_t(c.d)) fail("system.spectrum", "need d site energies");
        if (c.delta_e < 0.0) fail("system.delta_e", "shell width must be >= 0");
    }
    if (k == "typicality") {
        if (c.m < 1 || 2 * c.m > c.num_qudits) fail("system.m", "need 1 <= m <= N/2");
        if (c.samples < 10) fail("sampling.samples", "need at least 10 samples");
    }
}

/// INI text with every field. `with_run` adds the [run] section.
inline std::string emit(const ExperimentConfig& c, bool with_run = true) {
    std::string out = "# " + std::string(kToolName) + " " + kVersion + " experiment config\n";
    std::string section;
    for (const auto& f : detail::fields()) {
        if (f.section == "run" && !with_run) continue;
        if (f.section != section) {
            section = f.section;
            out += "\n[" + section + "]\n";
        }
        out += f.key + " = " + f.get(c) + "\n";
    }
    return out;
}

/// Parses INI text. Keys absent from the text take the defaults of the
/// declared experiment kind.
inline ExperimentConfig parse(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
    }
    const auto kind = tree.get_optional<std::string>("experiment.kind");
    if (!kind) throw ConfigError("field experiment.kind: missing");
    ExperimentConfig c = defaults_for(detail::trim(*kind));
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("field " + section + ": key outside any section");
        for (const auto& [key, value] : body) {
            const int line = detail::line_of(text, section, key);
            const detail::Field* f = detail::find_field(section, key);
            if (!f) throw ConfigError(detail::where(line, section + "." + key) + ": unknown key");
            try {
                f->set(c, value.data());
            } catch (const std::invalid_argument& e) {
                throw ConfigError(detail::where(line, f->name()) + ": " + e.what());
            }
        }
    }
    try {
        validate(c);
    } catch (const ConfigError& e) {
        // Attach a line number when the offending key came from the text.
        const std::string msg = e.what();
        const auto colon = msg.find(':');
        const std::string field = msg.substr(6, colon - 6);
        const auto dot = field.find('.');
        const int line = dot == std::string::npos ? 0 : detail::line_of(text, field.substr(0, dot), field.substr(dot + 1));
        if (line > 0) throw ConfigError("line " + std::to_string(line) + ", " + msg);
        throw;
    }
    return c;
}

/// Sets one field by its "section.key" name, as the --set flag does.
inline void set_field(ExperimentConfig& c, const std::string& name, const std::string& value) {
    const auto dot = name.find('.');
    const detail::Field* f = dot == std::string::npos ? nullptr : detail::find_field(name.substr(0, dot), name.substr(dot + 1));
    if (!f) throw ConfigError("field " + name + ": unknown key");
    try {
        f->set(c, value);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("field " + name + ": " + e.what());
    }
}

/// 64-bit FNV-1a of the emitted config without its [run] section, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : emit(c, false)) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Write generator from the preset name or the explicit matrix.
inline Generator config_generator(const ExperimentConfig& c) {
    if (c.generator_re.empty()) return make_generator(c.generator, c.d, c.tol);
    CMatrix s(c.d, c.d);
    for (int i = 0; i < c.d; ++i)
        for (int j = 0; j < c.d; ++j) {
            const std::size_t idx = std::size_t(i * c.d + j);
            s(i, j) = Complex(c.generator_re[idx], c.generator_im.empty() ? 0.0 : c.generator_im[idx]);
        }
    return Generator::from_matrix(s, c.tol);
}

}  // namespace qic::lab
