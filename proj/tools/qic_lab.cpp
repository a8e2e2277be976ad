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

// qic_lab: one subcommand per experiment, seeded configs, CSV + JSON outputs.
//
// Exit codes: 0 all thresholds passed, 1 a scientific threshold failed,
// 2 usage or configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "lab/experiments.hpp"

namespace {

using namespace qic::lab;

struct Overrides {
    std::optional<std::string> config_file;
    std::vector<std::pair<std::string, std::string>> values;  // (section.key, text)
    std::vector<std::string> sets;
    bool emit_only = false;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig build_config(const std::string& kind, const Overrides& o) {
    ExperimentConfig c = defaults_for(kind);
    if (o.config_file) {
        c = parse(read_file(*o.config_file));
        if (c.kind != kind)
            throw ConfigError("field experiment.kind: config file is for '" + c.kind + "', not '" + kind + "'");
    }
    for (const auto& [name, value] : o.values) set_field(c, name, value);
    for (const auto& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
        set_field(c, s.substr(0, eq), s.substr(eq + 1));
    }
    validate(c);
    return c;
}

void print_summary(const ResultRecord& r, const std::vector<std::filesystem::path>& files) {
    std::printf("%s  config %s  seed %llu\n", r.kind.c_str(), r.config_hash.c_str(),
                static_cast<unsigned long long>(r.master_seed));
    for (const auto& [k, v] : r.summary) std::printf("  %-44s %.6g\n", k.c_str(), v);
    for (const auto& c : r.checks)
        std::printf("  [%s] %-38s %.6g %s %.6g\n", c.passed ? "pass" : "FAIL", c.name.c_str(), c.value, c.relation.c_str(),
                    c.threshold);
    for (const auto& n : r.notes) std::printf("  note: %s\n", n.c_str());
    for (const auto& f : files) std::printf("  wrote %s\n", f.string().c_str());
    std::printf("  wall clock %.2f s\n", r.wall_clock_seconds);
    std::printf("%s\n", r.passed() ? "PASSED" : "FAILED");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scrambled quantum-information-capsule experiments"};
    app.set_version_flag("--version", std::string(kToolName) + " " + qic::kVersion);
    app.require_subcommand(1);

    std::map<std::string, Overrides> overrides;
    app.add_subcommand("list-presets", "List generator presets, experiments and default tolerances");

    // Flags that map onto config fields; all of them are optional.
    const std::vector<std::tuple<std::string, std::string, std::string>> flags = {
        {"--seed", "experiment.seed", "Master seed"},
        {"--d", "system.d", "Local dimension"},
        {"--N", "system.N", "Number of qudits"},
        {"--n", "system.n", "Number of parameters"},
        {"--m", "system.m", "Subsystem size (typicality)"},
        {"--generator", "system.generator", "Generator preset"},
        {"--seeds", "sampling.seeds", "Number of seeds / trials"},
        {"--samples", "sampling.samples", "Number of samples"},
        {"--grid", "sampling.grid", "Grid points per theta axis"},
        {"--sizes", "sampling.sizes", "Comma-separated list of N"},
        {"--dim", "sampling.dims", "Comma-separated Haar dimensions"},
        {"--threads", "run.threads", "Worker cap; results do not depend on it"},
        {"--output", "run.output", "Output directory (default $QIC_OUTPUT_DIR or .)"},
    };
    std::map<std::string, std::map<std::string, std::string>> flag_values;
    for (const auto& kind : experiment_kinds()) {
        auto* sub = app.add_subcommand(kind.name, kind.summary);
        auto& o = overrides[kind.name];
        sub->add_option("--config", o.config_file, "INI config file; flags override it");
        sub->add_option("--set", o.sets, "Override any field: section.key=value")->take_all();
        sub->add_flag("--emit-config", o.emit_only, "Print the resolved config and exit");
        for (const auto& [flag, field, help] : flags) sub->add_option(flag, flag_values[kind.name][field], help);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (app.got_subcommand("list-presets")) {
        std::fputs(list_presets().c_str(), stdout);
        return 0;
    }
    for (const auto& kind : experiment_kinds()) {
        auto* sub = app.get_subcommand(kind.name);
        if (!sub->parsed()) continue;
        Overrides o = overrides[kind.name];
        for (const auto& [flag, field, help] : flags)
            if (sub->count(flag) > 0) o.values.emplace_back(field, flag_values[kind.name][field]);
        try {
            const ExperimentConfig c = build_config(kind.name, o);
            if (o.emit_only) {
                std::fputs(emit(c).c_str(), stdout);
                return 0;
            }
            const ResultRecord r = run(c);
            print_summary(r, write_outputs(r, output_dir(c)));
            return r.passed() ? 0 : 1;
        } catch (const ConfigError& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return 2;
        } catch (const qic::Error& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 2;
        }
    }
    return 2;
}
