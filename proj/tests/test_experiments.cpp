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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "lab/experiments.hpp"

using namespace qic::lab;

namespace {

std::string message_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

// Small, fast variant of each default config.
ExperimentConfig small(const std::string& kind) {
    ExperimentConfig c = defaults_for(kind);
    c.samples = kind == "typicality" ? 20 : 400;
    c.seeds = 6;
    c.frames = 4;
    c.fd_specs = 3;
    c.rotations = 2;
    if (kind == "haar-moments") c.dims = {2, 3};
    if (kind == "page-purity") c.sizes = {3, 5};
    if (kind == "cross-overlap") c.sizes = {4, 6};
    if (kind == "components") {
        c.sizes = {6, 8};
        c.n = 1;
    }
    if (kind == "factorization") c.sizes = {5, 6, 8};
    return c;
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("qic_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    return p;
}

int lab(const std::string& args) {
    const std::string cmd = std::string(QIC_LAB_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, round_trip_for_every_kind) {
    for (const auto& k : experiment_kinds()) {
        const ExperimentConfig c = defaults_for(k.name);
        const std::string text = emit(c);
        const ExperimentConfig back = parse(text);
        EXPECT_TRUE(back == c) << k.name;
        EXPECT_EQ(emit(back), text) << k.name;
    }
}

TEST(Config, round_trip_of_edited_values) {
    ExperimentConfig c = defaults_for("isometry");
    c.generator_re = {0.5, 0.0, 0.0, -0.5};
    c.generator_im = {0.0, 0.25, -0.25, 0.0};
    c.theta_hi = 0.1 + 0.2;  // not exactly representable in short decimal form
    c.thresholds.isometry = 1.0 / 3.0;
    c.tol.max_state_dim = 1 << 10;
    c.output = "some/dir";
    c.threads = 7;
    const ExperimentConfig back = parse(emit(c));
    EXPECT_TRUE(back == c);
    EXPECT_EQ(back.theta_hi, c.theta_hi);
    const qic::Generator g = config_generator(back);
    EXPECT_NEAR(g.eigenvalues()[0], std::sqrt(0.25 + 0.0625), 1e-12);
}

TEST(Config, emitted_form_lists_every_default) {
    const std::string text = emit(defaults_for("typicality"));
    for (const char* key : {"kind = typicality", "seed = 1", "spectrum = 0,1", "trace_fraction = 0.90000000000000002",
                            "max_state_dim = 65536", "threads = 1", "output = "})
        EXPECT_NE(text.find(key), std::string::npos) << key;
}

TEST(Config, partial_files_take_kind_defaults) {
    const ExperimentConfig c = parse("[experiment]\nkind = factorization\n[system]\nN = 7\n[sampling]\nsizes = 5,7\n");
    EXPECT_EQ(c.num_qudits, 7);
    EXPECT_EQ(c.delta, (std::vector<double>{0.3, 0.7}));
    EXPECT_EQ(c.sizes, (std::vector<int>{5, 7}));
}

TEST(Config, diagnostics_name_line_and_field) {
    EXPECT_NE(message_of("[experiment]\nkind = isometry\n[system]\nd = two\n").find("line 4, field system.d"), std::string::npos);
    EXPECT_NE(message_of("[experiment]\nkind = isometry\n\n[system]\nwidth = 3\n").find("line 5, field system.width: unknown key"),
              std::string::npos);
    EXPECT_NE(message_of("[experiment]\nkind = isometry\n[system\n").find("line 3"), std::string::npos);
    EXPECT_NE(message_of("[experiment]\nkind = isometry\n[system]\nd = 1\n").find("line 4, field system.d"), std::string::npos);
    EXPECT_NE(message_of("[system]\nd = 2\n").find("experiment.kind"), std::string::npos);
    EXPECT_NE(message_of("[experiment]\nkind = nonsense\n").find("unknown experiment"), std::string::npos);
    EXPECT_NE(message_of("[experiment]\nkind = factorization\n[sampling]\ndelta = 0.3\n").find("sampling.delta"), std::string::npos);
    EXPECT_NE(message_of("[experiment]\nkind = isometry\n[sampling]\nzero_h_arm = maybe\n").find("true or false"), std::string::npos);
    EXPECT_NE(message_of("[experiment]\nkind = isometry\n[system]\ngenerator = warp\n").find("unknown preset"), std::string::npos);
}

TEST(Config, hash_ignores_run_options) {
    ExperimentConfig a = defaults_for("fisher");
    ExperimentConfig b = a;
    b.threads = 4;
    b.output = "/elsewhere";
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.seed = 2;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, set_field) {
    ExperimentConfig c = defaults_for("isometry");
    set_field(c, "sampling.grid", "5");
    EXPECT_EQ(c.grid, 5u);
    EXPECT_THROW(set_field(c, "sampling.grid", "-1"), ConfigError);
    EXPECT_THROW(set_field(c, "grid", "5"), ConfigError);
}

TEST(ListPresets, contents) {
    const std::string text = list_presets();
    EXPECT_NE(text.find("pauli-z-like (d=2, w=+1,-1)"), std::string::npos);
    EXPECT_NE(text.find("cross-overlap"), std::string::npos);
    EXPECT_NE(text.find("typicality"), std::string::npos);
    EXPECT_NE(text.find("tolerances.rank_cutoff = 1e-10"), std::string::npos);
}

TEST(Run, every_kind_is_deterministic_across_worker_counts) {
    for (const auto& k : experiment_kinds()) {
        ExperimentConfig c = small(k.name);
        c.threads = 1;
        const ResultRecord a = run(c);
        c.threads = 3;
        const ResultRecord b = run(c);
        EXPECT_EQ(to_csv(a), to_csv(b)) << k.name;
        EXPECT_EQ(to_json(a), to_json(b)) << k.name;
        EXPECT_EQ(a.config_hash, config_hash(c));
        ASSERT_FALSE(a.rows.empty()) << k.name;
        const std::size_t col = a.column("trial_stream");
        for (const auto& row : a.rows) {
            ASSERT_EQ(row.size(), a.columns.size()) << k.name;
            EXPECT_EQ(row[col].rfind(std::to_string(c.seed), 0), 0u) << k.name;
        }
    }
}

TEST(Run, outputs_embed_provenance) {
    ExperimentConfig c = small("factorization");
    c.output = scratch("prov").string();
    const ResultRecord r = run(c);
    const auto files = write_outputs(r, output_dir(c));
    ASSERT_EQ(files.size(), 2u);
    for (const auto& f : files) {
        std::ifstream in(f);
        std::stringstream ss;
        ss << in.rdbuf();
        EXPECT_NE(ss.str().find(r.config_hash), std::string::npos) << f;
        EXPECT_NE(ss.str().find(qic::kVersion), std::string::npos) << f;
        EXPECT_NE(ss.str().find("master_seed"), std::string::npos) << f;
    }
    // The sidecar carries the config it was run with.
    std::ifstream in(files[1]);
    const auto j = nlohmann::json::parse(in);
    EXPECT_TRUE(parse(j["config"].get<std::string>()) == [&] {
        ExperimentConfig d = c;
        d.output.clear();
        return d;
    }());
    std::filesystem::remove_all(c.output);
}

TEST(Run, output_dir_from_environment) {
    ExperimentConfig c = defaults_for("fisher");
    ::setenv("QIC_OUTPUT_DIR", "/tmp/from-env", 1);
    EXPECT_EQ(output_dir(c), std::filesystem::path("/tmp/from-env"));
    c.output = "explicit";
    EXPECT_EQ(output_dir(c), std::filesystem::path("explicit"));
    ::unsetenv("QIC_OUTPUT_DIR");
    c.output.clear();
    EXPECT_EQ(output_dir(c), std::filesystem::path("."));
}

TEST(Run, csv_quoting) {
    ResultRecord r;
    r.kind = "x";
    r.columns = {"a", "b"};
    r.rows = {{"1,2", "say \"hi\""}};
    EXPECT_NE(to_csv(r).find("\"1,2\",\"say \"\"hi\"\"\""), std::string::npos);
}

TEST(Cli, exit_codes) {
    const auto dir = scratch("cli");
    const std::string out = " --output " + dir.string();
    EXPECT_EQ(lab("list-presets"), 0);
    EXPECT_EQ(lab("fisher --set sampling.frames=3 --set sampling.fd_specs=2" + out), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "fisher.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "fisher.json"));
    // A threshold no estimate can meet is a scientific failure, not a usage error.
    EXPECT_EQ(lab("factorization --seeds 3 --set thresholds.factorization=-1" + out), 1);
    EXPECT_EQ(lab("isometry --d 1" + out), 2);
    EXPECT_EQ(lab("isometry --grid three" + out), 2);
    EXPECT_EQ(lab("no-such-command"), 2);
    EXPECT_EQ(lab("isometry --config /nonexistent.ini"), 2);
    EXPECT_EQ(lab("isometry --set nothing=1"), 2);
    // Cap exceeded surfaces as a configuration error.
    EXPECT_EQ(lab("isometry --N 20 --seeds 1" + out), 2);
    std::filesystem::remove_all(dir);
}

TEST(Cli, config_file_and_emit) {
    const auto dir = scratch("cfg");
    std::filesystem::create_directories(dir);
    ExperimentConfig c = small("isometry");
    c.output = dir.string();
    {
        std::ofstream f(dir / "run.ini");
        f << emit(c);
    }
    EXPECT_EQ(lab("isometry --config " + (dir / "run.ini").string()), 0);
    EXPECT_EQ(lab("typicality --config " + (dir / "run.ini").string()), 2);
    EXPECT_EQ(lab("isometry --emit-config --N 6"), 0);
    std::filesystem::remove_all(dir);
}

TEST(Cli, reruns_are_byte_identical) {
    const auto a = scratch("rerun_a"), b = scratch("rerun_b");
    ASSERT_EQ(lab("cross-overlap --seeds 5 --sizes 4,6 --threads 1 --output " + a.string()), 0);
    ASSERT_EQ(lab("cross-overlap --seeds 5 --sizes 4,6 --threads 2 --output " + b.string()), 0);
    for (const char* f : {"cross-overlap.csv", "cross-overlap.json"}) {
        std::ifstream fa(a / f, std::ios::binary), fb(b / f, std::ios::binary);
        std::stringstream sa, sb;
        sa << fa.rdbuf();
        sb << fb.rdbuf();
        EXPECT_FALSE(sa.str().empty());
        EXPECT_EQ(sa.str(), sb.str()) << f;
    }
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}
