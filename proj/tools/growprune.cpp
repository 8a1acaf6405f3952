// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// growprune run --config <file> [--override key=value ...]
// growprune compare --baseline <dir> <dirs...> [--out <dir>]
// growprune inspect-checkpoint <file>
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "growprune/errors.hpp"
#include "growprune/experiment.hpp"

namespace {

enum Exit : int { kOk = 0, kConfig = 1, kData = 2, kRuntime = 3 };

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides) {
    const growprune::RunConfig config = growprune::load_run_config(config_path, overrides);
    for (const auto& outcome : growprune::execute(config)) {
        const auto& s = outcome.summary;
        std::cout << outcome.dir.string() << ": scheme=" << s["scheme"].get<std::string>()
                  << " train_acc=" << s["train"]["accuracy"].get<double>()
                  << " test_acc=" << s["test"]["accuracy"].get<double>()
                  << " flops=" << s["flops"]["total"].get<std::uint64_t>()
                  << (s["final_dense"].get<bool>() ? "" : " [final model sparse]") << '\n';
    }
    return kOk;
}

int cmd_compare(const std::string& baseline, const std::vector<std::string>& runs, const std::string& out_dir) {
    std::vector<std::filesystem::path> paths(runs.begin(), runs.end());
    const growprune::Comparison cmp = growprune::compare(baseline, paths);
    cmp.write_csv(std::cout);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream csv(std::filesystem::path(out_dir) / "comparison.csv");
        cmp.write_csv(csv);
        std::ofstream js(std::filesystem::path(out_dir) / "comparison.json");
        js << cmp.to_json().dump(2) << '\n';
    }
    if (!cmp.equal_flops) {
        for (const auto& m : cmp.flops_mismatches) std::cerr << "error: unequal training FLOPs: " << m << '\n';
        return kRuntime;
    }
    return kOk;
}

int cmd_inspect(const std::string& path) {
    std::cout << growprune::inspect_checkpoint(path).dump(2) << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Alternate grow/prune training for DLRM-style recommendation models"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    auto* run = app.add_subcommand("run", "Train one configuration (or an initial-capacity sweep)");
    run->add_option("--config", config_path, "JSON run configuration")->required();
    run->add_option("--override", overrides, "Dotted key=value overriding the config file")->take_all();

    std::string baseline;
    std::vector<std::string> runs;
    std::string out_dir;
    auto* compare = app.add_subcommand("compare", "Tabulate archived runs against a baseline run");
    compare->add_option("--baseline", baseline, "Baseline run directory")->required();
    compare->add_option("runs", runs, "Run directories")->required();
    compare->add_option("--out", out_dir, "Also write comparison.csv and comparison.json here");

    std::string ckpt;
    auto* inspect = app.add_subcommand("inspect-checkpoint", "Describe a checkpoint file");
    inspect->add_option("file", ckpt, "Checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*run) return cmd_run(config_path, overrides);
        if (*compare) return cmd_compare(baseline, runs, out_dir);
        if (*inspect) return cmd_inspect(ckpt);
    } catch (const growprune::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const growprune::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kRuntime;
}
