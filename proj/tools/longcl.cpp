#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "longcl/error.hpp"
#include "longcl/experiment.hpp"
#include "longcl/metrics.hpp"

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kInvalidConfig = 2;

int run_command(const std::string& config_path, const std::string& out, const std::string& arm,
                const std::optional<std::uint64_t>& seed) {
    longcl::ExperimentConfig cfg;
    try {
        cfg = longcl::load_experiment_config(config_path);
        if (!out.empty()) cfg.output_dir = out;
        if (!arm.empty()) {
            std::vector<longcl::ArmSpec> kept;
            for (const auto& a : cfg.arms)
                if (a.name == arm) kept.push_back(a);
            if (kept.empty()) kept.push_back({arm, longcl::parse_method(arm), {}});
            cfg.arms = kept;
        }
        if (seed) cfg.seeds = {*seed};
    } catch (const longcl::ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return kInvalidConfig;
    }

    try {
        const auto cells = longcl::run_experiment(cfg);
        for (const auto& c : cells) {
            std::cout << c.dir.string() << "  AP=" << longcl::format_double(c.ap)
                      << "  AF=" << longcl::format_double(c.af) << '\n';
        }
        std::cout << cfg.output_dir.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return kRuntimeFailure;
    }
    return 0;
}

int compare_command(const std::vector<std::string>& dirs, const std::string& csv_path, bool by_order) {
    try {
        std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
        const auto table = longcl::compare_runs(paths, by_order);
        std::cout << table.to_text();
        if (!csv_path.empty()) {
            std::ofstream out(csv_path, std::ios::trunc);
            if (!out) throw longcl::IoError("cannot write " + csv_path);
            out << table.to_csv();
        }
    } catch (const std::exception& e) {
        std::cerr << "compare failed: " << e.what() << '\n';
        return kRuntimeFailure;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continual-learning runs with task-core memory fusion and prototype-based replay"};
    app.require_subcommand(1);

    std::string config_path, out_dir, arm;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "Run every (arm, order, seed) cell of an experiment config");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "Override the output directory");
    run->add_option("--arm", arm, "Run only this arm (a configured arm name or a method)");
    run->add_option("--seed", seed, "Run only this seed");

    std::vector<std::string> dirs;
    std::string csv_path;
    bool by_order = false;
    auto* cmp = app.add_subcommand("compare", "Aggregate AP/AF across run directories");
    cmp->add_option("dirs", dirs, "Run directories (searched recursively)")->required();
    cmp->add_option("--csv", csv_path, "Also write the table as CSV");
    cmp->add_flag("--by-order", by_order, "Group by task order as well as arm");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kInvalidConfig;
    }

    if (*run) return run_command(config_path, out_dir, arm, seed);
    return compare_command(dirs, csv_path, by_order);
}
