#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "longcl/streams.hpp"
#include "longcl/trainer.hpp"

namespace longcl {

struct StreamSource {
    std::optional<SyntheticSpec> synthetic;
    std::filesystem::path manifest;
    nlohmann::ordered_json spec;  // normalized form, used to match runs in compare
};

struct ArmSpec {
    std::string name;
    Method method = Method::long_cl;
    std::optional<double> fixed_alpha;
};

struct OrderSpec {
    enum class Kind { identity, shuffle, explicit_permutation };
    Kind kind = Kind::identity;
    std::uint64_t seed = 0;
    std::vector<std::size_t> permutation;

    std::string name() const;
};

struct ExperimentConfig {
    StreamSource stream;
    std::vector<ArmSpec> arms;
    RunConfig run;
    std::vector<std::uint64_t> seeds{1};
    std::vector<OrderSpec> orders{OrderSpec{}};
    std::filesystem::path output_dir = "out";
    bool checkpoints = true;
};

// Validates everything before any compute. Unknown keys and out-of-range
// values raise ConfigError with a message that starts with the field path.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

TaskStream materialize_stream(const StreamSource& source);

struct CellResult {
    std::string arm;
    std::string order;
    std::uint64_t seed = 0;
    std::filesystem::path dir;
    double ap = 0.0;
    double af = 0.0;
};

// Runs every (arm, order, seed) cell into <output_dir>/<arm>/<order>/<seed>/.
std::vector<CellResult> run_experiment(const ExperimentConfig& config);

struct ComparisonRow {
    std::string arm;
    std::string order;  // empty unless grouped by order
    std::size_t runs = 0;
    double ap_mean = 0.0;
    double ap_std = 0.0;
    double af_mean = 0.0;
    double af_std = 0.0;
    double af_spread = 0.0;  // max - min
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;

    std::string to_csv() const;
    std::string to_text() const;
};

// Collects every run cell under `dirs` and aggregates AP/AF per arm (and per
// order when `by_order`). Fails when the cells were produced from different
// stream specs.
ComparisonTable compare_runs(const std::vector<std::filesystem::path>& dirs, bool by_order = false);

}  // namespace longcl
