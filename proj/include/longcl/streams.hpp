#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace longcl {

struct Record {
    std::vector<double> x;
    int y = 0;

    friend bool operator==(const Record&, const Record&) = default;
};

struct TaskDataset {
    std::string id;
    std::vector<Record> train;
    std::vector<Record> test;
    std::size_t num_classes = 0;

    std::size_t feature_dim() const noexcept { return train.empty() ? 0 : train.front().x.size(); }
    friend bool operator==(const TaskDataset&, const TaskDataset&) = default;
};

// Ordered task sequence. `order[i]` is the original index of tasks[i].
struct TaskStream {
    std::vector<TaskDataset> tasks;
    std::vector<std::size_t> order;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return tasks.size(); }
    std::size_t feature_dim() const noexcept { return tasks.empty() ? 0 : tasks.front().feature_dim(); }
    std::size_t num_classes() const noexcept;

    friend bool operator==(const TaskStream&, const TaskStream&) = default;
};

enum class StreamFamily { rotated_gaussians, permuted_features, drifting_means };

struct SyntheticSpec {
    StreamFamily family = StreamFamily::rotated_gaussians;
    std::size_t tasks = 10;
    std::size_t train_per_task = 500;
    std::size_t test_per_task = 200;
    std::size_t features = 16;
    std::size_t classes = 4;
    double separation = 2.0;       // scale of the latent class means
    double noise = 1.0;            // per-coordinate standard deviation
    double rotation_step = 0.35;   // radians added per task (rotated-gaussians)
    double drift_step = 1.0;       // mean shift per task (drifting-means)
    std::uint64_t seed = 1;
};

// M tasks whose distribution is indexed by the task position t (0-based):
// rotation by t * rotation_step in every coordinate pair, a seeded feature
// permutation (identity for t = 0), or a shared mean shift of t * drift_step.
TaskStream gen_synthetic_stream(const SyntheticSpec& spec);

// Manifest: a JSON object mapping task id -> {"train": path, "test": path}, or
// {"num_classes": C, "tasks": {...}}. Relative paths resolve against the
// manifest's directory. JSONL records are {"x": [floats], "y": int}.
TaskStream load_jsonl_stream(const std::filesystem::path& manifest);

// Writes <dir>/manifest.json plus one train and one test JSONL file per task.
std::filesystem::path write_jsonl_stream(const TaskStream& stream, const std::filesystem::path& dir);

// tasks[i] of the result is tasks[permutation[i]] of the input.
TaskStream permute_order(const TaskStream& stream, std::span<const std::size_t> permutation);
TaskStream permute_order(const TaskStream& stream, std::uint64_t seed);

std::vector<std::size_t> shuffled_permutation(std::size_t n, std::uint64_t seed);
std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> permutation);

// Checks labels, dimensions, non-empty splits and train/test disjointness.
void validate_stream(const TaskStream& stream);

std::string to_string(StreamFamily family);
StreamFamily parse_family(const std::string& name);

}  // namespace longcl
