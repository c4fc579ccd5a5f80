#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "longcl/prototypes.hpp"

namespace longcl {

// Frozen feature encoder. Built once from a seed before the first task and
// never updated, so prototypes from different tasks stay comparable.
class Encoder {
public:
    enum class Kind { identity, random_projection };

    static Encoder identity(std::size_t dim);
    // Gaussian matrix with N(0, 1/output_dim) entries drawn from `seed`.
    static Encoder random_projection(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed);

    Kind kind() const noexcept { return kind_; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t output_dim() const noexcept { return output_dim_; }
    std::span<const double> matrix() const noexcept { return matrix_; }

    Embedding embed(std::span<const double> features) const;

private:
    Kind kind_ = Kind::identity;
    std::size_t input_dim_ = 0;
    std::size_t output_dim_ = 0;
    std::vector<double> matrix_;  // row-major output_dim x input_dim
};

struct HardEntry {
    std::size_t id = 0;
    double distance = 0.0;  // distance to the current prototype
};

struct DiffEntry {
    std::size_t id = 0;
    double cumulative = 0.0;    // sum of distances to earlier prototypes
    double min_distance = 0.0;  // nearest earlier prototype
};

enum class BufferTag { hard, diff, both };

struct BufferRecord {
    std::size_t id = 0;
    BufferTag tag = BufferTag::hard;
    std::optional<double> hard_score;
    std::optional<double> diff_score;
};

struct SelectionReport {
    std::size_t task = 0;  // one-based
    std::vector<HardEntry> hard;
    std::vector<DiffEntry> diff;
    double delta = 0.0;
    std::vector<BufferRecord> buffer;
};

// ceil(r_h * n) samples farthest from `prototype`, ties to the lower id.
std::vector<HardEntry> select_hard(std::span<const Embedding> embeddings, const Embedding& prototype, double r_h);

// 0.8 * D_max / 2 over all pairs; zero with fewer than two prototypes.
double compute_delta(std::span<const Embedding> prototypes);

// Among samples at least `delta` from every earlier prototype, the
// ceil(r_g * n) with the smallest cumulative distance, ties to the lower id.
std::vector<DiffEntry> select_differential(std::span<const Embedding> embeddings,
                                           std::span<const Embedding> previous_prototypes, double r_g, double delta);

// Deduplicated union: hard entries in rank order, then diff-only entries.
std::vector<BufferRecord> build_buffer(std::span<const HardEntry> hard, std::span<const DiffEntry> diff);

struct MemConConfig {
    double r_h = 0.10;
    double r_g = 0.10;
    bool delta_rule = true;  // false disables the minimum-distance filter
};

// Full selection for task `t` (one-based). The store must already hold A^1..A^t.
SelectionReport memcon_select(std::span<const Embedding> embeddings, const PrototypeStore& prototypes, std::size_t t,
                              const MemConConfig& config);

std::string to_string(BufferTag tag);
nlohmann::ordered_json to_json(const SelectionReport& report);
SelectionReport selection_from_json(const nlohmann::json& j);

}  // namespace longcl
