#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "longcl/param_core.hpp"
#include "longcl/prototypes.hpp"

namespace longcl {

// Cumulative per-unit importance mask. Bits only ever switch from 0 to 1.
class TaskMask {
public:
    TaskMask() = default;
    explicit TaskMask(std::size_t units) : bits_(units, 0) {}
    TaskMask(std::vector<std::uint8_t> bits, std::size_t task_counter);

    std::size_t size() const noexcept { return bits_.size(); }
    bool test(std::size_t unit) const { return bits_.at(unit) != 0; }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    std::size_t task_counter() const noexcept { return task_counter_; }
    std::size_t popcount() const noexcept;

    std::string to_bitstring() const;
    static TaskMask from_bitstring(const std::string& bits, std::size_t task_counter);

    friend bool operator==(const TaskMask&, const TaskMask&) = default;

private:
    std::vector<std::uint8_t> bits_;
    std::size_t task_counter_ = 0;
};

// Per-unit fusion weights: alpha on masked units, 1 - alpha elsewhere.
struct FusionPlan {
    double alpha = 1.0;
    double lambda_floor = 0.3;
    std::vector<double> beta;
};

struct MemManConfig {
    double k_fraction = 0.10;
    double lambda_floor = 0.30;
    // Replaces the prototype-derived weight when set.
    std::optional<double> fixed_alpha;
};

// Top ceil(k_fraction * N) units by drift, ranked; ties go to the lower index.
std::vector<std::size_t> select_topk_units(const DriftScores& drift, double k_fraction);

TaskMask update_mask(const TaskMask& prev, std::span<const std::size_t> selected);

// Novelty of A^t against A^1..A^{t-1}, clamped to [lambda_floor, 1]. `t` is
// the one-based task index; the store must hold at least t prototypes.
double compute_alpha(const PrototypeStore& prototypes, std::size_t t, double lambda_floor);

// Unclamped ratio behind compute_alpha (1 for t = 2 or a zero denominator).
double raw_alpha(std::span<const Embedding> prototypes);

FusionPlan compose_beta(double alpha, const TaskMask& mask, double lambda_floor = 0.30);

// theta = beta * curr + (1 - beta) * prev, with each unit's beta broadcast.
ParamVector fuse_params(const ParamVector& prev, const ParamVector& curr, const FusionPlan& plan,
                        const UnitPartition& part);

struct MemManResult {
    ParamVector fused;
    TaskMask mask;
    DriftScores drift;
    std::vector<std::size_t> selected;
    std::optional<FusionPlan> plan;  // empty for the first task
};

// Drift -> TopK -> mask -> alpha -> beta -> fusion for task `t` (one-based).
// For t = 1, `prev_model` is the pre-stream initialization and the tuned
// model is returned unchanged.
MemManResult memman_step(const ParamVector& prev_model, const ParamVector& tuned_model, const UnitPartition& partition,
                         const TaskMask& mask, const PrototypeStore& prototypes, std::size_t t,
                         const MemManConfig& config);

}  // namespace longcl
