#include "longcl/memman.hpp"

#include <algorithm>

#include "longcl/error.hpp"
#include "longcl/ranking.hpp"

namespace longcl {

TaskMask::TaskMask(std::vector<std::uint8_t> bits, std::size_t task_counter)
    : bits_(std::move(bits)), task_counter_(task_counter) {
    for (auto& b : bits_)
        if (b > 1) throw ShapeError("mask bits must be 0 or 1");
}

std::size_t TaskMask::popcount() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string TaskMask::to_bitstring() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s.push_back(b ? '1' : '0');
    return s;
}

TaskMask TaskMask::from_bitstring(const std::string& bits, std::size_t task_counter) {
    std::vector<std::uint8_t> out;
    out.reserve(bits.size());
    for (char c : bits) {
        if (c != '0' && c != '1') throw IngestionError("mask bit-string contains '" + std::string(1, c) + "'");
        out.push_back(c == '1' ? 1 : 0);
    }
    return TaskMask(std::move(out), task_counter);
}

std::vector<std::size_t> select_topk_units(const DriftScores& drift, double k_fraction) {
    if (drift.per_unit.empty()) throw ConfigError("select_topk_units: empty drift list");
    if (!(k_fraction > 0.0 && k_fraction <= 1.0)) throw ConfigError("k_fraction must lie in (0, 1]");
    return ranked_indices(drift.per_unit, fraction_count(drift.size(), k_fraction), RankOrder::largest_first);
}

TaskMask update_mask(const TaskMask& prev, std::span<const std::size_t> selected) {
    std::vector<std::uint8_t> bits(prev.bits().begin(), prev.bits().end());
    for (std::size_t i : selected) {
        if (i >= bits.size())
            throw ShapeError("unit index " + std::to_string(i) + " outside mask of size " + std::to_string(bits.size()));
        bits[i] = 1;
    }
    return TaskMask(std::move(bits), prev.task_counter() + 1);
}

double raw_alpha(std::span<const Embedding> prototypes) {
    const std::size_t t = prototypes.size();
    if (t < 2) throw PreconditionError("alpha is defined from the second task on");
    if (t == 2) return 1.0;
    const Embedding& current = prototypes[t - 1];
    double numerator = 0.0;
    for (std::size_t j = 0; j + 1 < t; ++j) numerator += euclidean_distance(current, prototypes[j]);
    double denominator = 0.0;
    for (std::size_t i = 0; i + 1 < t; ++i)
        for (std::size_t j = i + 1; j + 1 < t; ++j) denominator += euclidean_distance(prototypes[i], prototypes[j]);
    if (denominator == 0.0) return 1.0;
    return numerator / denominator;
}

double compute_alpha(const PrototypeStore& prototypes, std::size_t t, double lambda_floor) {
    if (t < 2) throw PreconditionError("alpha is defined from the second task on");
    if (!(lambda_floor > 0.0 && lambda_floor < 1.0)) throw ConfigError("lambda_floor must lie in (0, 1)");
    return std::clamp(raw_alpha(prototypes.first(t)), lambda_floor, 1.0);
}

FusionPlan compose_beta(double alpha, const TaskMask& mask, double lambda_floor) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw PreconditionError("alpha must lie in [0, 1]");
    FusionPlan plan;
    plan.alpha = alpha;
    plan.lambda_floor = lambda_floor;
    plan.beta.reserve(mask.size());
    const double off = 1.0 - alpha;
    for (auto bit : mask.bits()) plan.beta.push_back(bit ? alpha : off);
    return plan;
}

ParamVector fuse_params(const ParamVector& prev, const ParamVector& curr, const FusionPlan& plan,
                        const UnitPartition& part) {
    prev.require_combinable(curr);
    if (part.total_length() != prev.size()) throw ShapeError("partition does not cover the parameter vector");
    if (plan.beta.size() != part.size()) throw ShapeError("beta length differs from the unit count");
    const auto old_vals = prev.values();
    const auto new_vals = curr.values();
    std::vector<double> out(prev.size());
    for (std::size_t u = 0; u < part.size(); ++u) {
        const double b = plan.beta[u];
        for (std::size_t i = part[u].begin; i < part[u].end; ++i) out[i] = b * new_vals[i] + (1.0 - b) * old_vals[i];
    }
    return prev.with_values(std::move(out));
}

MemManResult memman_step(const ParamVector& prev_model, const ParamVector& tuned_model, const UnitPartition& partition,
                         const TaskMask& mask, const PrototypeStore& prototypes, std::size_t t,
                         const MemManConfig& config) {
    if (t < 1) throw PreconditionError("task index is one-based");
    if (mask.size() != partition.size()) throw ShapeError("mask length differs from the unit count");

    MemManResult result;
    result.drift = compute_drift(prev_model, tuned_model, partition);
    result.selected = select_topk_units(result.drift, config.k_fraction);
    result.mask = update_mask(mask, result.selected);
    if (t == 1) {
        result.fused = tuned_model;
        return result;
    }

    double alpha = 0.0;
    if (config.fixed_alpha) {
        alpha = *config.fixed_alpha;
    } else {
        alpha = compute_alpha(prototypes, t, config.lambda_floor);
    }
    result.plan = compose_beta(alpha, result.mask, config.lambda_floor);
    result.fused = fuse_params(prev_model, tuned_model, *result.plan, partition);
    return result;
}

}  // namespace longcl
