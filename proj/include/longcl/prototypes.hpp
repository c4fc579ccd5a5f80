#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace longcl {

using Embedding = std::vector<double>;

double euclidean_distance(std::span<const double> a, std::span<const double> b);

// Coordinatewise arithmetic mean. Throws PreconditionError on an empty task.
Embedding compute_prototype(std::span<const Embedding> embeddings);

// Task prototypes A^1..A^t in arrival order, with the sample count behind each.
class PrototypeStore {
public:
    void append(Embedding prototype, std::size_t sample_count);

    std::size_t size() const noexcept { return prototypes_.size(); }
    bool empty() const noexcept { return prototypes_.empty(); }
    std::size_t dimension() const noexcept { return prototypes_.empty() ? 0 : prototypes_.front().size(); }

    // Zero-based; prototype(0) is A^1.
    const Embedding& prototype(std::size_t index) const { return prototypes_.at(index); }
    std::size_t sample_count(std::size_t index) const { return counts_.at(index); }
    const std::vector<Embedding>& prototypes() const noexcept { return prototypes_; }

    // The first `count` prototypes (A^1..A^count).
    std::span<const Embedding> first(std::size_t count) const;

private:
    std::vector<Embedding> prototypes_;
    std::vector<std::size_t> counts_;
};

}  // namespace longcl
