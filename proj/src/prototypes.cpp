#include "longcl/prototypes.hpp"

#include <cmath>

#include "longcl/error.hpp"

namespace longcl {

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("embedding dimension mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

Embedding compute_prototype(std::span<const Embedding> embeddings) {
    if (embeddings.empty()) throw PreconditionError("cannot compute the prototype of an empty task");
    const std::size_t dim = embeddings.front().size();
    Embedding mean(dim, 0.0);
    for (const auto& e : embeddings) {
        if (e.size() != dim) throw ShapeError("embedding dimension mismatch within a task");
        for (std::size_t k = 0; k < dim; ++k) mean[k] += e[k];
    }
    const double n = static_cast<double>(embeddings.size());
    for (double& m : mean) m /= n;
    return mean;
}

void PrototypeStore::append(Embedding prototype, std::size_t sample_count) {
    if (!prototypes_.empty() && prototype.size() != dimension())
        throw ShapeError("prototype dimension differs from earlier tasks");
    if (sample_count == 0) throw PreconditionError("a prototype needs at least one sample");
    prototypes_.push_back(std::move(prototype));
    counts_.push_back(sample_count);
}

std::span<const Embedding> PrototypeStore::first(std::size_t count) const {
    if (count > prototypes_.size()) throw PreconditionError("prototype store holds fewer tasks than requested");
    return std::span<const Embedding>(prototypes_.data(), count);
}

}  // namespace longcl
