#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "longcl/param_core.hpp"
#include "longcl/streams.hpp"

namespace longcl {

struct ModelShape {
    std::size_t features = 0;
    std::size_t classes = 0;
    std::size_t rank = 4;

    friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

// Linear classifier with a frozen base matrix and a trainable low-rank
// adapter: logits = (W_base + up * down) x.
//   adapter segment "adapter.up":   classes x rank, row-major
//   adapter segment "adapter.down": features x rank, row-major (row f holds
//                                   the rank components reading feature f)
class ToyModel {
public:
    // Base entries ~ N(0, 1/F); down ~ N(0, init_scale^2 / F); up = 0.
    static ToyModel create(const ModelShape& shape, std::uint64_t seed, double init_scale = 1.0);

    const ModelShape& shape() const noexcept { return shape_; }
    const ParamVector& base() const noexcept { return base_; }
    const ParamVector& adapter() const noexcept { return adapter_; }
    void set_adapter(ParamVector adapter);

    std::vector<double> logits(std::span<const double> x) const;
    std::vector<double> probabilities(std::span<const double> x) const;
    int predict(std::span<const double> x) const;

    // Mean NLL over the batch.
    double loss(std::span<const Record* const> batch) const;
    // Gradient of loss() with respect to the adapter, laid out like adapter().
    std::vector<double> adapter_gradient(std::span<const Record* const> batch) const;

    friend bool operator==(const ToyModel&, const ToyModel&) = default;

private:
    ModelShape shape_;
    ParamVector base_;
    ParamVector adapter_;
};

std::vector<double> softmax(std::span<const double> logits);

inline constexpr double kMinProbability = 1e-12;

// -log p(target), with p clipped at kMinProbability.
double nll_loss(std::span<const double> distribution, int target);
double nll_loss(std::span<const std::vector<double>> distributions, std::span<const int> targets);

}  // namespace longcl
