#include "longcl/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "longcl/error.hpp"

namespace longcl {

ToyModel ToyModel::create(const ModelShape& shape, std::uint64_t seed, double init_scale) {
    if (shape.features == 0 || shape.classes < 2 || shape.rank == 0)
        throw ConfigError("model needs features >= 1, classes >= 2, rank >= 1");
    const std::size_t F = shape.features, C = shape.classes, r = shape.rank;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> base_dist(0.0, 1.0 / std::sqrt(static_cast<double>(F)));
    std::normal_distribution<double> down_dist(0.0, init_scale / std::sqrt(static_cast<double>(F)));

    std::vector<double> base(C * F);
    for (double& w : base) w = base_dist(rng);
    std::vector<double> adapter(C * r + r * F, 0.0);
    for (std::size_t i = C * r; i < adapter.size(); ++i) adapter[i] = down_dist(rng);

    ToyModel m;
    m.shape_ = shape;
    m.base_ = ParamVector(std::move(base), {{"base.weight", 0, C * F, F}});
    m.adapter_ = ParamVector(std::move(adapter), {{"adapter.up", 0, C * r, r}, {"adapter.down", C * r, F * r, r}});
    return m;
}

void ToyModel::set_adapter(ParamVector adapter) {
    adapter_.require_combinable(adapter);
    adapter_ = std::move(adapter);
}

std::vector<double> ToyModel::logits(std::span<const double> x) const {
    const std::size_t F = shape_.features, C = shape_.classes, r = shape_.rank;
    if (x.size() != F) throw ShapeError("model expects " + std::to_string(F) + " features, got " + std::to_string(x.size()));
    const auto w = base_.values();
    const auto a = adapter_.values();
    const double* up = a.data();
    const double* down = a.data() + C * r;

    std::vector<double> hidden(r, 0.0);
    for (std::size_t k = 0; k < r; ++k) {
        double acc = 0.0;
        for (std::size_t f = 0; f < F; ++f) acc += down[f * r + k] * x[f];
        hidden[k] = acc;
    }
    std::vector<double> out(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t f = 0; f < F; ++f) acc += w[c * F + f] * x[f];
        for (std::size_t k = 0; k < r; ++k) acc += up[c * r + k] * hidden[k];
        out[c] = acc;
    }
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    const double peak = *std::max_element(p.begin(), p.end());
    double total = 0.0;
    for (double& v : p) {
        v = std::exp(v - peak);
        total += v;
    }
    for (double& v : p) v /= total;
    return p;
}

std::vector<double> ToyModel::probabilities(std::span<const double> x) const { return softmax(logits(x)); }

int ToyModel::predict(std::span<const double> x) const {
    const auto z = logits(x);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double ToyModel::loss(std::span<const Record* const> batch) const {
    if (batch.empty()) throw PreconditionError("loss of an empty batch");
    double total = 0.0;
    for (const Record* rec : batch) total += nll_loss(probabilities(rec->x), rec->y);
    return total / static_cast<double>(batch.size());
}

std::vector<double> ToyModel::adapter_gradient(std::span<const Record* const> batch) const {
    if (batch.empty()) throw PreconditionError("gradient of an empty batch");
    const std::size_t F = shape_.features, C = shape_.classes, r = shape_.rank;
    const auto a = adapter_.values();
    const double* up = a.data();
    const double* down = a.data() + C * r;

    std::vector<double> grad(adapter_.size(), 0.0);
    double* g_up = grad.data();
    double* g_down = grad.data() + C * r;
    std::vector<double> hidden(r), back(r);
    for (const Record* rec : batch) {
        const auto& x = rec->x;
        auto p = probabilities(x);
        p[static_cast<std::size_t>(rec->y)] -= 1.0;
        for (std::size_t k = 0; k < r; ++k) {
            double acc = 0.0;
            for (std::size_t f = 0; f < F; ++f) acc += down[f * r + k] * x[f];
            hidden[k] = acc;
        }
        std::fill(back.begin(), back.end(), 0.0);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t k = 0; k < r; ++k) {
                g_up[c * r + k] += p[c] * hidden[k];
                back[k] += up[c * r + k] * p[c];
            }
        for (std::size_t k = 0; k < r; ++k)
            for (std::size_t f = 0; f < F; ++f) g_down[f * r + k] += back[k] * x[f];
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad) g *= scale;
    return grad;
}

double nll_loss(std::span<const double> distribution, int target) {
    if (target < 0 || static_cast<std::size_t>(target) >= distribution.size())
        throw ShapeError("target class outside the distribution");
    double total = 0.0;
    for (double p : distribution) total += p;
    if (std::abs(total - 1.0) > 1e-9) throw PreconditionError("distribution does not sum to 1");
    return -std::log(std::max(distribution[static_cast<std::size_t>(target)], kMinProbability));
}

double nll_loss(std::span<const std::vector<double>> distributions, std::span<const int> targets) {
    if (distributions.size() != targets.size()) throw ShapeError("batch size mismatch");
    if (distributions.empty()) throw PreconditionError("loss of an empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < distributions.size(); ++i) total += nll_loss(distributions[i], targets[i]);
    return total / static_cast<double>(distributions.size());
}

}  // namespace longcl
