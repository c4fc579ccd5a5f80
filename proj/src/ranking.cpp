#include "longcl/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "longcl/error.hpp"

namespace longcl {

std::size_t fraction_count(std::size_t n, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
    const double scaled = fraction * static_cast<double>(n);
    const auto count = static_cast<std::size_t>(std::ceil(scaled - 1e-9));
    return std::min(count, n);
}

std::vector<std::size_t> ranked_indices(std::span<const double> scores, std::size_t k, RankOrder order) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, idx.size());
    auto before = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b])
            return order == RankOrder::largest_first ? scores[a] > scores[b] : scores[a] < scores[b];
        return a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
    idx.resize(k);
    return idx;
}

}  // namespace longcl
