#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace longcl {

// ceil(fraction * n), with fraction in (0, 1]. A 1e-9 slack absorbs products
// such as 0.1 * 30 that land just above an integer in binary floating point.
std::size_t fraction_count(std::size_t n, double fraction);

enum class RankOrder { largest_first, smallest_first };

// Indices of the `k` extreme scores, ranked; equal scores rank the lower index
// first. k is clamped to scores.size().
std::vector<std::size_t> ranked_indices(std::span<const double> scores, std::size_t k, RankOrder order);

}  // namespace longcl
