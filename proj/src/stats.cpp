#include "diffdac/stats.hpp"

#include "diffdac/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace diffdac {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw ArgumentError("mean of an empty sample");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double quantile(std::span<const double> xs, double p) {
    if (xs.empty()) throw ArgumentError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("quantile level outside [0, 1]");
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Quartiles quartiles(std::span<const double> xs) {
    return {quantile(xs, 0.25), quantile(xs, 0.5), quantile(xs, 0.75)};
}

} // namespace diffdac
