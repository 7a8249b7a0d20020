#pragma once

#include "msdcv/common.hpp"

#include <algorithm>

namespace msdcv {

// One quantile convention project-wide: for sorted y_1..y_n and level q,
// h = (n-1)q, result = y_{floor(h)+1} + (h - floor(h)) (y_{floor(h)+2} - y_{floor(h)+1}).

/// Quantile of pre-sorted values (ascending).
inline double quantile_sorted(std::span<const double> sorted, double q) {
    require(!sorted.empty(), "quantile: empty input");
    require(q >= 0.0 && q <= 1.0, "quantile: level outside [0,1]");
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = static_cast<double>(n - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = h - std::floor(h);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::span<const double> values, double q) {
    std::vector<double> y(values.begin(), values.end());
    std::sort(y.begin(), y.end());
    return quantile_sorted(y, q);
}

inline double median(std::span<const double> values) { return quantile(values, 0.5); }

/// Interquartile range q0.75 - q0.25 (single sort).
inline double iqr(std::span<const double> values) {
    std::vector<double> y(values.begin(), values.end());
    std::sort(y.begin(), y.end());
    return quantile_sorted(y, 0.75) - quantile_sorted(y, 0.25);
}

} // namespace msdcv
