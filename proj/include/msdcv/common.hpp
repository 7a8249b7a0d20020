#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msdcv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Group labels are 1-based project-wide: group 1 = cases, group 2 = controls.
using Label = int;

/// Contract violation in an operation's inputs (caller bug or bad file).
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Data-dependent failure (degenerate dataset, singular fit, ...).
class ComputeError : public std::runtime_error {
public:
    explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidInput(msg);
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Matrix& m) {
    return m.allFinite();
}

/// Number of distinct 1-based groups; validates labels are 1..G with no gaps.
inline int group_count(std::span<const Label> labels, const std::string& ctx) {
    require(!labels.empty(), ctx + ": no samples");
    int g_max = 0;
    for (Label g : labels) {
        require(g >= 1, ctx + ": group labels must be positive integers");
        g_max = std::max(g_max, g);
    }
    std::vector<int> seen(static_cast<std::size_t>(g_max), 0);
    for (Label g : labels) seen[static_cast<std::size_t>(g - 1)] = 1;
    for (int g = 0; g < g_max; ++g)
        require(seen[static_cast<std::size_t>(g)] == 1,
                ctx + ": group " + std::to_string(g + 1) + " has no samples");
    return g_max;
}

inline std::vector<int> per_group_counts(std::span<const Label> labels, int n_groups) {
    std::vector<int> counts(static_cast<std::size_t>(n_groups), 0);
    for (Label g : labels) ++counts[static_cast<std::size_t>(g - 1)];
    return counts;
}

} // namespace msdcv
