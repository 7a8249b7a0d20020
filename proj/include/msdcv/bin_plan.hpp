#pragma once

#include "msdcv/common.hpp"

namespace msdcv {

/// Settings of the within-sample preprocessing chain.
struct PreprocessConfig {
    // aggregated bin width ramp (Dalton)
    double w_min = 1.0;
    double w_max = 3.0;
    // asymmetric least squares baseline
    double baseline_lambda = 1e5;
    double baseline_asymmetry = 0.001;
    int baseline_iterations = 10;
    // variance-stabilizing log step: log(x + alpha) - beta
    double log_alpha = 100.0;
    double log_beta = 4.0;

    void validate() const {
        require(w_min > 0.0 && w_min <= w_max, "preprocess: need 0 < w_min <= w_max");
        require(baseline_lambda > 0.0, "preprocess: baseline smoothness must be positive");
        require(baseline_asymmetry > 0.0 && baseline_asymmetry < 1.0,
                "preprocess: baseline asymmetry must lie in (0,1)");
        require(baseline_iterations >= 1, "preprocess: need at least one baseline iteration");
    }
};

/// Mapping from the raw instrument grid to aggregated analysis bins.
/// Aggregated bins are contiguous, cover the raw grid, and have
/// non-decreasing widths along m/z.
struct BinPlan {
    struct Bin {
        double lower = 0.0;
        double upper = 0.0;
        int raw_from = 0; // inclusive raw-bin index range absorbed by this bin
        int raw_to = 0;
    };

    std::vector<Bin> bins;
    // raw-grid fingerprint, used to reject plan/grid mismatches
    int raw_count = 0;
    double raw_first = 0.0;
    double raw_last = 0.0;

    std::size_t size() const { return bins.size(); }

    std::vector<double> lower_edges() const {
        std::vector<double> out;
        out.reserve(bins.size());
        for (const auto& b : bins) out.push_back(b.lower);
        return out;
    }

    bool matches_grid(std::span<const double> raw_edges) const {
        return static_cast<int>(raw_edges.size()) == raw_count &&
               !raw_edges.empty() && raw_edges.front() == raw_first &&
               raw_edges.back() == raw_last;
    }
};

} // namespace msdcv
