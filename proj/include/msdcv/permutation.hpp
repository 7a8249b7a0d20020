#pragma once

#include "msdcv/double_cv.hpp"
#include "msdcv/quantile.hpp"
#include "msdcv/rng.hpp"

#include <map>

namespace msdcv {

// Label-permutation audit: rerunning the full double-CV pipeline on randomly
// reassigned labels should score like coin flipping (recognition near 50%) if
// the procedure is free of optimistic bias; the 2.5-97.5 percentile band of
// the permuted runs is the yardstick the observed result is held against.

/// Uniformly random permutation of the label sequence; features untouched,
/// group sizes preserved by construction.
inline std::vector<Label> permute_labels(std::span<const Label> labels, std::uint64_t seed) {
    require(labels.size() >= 2, "permutation: need at least 2 samples");
    std::vector<Label> shuffled(labels.begin(), labels.end());
    Rng rng(seed);
    rng.shuffle(shuffled);
    return shuffled;
}

inline Dataset permute_labels(const Dataset& d, std::uint64_t seed) {
    return d.with_labels(permute_labels(d.labels(), seed));
}

/// Plate-stratified variant: labels are shuffled within each plate only.
inline std::vector<Label> permute_labels_within_plates(std::span<const Label> labels,
                                                       std::span<const int> plates,
                                                       std::uint64_t seed) {
    require(labels.size() == plates.size(), "permutation: plate list length mismatch");
    std::vector<Label> out(labels.begin(), labels.end());
    std::map<int, std::vector<std::size_t>> by_plate;
    for (std::size_t i = 0; i < plates.size(); ++i) by_plate[plates[i]].push_back(i);
    Rng rng(seed);
    for (auto& [plate, idx] : by_plate) {
        std::vector<Label> slice;
        slice.reserve(idx.size());
        for (std::size_t i : idx) slice.push_back(out[i]);
        rng.shuffle(slice);
        for (std::size_t t = 0; t < idx.size(); ++t) out[idx[t]] = slice[t];
    }
    return out;
}

struct PermutationOptions {
    bool stratify_by_plate = false;
    int threads = 0;
    std::vector<double> priors{0.5, 0.5};
};

struct PermutationSummary {
    struct Row {
        double misclassification = 0.0; // percent, 100 - T
        double auc = 0.0;               // percent
        double brier = 0.0;
    };
    std::vector<Row> replications;
    Row median, q025, q975;
    int r = 0;
    std::uint64_t seed = 0;
};

/// Runs the full double-CV pipeline on R permuted copies of the data and
/// summarizes misclassification rate, AUC and Brier distance. Replication
/// seeds derive from `seed`; results are independent of thread count.
inline PermutationSummary permutation_study(const Dataset& data, const TuningGrid& grid, int r,
                                            std::uint64_t seed,
                                            const PermutationOptions& opts = {}) {
    require(r >= 1, "permutation: need at least one replication");
    const Matrix& x = data.features();
    const auto labels = data.labels();
    std::vector<int> plates;
    if (opts.stratify_by_plate)
        for (const auto& m : data.meta()) plates.push_back(m.plate);

    PermutationSummary summary;
    summary.replications.resize(static_cast<std::size_t>(r));
    summary.r = r;
    summary.seed = seed;

    EngineOptions run_opts;
    run_opts.priors = opts.priors;
    run_opts.threads = 1; // parallelism lives at the replication level

    parallel_for(
        r,
        [&](int rep) {
            const std::uint64_t rep_seed = mix_seed(seed, static_cast<std::uint64_t>(rep));
            const auto perm = opts.stratify_by_plate
                                  ? permute_labels_within_plates(labels, plates, rep_seed)
                                  : permute_labels(labels, rep_seed);
            const auto res = double_cv(x, perm, grid, run_opts);
            auto& row = summary.replications[static_cast<std::size_t>(rep)];
            row.misclassification = 100.0 - res.report.t;
            row.auc = res.report.auc_percent;
            row.brier = res.report.brier_distance;
        },
        opts.threads);

    const auto summarize = [&](auto pick) {
        std::vector<double> v;
        v.reserve(summary.replications.size());
        for (const auto& row : summary.replications) v.push_back(pick(row));
        std::sort(v.begin(), v.end());
        return std::array<double, 3>{quantile_sorted(v, 0.5), quantile_sorted(v, 0.025),
                                     quantile_sorted(v, 0.975)};
    };
    const auto miss = summarize([](const auto& r_) { return r_.misclassification; });
    const auto auc_ = summarize([](const auto& r_) { return r_.auc; });
    const auto bri = summarize([](const auto& r_) { return r_.brier; });
    summary.median = {miss[0], auc_[0], bri[0]};
    summary.q025 = {miss[1], auc_[1], bri[1]};
    summary.q975 = {miss[2], auc_[2], bri[2]};
    return summary;
}

} // namespace msdcv
