#pragma once

#include "msdcv/common.hpp"

#include <algorithm>
#include <numeric>

namespace msdcv {

// Validated performance measures. Group 1 = cases drives sensitivity and the
// AUC orientation; T/Se/Sp and AUC are reported in percent to line up with
// the usual result tables, the Brier distance as a proportion.

struct Recognition {
    double t = 0.0;  // (se + sp) / 2
    double se = 0.0; // percent of cases allocated to cases
    double sp = 0.0; // percent of controls allocated to controls
};

inline Recognition recognition(std::span<const Label> allocations,
                               std::span<const Label> labels) {
    require(allocations.size() == labels.size(), "metrics: allocation/label length mismatch");
    require(!labels.empty(), "metrics: empty input");
    int n_case = 0, n_ctrl = 0, hit_case = 0, hit_ctrl = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] == 1 || labels[i] == 2, "metrics: recognition needs two groups");
        if (labels[i] == 1) {
            ++n_case;
            if (allocations[i] == 1) ++hit_case;
        } else {
            ++n_ctrl;
            if (allocations[i] == 2) ++hit_ctrl;
        }
    }
    require(n_case > 0 && n_ctrl > 0, "metrics: a group is empty");
    Recognition r;
    r.se = 100.0 * static_cast<double>(hit_case) / static_cast<double>(n_case);
    r.sp = 100.0 * static_cast<double>(hit_ctrl) / static_cast<double>(n_ctrl);
    r.t = (r.se + r.sp) / 2.0;
    return r;
}

/// Brier distance B = sqrt( (1/n) sum_i [1 - p(c(i)|x_i)]^2 ).
inline double brier(std::span<const double> p_true) {
    require(!p_true.empty(), "metrics: empty input");
    double sum = 0.0;
    for (double p : p_true) {
        require(p >= 0.0 && p <= 1.0, "metrics: probability outside [0,1]");
        sum += (1.0 - p) * (1.0 - p);
    }
    return std::sqrt(sum / static_cast<double>(p_true.size()));
}

/// Empirical AUC of case scores over control scores, ties counted half:
/// (1/(n1 n2)) sum_{i in cases} sum_{j in controls} [I(s_i > s_j) + 0.5 I(s_i = s_j)].
/// Midrank implementation, O(n log n); agrees exactly with pair enumeration.
/// Returns a proportion in [0,1].
inline double auc(std::span<const double> score_group1, std::span<const Label> labels) {
    require(score_group1.size() == labels.size(), "metrics: score/label length mismatch");
    const std::size_t n = labels.size();
    require(n > 0, "metrics: empty input");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return score_group1[a] < score_group1[b];
    });
    std::vector<double> midrank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && score_group1[order[j + 1]] == score_group1[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j + 1); // 1-based midrank
        for (std::size_t t = i; t <= j; ++t) midrank[order[t]] = rank;
        i = j + 1;
    }
    double rank_sum_cases = 0.0;
    long n1 = 0, n2 = 0;
    for (std::size_t s = 0; s < n; ++s) {
        require(labels[s] == 1 || labels[s] == 2, "metrics: auc needs two groups");
        if (labels[s] == 1) {
            ++n1;
            rank_sum_cases += midrank[s];
        } else {
            ++n2;
        }
    }
    require(n1 > 0 && n2 > 0, "metrics: a group is empty");
    const double wins = rank_sum_cases - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
    return wins / (static_cast<double>(n1) * static_cast<double>(n2));
}

/// Per-sample validated results plus the summary row (T, Se, Sp, B, AUC).
struct ValidationReport {
    std::vector<std::string> sample_ids;
    std::vector<Label> labels;
    std::vector<double> p_true;       // validated p(c(i)|x_i)
    std::vector<double> p_group1;     // validated p(1|x_i)
    std::vector<Label> allocations;
    std::vector<double> chosen_param; // per-sample inner choice (k or gamma)

    double t = 0.0, se = 0.0, sp = 0.0; // percent
    double brier_distance = 0.0;        // proportion
    double auc_percent = 0.0;           // percent
    int n = 0, n_cases = 0, n_controls = 0;

    void finalize() {
        n = static_cast<int>(labels.size());
        const Recognition r = recognition(allocations, labels);
        t = r.t;
        se = r.se;
        sp = r.sp;
        brier_distance = brier(p_true);
        auc_percent = 100.0 * auc(p_group1, labels);
        n_cases = 0;
        n_controls = 0;
        for (Label g : labels) (g == 1 ? n_cases : n_controls)++;
    }
};

} // namespace msdcv
