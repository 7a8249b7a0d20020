#pragma once

#include "msdcv/bin_plan.hpp"
#include "msdcv/dataset.hpp"
#include "msdcv/quantile.hpp"

namespace msdcv {

// Strictly within-sample preprocessing: every function here sees one sample's
// own numbers and nothing else. That isolation is what keeps the downstream
// cross-validation honest, so no step may read labels or other samples.

/// Per-bin arithmetic mean across a sample's spot spectra.
inline std::vector<double> average_spots(const std::vector<RawSpectrum>& spots) {
    require(!spots.empty(), "preprocess: sample has no spots");
    const std::size_t p = spots.front().size();
    for (const auto& s : spots)
        require(s.size() == p, "preprocess: spot grid mismatch within sample");
    std::vector<double> mean(p, 0.0);
    for (const auto& s : spots)
        for (std::size_t b = 0; b < p; ++b) mean[b] += s[b];
    const double inv = 1.0 / static_cast<double>(spots.size());
    for (double& v : mean) v *= inv;
    return mean;
}

/// Builds the aggregation plan for a raw grid: the target width at m/z m is
/// w(m) = w_min + (w_max - w_min)(m - m_lo)/(m_hi - m_lo), and raw bins are
/// absorbed left to right until the span first reaches the target. The target
/// never drops below the previous aggregated width, which keeps widths
/// non-decreasing on irregular grids; the trailing remainder joins the last
/// aggregated bin.
inline BinPlan build_bin_plan(std::span<const double> raw_edges, const PreprocessConfig& cfg) {
    cfg.validate();
    require(raw_edges.size() >= 2, "preprocess: need at least 2 raw edges");
    const int n_raw = static_cast<int>(raw_edges.size());
    for (int b = 1; b < n_raw; ++b)
        require(raw_edges[static_cast<std::size_t>(b)] > raw_edges[static_cast<std::size_t>(b - 1)],
                "preprocess: raw edges not strictly increasing");

    const double m_lo = raw_edges.front();
    const double m_hi = raw_edges.back();
    // upper edge of the final raw bin, extrapolated from the last width
    const double top = raw_edges[static_cast<std::size_t>(n_raw - 1)] +
                       (raw_edges[static_cast<std::size_t>(n_raw - 1)] -
                        raw_edges[static_cast<std::size_t>(n_raw - 2)]);
    const auto upper_of = [&](int raw) {
        return raw + 1 < n_raw ? raw_edges[static_cast<std::size_t>(raw + 1)] : top;
    };
    const auto ramp = [&](double m) {
        return m_hi > m_lo ? cfg.w_min + (cfg.w_max - cfg.w_min) * (m - m_lo) / (m_hi - m_lo)
                           : cfg.w_min;
    };

    BinPlan plan;
    plan.raw_count = n_raw;
    plan.raw_first = raw_edges.front();
    plan.raw_last = raw_edges.back();

    double prev_width = 0.0;
    int raw = 0;
    while (raw < n_raw) {
        const double lower = raw_edges[static_cast<std::size_t>(raw)];
        const double target = std::max(ramp(lower), prev_width);
        int last = raw;
        while (upper_of(last) - lower < target * (1.0 - 1e-12) && last + 1 < n_raw) ++last;
        if (upper_of(last) - lower < target * (1.0 - 1e-12) && !plan.bins.empty()) {
            // remainder too narrow to stand alone
            plan.bins.back().raw_to = last;
            plan.bins.back().upper = upper_of(last);
            break;
        }
        plan.bins.push_back(BinPlan::Bin{lower, upper_of(last), raw, last});
        prev_width = upper_of(last) - lower;
        raw = last + 1;
    }
    return plan;
}

/// Sums raw intensities into aggregated bins; total intensity is conserved.
inline std::vector<double> aggregate(std::span<const double> v, const BinPlan& plan) {
    require(static_cast<int>(v.size()) == plan.raw_count, "preprocess: plan/grid mismatch");
    std::vector<double> out;
    out.reserve(plan.bins.size());
    for (const auto& bin : plan.bins) {
        double sum = 0.0;
        for (int b = bin.raw_from; b <= bin.raw_to; ++b) sum += v[static_cast<std::size_t>(b)];
        out.push_back(sum);
    }
    return out;
}

namespace detail {

/// Solves (diag(w) + lambda D2'D2) b = diag(w) v for the smooth baseline b,
/// with D2 the second-difference operator. The system is pentadiagonal and
/// positive definite; banded Cholesky, O(p) per solve.
inline std::vector<double> smooth_baseline_solve(std::span<const double> v,
                                                 std::span<const double> w, double lambda) {
    const int p = static_cast<int>(v.size());
    // symmetric band storage: d0 = diagonal, d1/d2 = first/second superdiagonal
    std::vector<double> d0(static_cast<std::size_t>(p), 0.0);
    std::vector<double> d1(static_cast<std::size_t>(p), 0.0);
    std::vector<double> d2(static_cast<std::size_t>(p), 0.0);
    for (int i = 0; i < p; ++i) d0[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)];
    for (int t = 0; t + 2 < p; ++t) {
        // row t of D2 has entries (1, -2, 1) at columns t, t+1, t+2
        d0[static_cast<std::size_t>(t)] += lambda;
        d0[static_cast<std::size_t>(t + 1)] += 4.0 * lambda;
        d0[static_cast<std::size_t>(t + 2)] += lambda;
        d1[static_cast<std::size_t>(t)] += -2.0 * lambda;
        d1[static_cast<std::size_t>(t + 1)] += -2.0 * lambda;
        d2[static_cast<std::size_t>(t)] += lambda;
    }

    // Cholesky A = L L^T with the same bandwidth
    std::vector<double> l0(static_cast<std::size_t>(p), 0.0);
    std::vector<double> l1(static_cast<std::size_t>(p), 0.0);
    std::vector<double> l2(static_cast<std::size_t>(p), 0.0);
    for (int i = 0; i < p; ++i) {
        double diag = d0[static_cast<std::size_t>(i)];
        if (i >= 1) diag -= l1[static_cast<std::size_t>(i - 1)] * l1[static_cast<std::size_t>(i - 1)];
        if (i >= 2) diag -= l2[static_cast<std::size_t>(i - 2)] * l2[static_cast<std::size_t>(i - 2)];
        require(diag > 0.0, "preprocess: baseline system not positive definite");
        const double li = std::sqrt(diag);
        l0[static_cast<std::size_t>(i)] = li;
        if (i + 1 < p) {
            double sub = d1[static_cast<std::size_t>(i)];
            if (i >= 1)
                sub -= l1[static_cast<std::size_t>(i - 1)] * l2[static_cast<std::size_t>(i - 1)];
            l1[static_cast<std::size_t>(i)] = sub / li;
        }
        if (i + 2 < p) l2[static_cast<std::size_t>(i)] = d2[static_cast<std::size_t>(i)] / li;
    }

    std::vector<double> y(static_cast<std::size_t>(p), 0.0);
    for (int i = 0; i < p; ++i) {
        double rhs = w[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
        if (i >= 1) rhs -= l1[static_cast<std::size_t>(i - 1)] * y[static_cast<std::size_t>(i - 1)];
        if (i >= 2) rhs -= l2[static_cast<std::size_t>(i - 2)] * y[static_cast<std::size_t>(i - 2)];
        y[static_cast<std::size_t>(i)] = rhs / l0[static_cast<std::size_t>(i)];
    }
    std::vector<double> b(static_cast<std::size_t>(p), 0.0);
    for (int i = p - 1; i >= 0; --i) {
        double rhs = y[static_cast<std::size_t>(i)];
        if (i + 1 < p) rhs -= l1[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i + 1)];
        if (i + 2 < p) rhs -= l2[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i + 2)];
        b[static_cast<std::size_t>(i)] = rhs / l0[static_cast<std::size_t>(i)];
    }
    return b;
}

} // namespace detail

/// Asymmetric least squares baseline removal: the baseline b minimizes
/// sum_j w_j (v_j - b_j)^2 + lambda sum (d2 b)^2, weights iterated as
/// w_j = p_a if v_j > b_j else 1 - p_a, starting from uniform weights.
/// Returns the corrected spectrum v - b.
inline std::vector<double> baseline_asls(std::span<const double> v, const PreprocessConfig& cfg) {
    cfg.validate();
    require(v.size() >= 3, "preprocess: baseline needs at least 3 bins");
    require(all_finite(v), "preprocess: non-finite input to baseline");
    std::vector<double> w(v.size(), 1.0);
    std::vector<double> b;
    for (int it = 0; it < cfg.baseline_iterations; ++it) {
        b = detail::smooth_baseline_solve(v, w, cfg.baseline_lambda);
        for (std::size_t j = 0; j < v.size(); ++j)
            w[j] = v[j] > b[j] ? cfg.baseline_asymmetry : 1.0 - cfg.baseline_asymmetry;
    }
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j] - b[j];
    return out;
}

/// Centers by the median and scales by the interquartile range.
inline std::vector<double> robust_standardize(std::span<const double> v) {
    require(!v.empty(), "preprocess: empty spectrum");
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    const double med = quantile_sorted(sorted, 0.5);
    const double scale = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    require(scale > 0.0, "preprocess: zero interquartile range (flat spectrum)");
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = (v[j] - med) / scale;
    return out;
}

/// Elementwise log(x + alpha) - beta (natural log).
inline std::vector<double> log_stabilize(std::span<const double> v, double alpha, double beta) {
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        require(v[j] + alpha > 0.0, "preprocess: log argument not positive");
        out[j] = std::log(v[j] + alpha) - beta;
    }
    return out;
}

/// Full within-sample chain: spot averaging, bin aggregation, baseline
/// removal, median/IQR standardization, log transform.
inline std::vector<double> preprocess_sample(const std::vector<RawSpectrum>& spots,
                                             const BinPlan& plan, const PreprocessConfig& cfg) {
    for (const auto& s : spots)
        for (double x : s)
            require(x >= 0.0, "preprocess: negative raw intensity");
    const auto averaged = average_spots(spots);
    const auto aggregated = aggregate(averaged, plan);
    const auto corrected = baseline_asls(aggregated, cfg);
    const auto standardized = robust_standardize(corrected);
    return log_stabilize(standardized, cfg.log_alpha, cfg.log_beta);
}

/// Applies the chain to every sample of a spot-level dataset.
inline Dataset preprocess_dataset(const Dataset& d, const PreprocessConfig& cfg) {
    require(d.has_spots(), "preprocess: dataset is not spot-level");
    const auto plan = build_bin_plan(d.mz(), cfg);
    const int p = static_cast<int>(plan.size());
    Matrix x(d.n(), p);
    for (int i = 0; i < d.n(); ++i) {
        const auto row = preprocess_sample(d.spots(i), plan, cfg);
        for (int b = 0; b < p; ++b) x(i, b) = row[static_cast<std::size_t>(b)];
    }
    std::vector<SampleMeta> meta = d.meta();
    return Dataset::from_features(std::move(x), plan.lower_edges(), std::move(meta), d.week(),
                                  plan);
}

} // namespace msdcv
