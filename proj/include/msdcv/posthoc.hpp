#pragma once

#include "msdcv/dataset.hpp"
#include "msdcv/lda.hpp"
#include "msdcv/quantile.hpp"

namespace msdcv {

// Post-hoc exploration of where the discriminating information sits. Nothing
// here feeds back into the validated pipeline; it runs after the validatory
// calculation, on the full data.

/// Variance-seeded cluster selection output. Indices are 0-based internally;
/// exports are 1-based.
struct BinSelection {
    std::vector<int> indices; // sorted, unique
    struct Cluster {
        int seed = 0;
        int from = 0;
        int to = 0; // inclusive, contiguous run as discovered
    };
    std::vector<Cluster> clusters;
    double v_ref = 0.0;            // 95th percentile of all p bin variances
    std::vector<double> variances; // per bin, denominator n-1
};

namespace detail {

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sab / std::sqrt(saa * sbb);
}

} // namespace detail

/// Seeds at the highest-variance bin and grows the cluster symmetrically
/// while both neighbor columns correlate above 0.9 with the running cluster
/// mean; reseeds at the next variance maximum while it exceeds the 95th
/// variance percentile. Out-of-range or zero-variance neighbors fail the
/// test, ending growth. Labels are never read.
inline BinSelection reduce_bins(const Matrix& x) {
    const int n = static_cast<int>(x.rows());
    const int p = static_cast<int>(x.cols());
    require(n >= 3, "posthoc: need at least 3 samples");
    require(p >= 1, "posthoc: need at least 1 bin");

    BinSelection sel;
    sel.variances.resize(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
        const double mean = x.col(j).mean();
        sel.variances[static_cast<std::size_t>(j)] =
            (x.col(j).array() - mean).square().sum() / static_cast<double>(n - 1);
    }
    sel.v_ref = quantile(sel.variances, 0.95);

    std::vector<bool> available(static_cast<std::size_t>(p), true);
    std::vector<bool> selected(static_cast<std::size_t>(p), false);

    const auto arg_max_available = [&]() {
        int arg = -1;
        double best = -1.0;
        for (int j = 0; j < p; ++j)
            if (available[static_cast<std::size_t>(j)] &&
                sel.variances[static_cast<std::size_t>(j)] > best) {
                best = sel.variances[static_cast<std::size_t>(j)];
                arg = j;
            }
        return arg;
    };

    int seed = arg_max_available(); // first seed is unconditional
    while (seed >= 0) {
        available[static_cast<std::size_t>(seed)] = false;
        selected[static_cast<std::size_t>(seed)] = true;

        // running mean over the current cluster's bins
        Vector cluster_sum = x.col(seed);
        int cluster_bins = 1;
        std::vector<double> mean(static_cast<std::size_t>(n));
        int k = 1;
        for (;; ++k) {
            const int lo = seed - k;
            const int hi = seed + k;
            if (lo < 0 || hi >= p) break;
            for (int i = 0; i < n; ++i)
                mean[static_cast<std::size_t>(i)] = cluster_sum(i) / static_cast<double>(cluster_bins);
            std::vector<double> col_lo(static_cast<std::size_t>(n)), col_hi(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                col_lo[static_cast<std::size_t>(i)] = x(i, lo);
                col_hi[static_cast<std::size_t>(i)] = x(i, hi);
            }
            const double rho_lower = detail::pearson(mean, col_lo);
            const double rho_upper = detail::pearson(mean, col_hi);
            if (!(rho_lower > 0.9) || !(rho_upper > 0.9)) break;
            selected[static_cast<std::size_t>(lo)] = true;
            selected[static_cast<std::size_t>(hi)] = true;
            available[static_cast<std::size_t>(lo)] = false;
            available[static_cast<std::size_t>(hi)] = false;
            // both neighbors join, then the mean updates once
            cluster_sum += x.col(lo) + x.col(hi);
            cluster_bins += 2;
        }
        const int grown = k - 1;
        sel.clusters.push_back(BinSelection::Cluster{seed, seed - grown, seed + grown});

        const int next = arg_max_available();
        if (next < 0 || !(sel.variances[static_cast<std::size_t>(next)] > sel.v_ref)) break;
        seed = next;
    }

    for (int j = 0; j < p; ++j)
        if (selected[static_cast<std::size_t>(j)]) sel.indices.push_back(j);
    return sel;
}

inline BinSelection reduce_bins(const Dataset& d) { return reduce_bins(d.features()); }

/// Discriminant-correlation exploration from the full-data Euclidean pca-k
/// fit: beta, the per-bin correlations rho_j = s_xj beta_j / s_g, the first
/// two component loadings and per-sample scores, and the group mean spectra.
struct ExplorationOutput {
    std::vector<int> bins;      // 0-based column indices the fit covers
    std::vector<double> mz;     // lower edges for those bins
    Vector beta;
    std::vector<double> rho;
    Matrix component_loadings;  // |bins| x 2
    Matrix component_scores;    // n x 2, centered at the grand mean
    Matrix group_means;         // 2 x |bins|
    double max_abs_rho = 0.0;   // the formula is not clamped; callers may flag
};

inline ExplorationOutput correlation_map(const Dataset& d, int k = 2,
                                         const BinSelection* restrict_to = nullptr) {
    require(d.groups() == 2, "posthoc: exploration needs exactly 2 groups");
    Dataset reduced;
    const Dataset* data = &d;
    ExplorationOutput out;
    if (restrict_to != nullptr) {
        out.bins = restrict_to->indices;
        reduced = d.subset_bins(out.bins);
        data = &reduced;
    } else {
        for (int j = 0; j < d.p(); ++j) out.bins.push_back(j);
    }
    out.mz.reserve(out.bins.size());
    for (int j : out.bins) out.mz.push_back(d.mz()[static_cast<std::size_t>(j)]);

    const Matrix& x = data->features();
    const auto labels = data->labels();
    const int n = data->n();

    const EigenModel model = pooled_eigen(x, labels);
    require(k >= 1 && k <= model.rank, "posthoc: component count k outside 1..rank");
    require(model.rank >= 2, "posthoc: need at least 2 components to export");
    Classifier clf(model, RegularizerSpec{RegKind::PcaKEuclid, k, 0.0});
    out.beta = clf.discriminant_coefficients();
    out.group_means = clf.model().group_means;

    // label SD with the same n-1 denominator as the bin variances
    double label_mean = 0.0;
    for (Label g : labels) label_mean += static_cast<double>(g);
    label_mean /= static_cast<double>(n);
    double label_var = 0.0;
    for (Label g : labels) {
        const double dg = static_cast<double>(g) - label_mean;
        label_var += dg * dg;
    }
    label_var /= static_cast<double>(n - 1);
    const double s_g = std::sqrt(label_var);
    require(s_g > 0.0, "posthoc: constant labels");

    out.rho.resize(out.bins.size());
    for (std::size_t j = 0; j < out.bins.size(); ++j) {
        const double mean = x.col(static_cast<Eigen::Index>(j)).mean();
        const double var =
            (x.col(static_cast<Eigen::Index>(j)).array() - mean).square().sum() /
            static_cast<double>(n - 1);
        out.rho[j] = std::sqrt(var) * out.beta(static_cast<Eigen::Index>(j)) / s_g;
        out.max_abs_rho = std::max(out.max_abs_rho, std::abs(out.rho[j]));
    }

    out.component_loadings = clf.model().loadings.leftCols(2);
    const Vector grand = x.colwise().mean().transpose();
    out.component_scores.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        const Vector diff = x.row(i).transpose() - grand;
        out.component_scores(i, 0) = out.component_loadings.col(0).dot(diff);
        out.component_scores(i, 1) = out.component_loadings.col(1).dot(diff);
    }
    return out;
}

/// Per-sample intensity difference between two bins (0-based), for dotplots.
struct ContrastRow {
    std::string sample_id;
    Label group = 0;
    double value = 0.0;
};

inline std::vector<ContrastRow> contrast(const Dataset& d, int bin_a, int bin_b) {
    require(bin_a >= 0 && bin_a < d.p() && bin_b >= 0 && bin_b < d.p(),
            "posthoc: contrast bin index out of range");
    std::vector<ContrastRow> rows;
    rows.reserve(static_cast<std::size_t>(d.n()));
    const Matrix& x = d.features();
    for (int i = 0; i < d.n(); ++i)
        rows.push_back(ContrastRow{d.meta(i).id, d.meta(i).group, x(i, bin_a) - x(i, bin_b)});
    return rows;
}

} // namespace msdcv
