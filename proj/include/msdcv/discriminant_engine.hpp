#pragma once

#include "msdcv/eigen_sym.hpp"
#include "msdcv/lda.hpp"

#include <memory>

namespace msdcv {

// Dual-form fitting machinery for the cross-validation loops. Every training
// subset is fit through the n x n inner-product (Gram) form, so the cost per
// fit is independent of the bin count once the Gram matrix exists, and a
// left-out sample is classified from Gram entries alone. The same score-space
// algebra evaluates arbitrary new vectors, which keeps every code path on one
// set of formulas.

/// K = A B^T with one shared kernel, so gram(X) and cross terms built from
/// identical inputs agree bitwise.
inline Matrix cross_gram(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "engine: feature dimension mismatch");
    return a * b.transpose();
}

inline Matrix gram(const Matrix& x) { return cross_gram(x, x); }

/// Pooled within-group eigenstructure of one training subset, in dual
/// coordinates, plus the dot-product tables needed to project queries.
struct SubsetFit {
    std::vector<int> members;      // dataset row indices, ascending
    std::vector<int> member_group; // 0-based group per member
    std::vector<int> group_size;
    double df = 0.0;
    int rank = 0;
    int dim = 0; // bin count of the underlying features
    std::vector<double> eigenvalues; // descending eigenvalues of pooled S
    Matrix u;                        // n_t x rank, eigenvectors of the Gram form
    Matrix mean_dot;                 // G x n_t: xbar_g . x_member_i
    Matrix mean_cross;               // G x G: xbar_g . xbar_h

    int size() const { return static_cast<int>(members.size()); }
    int groups() const { return static_cast<int>(group_size.size()); }
};

/// Fits the pooled within-group eigenstructure of `members` from the Gram
/// matrix of the full dataset. Labels are 1-based over the full dataset;
/// `dim` is the feature count behind the Gram matrix.
inline SubsetFit fit_subset(const Matrix& k_full, std::span<const Label> labels,
                            std::vector<int> members, int dim) {
    SubsetFit fit;
    fit.members = std::move(members);
    fit.dim = dim;
    const int n_t = fit.size();
    require(n_t >= 2, "engine: training subset too small");

    int g_count = 0;
    fit.member_group.resize(static_cast<std::size_t>(n_t));
    for (int i = 0; i < n_t; ++i) {
        const Label g = labels[static_cast<std::size_t>(fit.members[static_cast<std::size_t>(i)])];
        fit.member_group[static_cast<std::size_t>(i)] = g - 1;
        g_count = std::max(g_count, g);
    }
    fit.group_size.assign(static_cast<std::size_t>(g_count), 0);
    for (int g : fit.member_group) ++fit.group_size[static_cast<std::size_t>(g)];
    for (int g = 0; g < g_count; ++g)
        if (fit.group_size[static_cast<std::size_t>(g)] == 0)
            throw ComputeError("engine: a group is empty in the training subset");
    fit.df = static_cast<double>(n_t - g_count);
    if (fit.df < 1.0) throw ComputeError("engine: pooled degrees of freedom below 1");

    // xbar_g . x_i for all members
    fit.mean_dot = Matrix::Zero(g_count, n_t);
    for (int i = 0; i < n_t; ++i) {
        const int row = fit.members[static_cast<std::size_t>(i)];
        for (int m = 0; m < n_t; ++m)
            fit.mean_dot(fit.member_group[static_cast<std::size_t>(m)], i) +=
                k_full(fit.members[static_cast<std::size_t>(m)], row);
    }
    for (int g = 0; g < g_count; ++g)
        fit.mean_dot.row(g) /= static_cast<double>(fit.group_size[static_cast<std::size_t>(g)]);

    fit.mean_cross = Matrix::Zero(g_count, g_count);
    for (int m = 0; m < n_t; ++m)
        for (int g = 0; g < g_count; ++g)
            fit.mean_cross(fit.member_group[static_cast<std::size_t>(m)], g) += fit.mean_dot(g, m);
    for (int g = 0; g < g_count; ++g)
        fit.mean_cross.row(g) /= static_cast<double>(fit.group_size[static_cast<std::size_t>(g)]);

    // centered Gram form M_ij = c_i . c_j / df
    Matrix m(n_t, n_t);
    for (int i = 0; i < n_t; ++i) {
        const int gi = fit.member_group[static_cast<std::size_t>(i)];
        for (int j = i; j < n_t; ++j) {
            const int gj = fit.member_group[static_cast<std::size_t>(j)];
            const double cij = k_full(fit.members[static_cast<std::size_t>(i)],
                                      fit.members[static_cast<std::size_t>(j)]) -
                               fit.mean_dot(gj, i) - fit.mean_dot(gi, j) + fit.mean_cross(gi, gj);
            m(i, j) = cij / fit.df;
            m(j, i) = m(i, j);
        }
    }

    const SymEigen eig = sym_eigen(m);
    const double lam1 = eig.values.empty() ? 0.0 : eig.values[0];
    if (!(lam1 > 0.0)) throw ComputeError("engine: within-group scatter has rank 0");
    const int rank_cap = n_t - g_count;
    int r = 0;
    while (r < rank_cap && eig.values[static_cast<std::size_t>(r)] > kRankEpsilon * lam1) ++r;
    if (r < 1) throw ComputeError("engine: within-group scatter has rank 0");
    fit.rank = r;
    fit.eigenvalues.assign(eig.values.begin(), eig.values.begin() + r);
    fit.u = eig.vectors.leftCols(r);
    return fit;
}

/// Projection of one query onto a subset fit: per-group component scores with
/// prefix sums, and the squared distance of the query to each group mean.
struct QueryScores {
    Matrix z;          // G x rank
    Matrix cum_mahal;  // G x (rank+1), cum[k] = sum_{a<k} z_a^2 / lambda_a
    Matrix cum_euclid; // G x (rank+1), cum[k] = sum_{a<k} z_a^2
    std::vector<double> sqnorm; // G: |y - xbar_g|^2
    int rank = 0;
};

/// `dots[i]` must hold x_member_i . y and `yy` the query's squared norm.
inline QueryScores project_query(const SubsetFit& fit, std::span<const double> dots, double yy) {
    const int n_t = fit.size();
    const int g_count = fit.groups();
    const int r = fit.rank;
    require(static_cast<int>(dots.size()) == n_t, "engine: query dot count mismatch");

    std::vector<double> dot_mean(static_cast<std::size_t>(g_count), 0.0); // xbar_g . y
    for (int i = 0; i < n_t; ++i)
        dot_mean[static_cast<std::size_t>(fit.member_group[static_cast<std::size_t>(i)])] +=
            dots[static_cast<std::size_t>(i)];
    for (int g = 0; g < g_count; ++g)
        dot_mean[static_cast<std::size_t>(g)] /= static_cast<double>(fit.group_size[static_cast<std::size_t>(g)]);

    QueryScores q;
    q.rank = r;
    q.z.resize(g_count, r);
    q.cum_mahal.resize(g_count, r + 1);
    q.cum_euclid.resize(g_count, r + 1);
    q.sqnorm.resize(static_cast<std::size_t>(g_count));

    Vector d(n_t);
    for (int g = 0; g < g_count; ++g) {
        for (int i = 0; i < n_t; ++i) {
            const int gi = fit.member_group[static_cast<std::size_t>(i)];
            d(i) = (dots[static_cast<std::size_t>(i)] - dot_mean[static_cast<std::size_t>(gi)]) -
                   (fit.mean_dot(g, i) - fit.mean_cross(gi, g));
        }
        const Vector proj = fit.u.transpose() * d;
        q.cum_mahal(g, 0) = 0.0;
        q.cum_euclid(g, 0) = 0.0;
        for (int a = 0; a < r; ++a) {
            const double lam = fit.eigenvalues[static_cast<std::size_t>(a)];
            const double z = proj(a) / std::sqrt(fit.df * lam);
            q.z(g, a) = z;
            q.cum_mahal(g, a + 1) = q.cum_mahal(g, a) + z * z / lam;
            q.cum_euclid(g, a + 1) = q.cum_euclid(g, a) + z * z;
        }
        q.sqnorm[static_cast<std::size_t>(g)] =
            yy - 2.0 * dot_mean[static_cast<std::size_t>(g)] + fit.mean_cross(g, g);
    }
    return q;
}

/// Squared regularized distance to group g. k is clamped to the fit's rank
/// (tuning may probe more components than a leave-one-out subset retains).
inline double subset_distance(const SubsetFit& fit, const QueryScores& q, int g, RegKind kind,
                              int k, double gamma) {
    const int r = q.rank;
    switch (kind) {
        case RegKind::MoorePenrose: return q.cum_mahal(g, r);
        case RegKind::PcaK: return q.cum_mahal(g, std::min(k, r));
        case RegKind::MoorePenroseEuclid: return q.cum_euclid(g, r);
        case RegKind::PcaKEuclid: return q.cum_euclid(g, std::min(k, r));
        case RegKind::Ridge: {
            double dist = 0.0;
            for (int a = 0; a < r; ++a) {
                const double z = q.z(g, a);
                dist += z * z /
                        ((1.0 - gamma) * fit.eigenvalues[static_cast<std::size_t>(a)] + gamma);
            }
            if (fit.rank >= fit.dim) return dist; // no complement at full rank
            const double resid =
                std::max(0.0, q.sqnorm[static_cast<std::size_t>(g)] - q.cum_euclid(g, r));
            return dist + resid / gamma;
        }
    }
    return 0.0;
}

inline std::vector<double> subset_posterior(const SubsetFit& fit, const QueryScores& q,
                                            RegKind kind, int k, double gamma,
                                            std::span<const double> priors) {
    std::vector<double> dist(static_cast<std::size_t>(fit.groups()));
    for (int g = 0; g < fit.groups(); ++g)
        dist[static_cast<std::size_t>(g)] = subset_distance(fit, q, g, kind, k, gamma);
    return detail::posterior_from_distances(dist, priors);
}

/// A fitted rule that can classify arbitrary feature vectors. Holds the
/// training rows by shared ownership; evaluation computes the training dot
/// products directly.
struct DualModel {
    std::shared_ptr<const Matrix> data;
    SubsetFit fit;
    RegKind kind = RegKind::MoorePenrose;
    int k = 0;
    double gamma = 0.0;
    std::vector<double> priors;

    std::vector<double> posterior(const Vector& x) const {
        require(static_cast<int>(x.size()) == static_cast<int>(data->cols()),
                "engine: feature length mismatch");
        std::vector<double> dots(static_cast<std::size_t>(fit.size()));
        for (int i = 0; i < fit.size(); ++i)
            dots[static_cast<std::size_t>(i)] =
                data->row(fit.members[static_cast<std::size_t>(i)]).dot(x.transpose());
        const QueryScores q = project_query(fit, dots, x.squaredNorm());
        return subset_posterior(fit, q, kind, k, gamma, priors);
    }

    Label allocate(const Vector& x) const {
        const auto post = posterior(x);
        return detail::allocate_from_posterior(post);
    }

    /// The tuned value this model runs with (component count or gamma).
    double param() const { return kind == RegKind::Ridge ? gamma : static_cast<double>(k); }
};

/// Materializes a Classifier with explicit loadings from a dual fit.
inline Classifier materialize_classifier(const Matrix& x, const SubsetFit& fit, RegKind kind,
                                         int k, double gamma, std::vector<double> priors) {
    const int p = static_cast<int>(x.cols());
    const int g_count = fit.groups();
    EigenModel model;
    model.pooled_df = fit.df;
    model.rank = fit.rank;
    model.eigenvalues = fit.eigenvalues;
    model.group_means = Matrix::Zero(g_count, p);
    for (int i = 0; i < fit.size(); ++i)
        model.group_means.row(fit.member_group[static_cast<std::size_t>(i)]) +=
            x.row(fit.members[static_cast<std::size_t>(i)]);
    for (int g = 0; g < g_count; ++g)
        model.group_means.row(g) /= static_cast<double>(fit.group_size[static_cast<std::size_t>(g)]);

    Matrix centered(fit.size(), p);
    for (int i = 0; i < fit.size(); ++i)
        centered.row(i) = x.row(fit.members[static_cast<std::size_t>(i)]) -
                          model.group_means.row(fit.member_group[static_cast<std::size_t>(i)]);
    centered /= std::sqrt(fit.df);
    model.loadings.resize(p, fit.rank);
    for (int a = 0; a < fit.rank; ++a) {
        model.loadings.col(a) = centered.transpose() * fit.u.col(a) /
                                std::sqrt(fit.eigenvalues[static_cast<std::size_t>(a)]);
        orient_column(model.loadings, a);
    }
    RegularizerSpec reg{kind, std::min(k, fit.rank), gamma};
    return Classifier(std::move(model), reg, std::move(priors));
}

} // namespace msdcv
