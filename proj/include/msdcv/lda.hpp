#pragma once

#include "msdcv/dataset.hpp"
#include "msdcv/eigen_sym.hpp"

namespace msdcv {

// Fisher linear discrimination with a regularized pooled within-group
// dispersion matrix. All distances are evaluated in the eigenspace of the
// pooled dispersion; the p x p inverse is never formed.

/// Relative cutoff below which eigenvalues count as numerically zero.
inline constexpr double kRankEpsilon = 1e-10;

/// Eigendecomposition of the pooled within-group dispersion
/// S = sum_g sum_{i in g} (x_i - xbar_g)^T (x_i - xbar_g) / (n - G).
struct EigenModel {
    Matrix loadings;                // p x r, orthonormal columns
    std::vector<double> eigenvalues; // r, descending, strictly positive
    int rank = 0;
    Matrix group_means;             // G x p
    double pooled_df = 0.0;         // n - G

    int groups() const { return static_cast<int>(group_means.rows()); }
    int dim() const { return static_cast<int>(loadings.rows()); }
};

enum class RegKind {
    MoorePenrose,       // all r components, Mahalanobis scaling
    PcaK,               // first k components, Mahalanobis scaling
    Ridge,              // eigenvalues blended to (1-gamma) lambda + gamma
    MoorePenroseEuclid, // all r components, identity scaling
    PcaKEuclid          // first k components, identity scaling
};

inline std::string to_string(RegKind kind) {
    switch (kind) {
        case RegKind::MoorePenrose: return "mp";
        case RegKind::PcaK: return "pca";
        case RegKind::Ridge: return "ridge";
        case RegKind::MoorePenroseEuclid: return "mp-euclid";
        case RegKind::PcaKEuclid: return "pca-euclid";
    }
    return "?";
}

inline RegKind reg_kind_from_string(const std::string& s) {
    if (s == "mp") return RegKind::MoorePenrose;
    if (s == "pca") return RegKind::PcaK;
    if (s == "ridge") return RegKind::Ridge;
    if (s == "mp-euclid") return RegKind::MoorePenroseEuclid;
    if (s == "pca-euclid") return RegKind::PcaKEuclid;
    throw InvalidInput("lda: unknown method '" + s + "'");
}

inline bool is_pca_kind(RegKind k) { return k == RegKind::PcaK || k == RegKind::PcaKEuclid; }
inline bool is_euclid_kind(RegKind k) {
    return k == RegKind::MoorePenroseEuclid || k == RegKind::PcaKEuclid;
}

struct RegularizerSpec {
    RegKind kind = RegKind::MoorePenrose;
    int k = 0;          // component count for the pca kinds
    double gamma = 0.0; // ridge weight in (0, 1]

    void validate(int rank) const {
        if (is_pca_kind(kind))
            require(k >= 1 && k <= rank, "lda: component count k outside 1..rank");
        if (kind == RegKind::Ridge)
            require(gamma > 0.0 && gamma <= 1.0, "lda: ridge gamma outside (0,1]");
    }
};

namespace detail {

/// Squared distance from z-scores (projections onto eigenvectors), the
/// retained-eigenvalue rule of the chosen regularizer, and the squared
/// residual outside the eigenspace (ridge only: the gamma I term acts on the
/// orthogonal complement as residual^2 / gamma).
inline double distance_from_scores(std::span<const double> z, std::span<const double> lam,
                                   double residual_sq, const RegularizerSpec& reg) {
    const int r = static_cast<int>(lam.size());
    double d = 0.0;
    switch (reg.kind) {
        case RegKind::MoorePenrose:
            for (int a = 0; a < r; ++a)
                d += z[static_cast<std::size_t>(a)] * z[static_cast<std::size_t>(a)] /
                     lam[static_cast<std::size_t>(a)];
            break;
        case RegKind::PcaK:
            for (int a = 0; a < reg.k; ++a)
                d += z[static_cast<std::size_t>(a)] * z[static_cast<std::size_t>(a)] /
                     lam[static_cast<std::size_t>(a)];
            break;
        case RegKind::Ridge:
            for (int a = 0; a < r; ++a)
                d += z[static_cast<std::size_t>(a)] * z[static_cast<std::size_t>(a)] /
                     ((1.0 - reg.gamma) * lam[static_cast<std::size_t>(a)] + reg.gamma);
            d += residual_sq / reg.gamma;
            break;
        case RegKind::MoorePenroseEuclid:
            for (int a = 0; a < r; ++a)
                d += z[static_cast<std::size_t>(a)] * z[static_cast<std::size_t>(a)];
            break;
        case RegKind::PcaKEuclid:
            for (int a = 0; a < reg.k; ++a)
                d += z[static_cast<std::size_t>(a)] * z[static_cast<std::size_t>(a)];
            break;
    }
    return d;
}

/// Posterior class probabilities from squared distances, overflow-safe.
inline std::vector<double> posterior_from_distances(std::span<const double> dist,
                                                    std::span<const double> priors) {
    const std::size_t g_count = dist.size();
    double d_min = dist[0];
    for (double d : dist) d_min = std::min(d_min, d);
    std::vector<double> post(g_count);
    double total = 0.0;
    for (std::size_t g = 0; g < g_count; ++g) {
        post[g] = priors[g] * std::exp(-0.5 * (dist[g] - d_min));
        total += post[g];
    }
    require(total > 0.0, "lda: all posterior mass vanished");
    for (double& v : post) v /= total;
    return post;
}

/// Argmax allocation, lowest group index on exact ties (two-group case:
/// threshold 0.5 on p(1|x)).
inline int allocate_from_posterior(std::span<const double> post) {
    int best = 0;
    for (std::size_t g = 1; g < post.size(); ++g)
        if (post[g] > post[static_cast<std::size_t>(best)]) best = static_cast<int>(g);
    return best + 1;
}

} // namespace detail

/// Pooled within-group eigendecomposition. Uses the p x p form when p <= n
/// and the n x n inner-product (dual) form when p > n; eigenvalues below
/// kRankEpsilon * lambda_1 are discarded.
inline EigenModel pooled_eigen(const Matrix& x, std::span<const Label> labels) {
    const int n = static_cast<int>(x.rows());
    const int p = static_cast<int>(x.cols());
    require(n == static_cast<int>(labels.size()), "lda: labels do not match rows");
    const int g_count = group_count(labels, "lda");
    const double df = static_cast<double>(n - g_count);
    if (df < 1.0) throw ComputeError("lda: pooled degrees of freedom below 1");

    EigenModel model;
    model.pooled_df = df;
    model.group_means = Matrix::Zero(g_count, p);
    const auto counts = per_group_counts(labels, g_count);
    for (int i = 0; i < n; ++i) model.group_means.row(labels[static_cast<std::size_t>(i)] - 1) += x.row(i);
    for (int g = 0; g < g_count; ++g)
        model.group_means.row(g) /= static_cast<double>(counts[static_cast<std::size_t>(g)]);

    Matrix centered(n, p);
    for (int i = 0; i < n; ++i)
        centered.row(i) = x.row(i) - model.group_means.row(labels[static_cast<std::size_t>(i)] - 1);
    centered /= std::sqrt(df);

    const int rank_cap = std::min(p, n - g_count);
    if (p <= n) {
        const Matrix s = centered.transpose() * centered;
        const SymEigen eig = sym_eigen(s);
        const double lam1 = eig.values.empty() ? 0.0 : eig.values[0];
        int r = 0;
        while (r < rank_cap && eig.values[static_cast<std::size_t>(r)] > kRankEpsilon * lam1) ++r;
        if (!(lam1 > 0.0) || r < 1)
            throw ComputeError("lda: within-group scatter has rank 0");
        model.rank = r;
        model.eigenvalues.assign(eig.values.begin(), eig.values.begin() + r);
        model.loadings = eig.vectors.leftCols(r);
    } else {
        const Matrix m = centered * centered.transpose();
        const SymEigen eig = sym_eigen(m);
        const double lam1 = eig.values.empty() ? 0.0 : eig.values[0];
        int r = 0;
        while (r < rank_cap && eig.values[static_cast<std::size_t>(r)] > kRankEpsilon * lam1) ++r;
        if (!(lam1 > 0.0) || r < 1)
            throw ComputeError("lda: within-group scatter has rank 0");
        model.rank = r;
        model.eigenvalues.assign(eig.values.begin(), eig.values.begin() + r);
        model.loadings.resize(p, r);
        for (int a = 0; a < r; ++a) {
            model.loadings.col(a) = centered.transpose() * eig.vectors.col(a) /
                                    std::sqrt(eig.values[static_cast<std::size_t>(a)]);
            orient_column(model.loadings, a);
        }
    }
    return model;
}

inline EigenModel pooled_eigen(const Dataset& d) {
    const auto labels = d.labels();
    return pooled_eigen(d.features(), labels);
}

/// A fitted allocation rule: eigendecomposition, regularizer and priors.
class Classifier {
public:
    Classifier(EigenModel model, RegularizerSpec reg, std::vector<double> priors = {})
        : model_(std::move(model)), reg_(reg), priors_(std::move(priors)) {
        reg_.validate(model_.rank);
        if (priors_.empty())
            priors_.assign(static_cast<std::size_t>(model_.groups()),
                           1.0 / static_cast<double>(model_.groups()));
        require(static_cast<int>(priors_.size()) == model_.groups(),
                "lda: one prior per group required");
        double total = 0.0;
        for (double w : priors_) {
            require(w >= 0.0, "lda: negative prior");
            total += w;
        }
        require(total > 0.0, "lda: priors sum to zero");
        for (double& w : priors_) w /= total;
    }

    const EigenModel& model() const { return model_; }
    const RegularizerSpec& reg() const { return reg_; }
    std::span<const double> priors() const { return priors_; }

    /// Regularized squared Fisher distance of x to group g (1-based).
    double distance(const Vector& x, Label g) const {
        require(static_cast<int>(x.size()) == model_.dim(), "lda: feature length mismatch");
        require(g >= 1 && g <= model_.groups(), "lda: group out of range");
        const Vector diff = x - model_.group_means.row(g - 1).transpose();
        const Vector z = model_.loadings.transpose() * diff;
        double residual_sq = 0.0;
        // the complement is empty at full rank; anything left is rounding noise
        if (reg_.kind == RegKind::Ridge && model_.rank < model_.dim())
            residual_sq = std::max(0.0, diff.squaredNorm() - z.squaredNorm());
        return detail::distance_from_scores({z.data(), static_cast<std::size_t>(z.size())},
                                            model_.eigenvalues, residual_sq, reg_);
    }

    /// Posterior class probabilities p(g|x).
    std::vector<double> posterior(const Vector& x) const {
        std::vector<double> dist(static_cast<std::size_t>(model_.groups()));
        for (int g = 1; g <= model_.groups(); ++g)
            dist[static_cast<std::size_t>(g - 1)] = distance(x, g);
        return detail::posterior_from_distances(dist, priors_);
    }

    Label allocate(const Vector& x) const {
        const auto post = posterior(x);
        return detail::allocate_from_posterior(post);
    }

    /// Discriminant coefficients beta = S_reg^{-1} (xbar_1 - xbar_2)^T, through
    /// the same regularized inverse as the distances. Two groups only.
    Vector discriminant_coefficients() const {
        require(model_.groups() == 2, "lda: discriminant coefficients need exactly 2 groups");
        const Vector d = (model_.group_means.row(0) - model_.group_means.row(1)).transpose();
        const Vector z = model_.loadings.transpose() * d;
        const int r = model_.rank;
        Vector scaled = Vector::Zero(r);
        switch (reg_.kind) {
            case RegKind::MoorePenrose:
                for (int a = 0; a < r; ++a)
                    scaled(a) = z(a) / model_.eigenvalues[static_cast<std::size_t>(a)];
                break;
            case RegKind::PcaK:
                for (int a = 0; a < reg_.k; ++a)
                    scaled(a) = z(a) / model_.eigenvalues[static_cast<std::size_t>(a)];
                break;
            case RegKind::Ridge: {
                for (int a = 0; a < r; ++a)
                    scaled(a) =
                        z(a) / ((1.0 - reg_.gamma) * model_.eigenvalues[static_cast<std::size_t>(a)] +
                                reg_.gamma);
                Vector beta = model_.loadings * scaled;
                // orthogonal complement passes through the gamma I term
                beta += (d - model_.loadings * z) / reg_.gamma;
                return beta;
            }
            case RegKind::MoorePenroseEuclid:
                for (int a = 0; a < r; ++a) scaled(a) = z(a);
                break;
            case RegKind::PcaKEuclid:
                for (int a = 0; a < reg_.k; ++a) scaled(a) = z(a);
                break;
        }
        return model_.loadings * scaled;
    }

private:
    EigenModel model_;
    RegularizerSpec reg_;
    std::vector<double> priors_;
};

} // namespace msdcv
