#pragma once

#include "msdcv/dataset.hpp"
#include "msdcv/discriminant_engine.hpp"
#include "msdcv/metrics.hpp"
#include "msdcv/parallel.hpp"

namespace msdcv {

// Double cross-validation: the outer layer removes each sample in turn and
// validates it with a rule that never saw it; the inner layer re-runs a full
// leave-one-out over the leftover data to tune the shrinkage parameter, so
// tuning never touches the sample being validated either.

/// Candidate tuning values. For the pca kinds an empty `ks` means "1..rank of
/// each inner fit"; the Moore-Penrose kinds carry no tunable parameter and run
/// as plain leave-one-out.
struct TuningGrid {
    RegKind kind = RegKind::MoorePenrose;
    std::vector<int> ks;
    std::vector<double> gammas;

    static TuningGrid moore_penrose() { return TuningGrid{RegKind::MoorePenrose, {}, {}}; }
    static TuningGrid moore_penrose_euclid() {
        return TuningGrid{RegKind::MoorePenroseEuclid, {}, {}};
    }
    static TuningGrid pca(std::vector<int> ks = {}) {
        return TuningGrid{RegKind::PcaK, std::move(ks), {}};
    }
    static TuningGrid pca_euclid(std::vector<int> ks = {}) {
        return TuningGrid{RegKind::PcaKEuclid, std::move(ks), {}};
    }
    static TuningGrid ridge(std::vector<double> gammas = {}) {
        return TuningGrid{RegKind::Ridge, {}, std::move(gammas)};
    }

    /// 13 log-spaced ridge weights, 1 down to 1e-6; tuned values often land
    /// below 1e-4, so the grid reaches well under that.
    static std::vector<double> default_gammas() {
        std::vector<double> g;
        for (int t = 0; t <= 12; ++t) g.push_back(std::pow(10.0, -0.5 * t));
        return g;
    }

    /// Sorts candidates into tie-break order: ties in the inner selection fall
    /// to the most-shrinkage value, i.e. the smallest k or the largest gamma.
    void canonicalize() {
        if (is_pca_kind(kind)) {
            require(gammas.empty(), "double_cv: gamma grid given for a pca method");
            std::sort(ks.begin(), ks.end());
            ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
            for (int k : ks) require(k >= 1, "double_cv: component counts must be >= 1");
        } else if (kind == RegKind::Ridge) {
            require(ks.empty(), "double_cv: k grid given for the ridge method");
            if (gammas.empty()) gammas = default_gammas();
            std::sort(gammas.begin(), gammas.end(), std::greater<>());
            gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());
            for (double g : gammas)
                require(g > 0.0 && g <= 1.0, "double_cv: gamma outside (0,1]");
            require(!gammas.empty(), "double_cv: empty tuning grid");
        } else {
            require(ks.empty() && gammas.empty(),
                    "double_cv: Moore-Penrose methods take no tuning grid");
        }
    }

    bool tuned() const {
        if (is_pca_kind(kind)) return ks.empty() || ks.size() > 1;
        if (kind == RegKind::Ridge) return gammas.size() != 1;
        return false;
    }
};

struct EngineOptions {
    std::vector<double> priors{0.5, 0.5};
    int threads = 0;           // 0 = hardware concurrency
    bool retain_models = false; // keep the n outer-fold rules for ensembles
};

struct DoubleCvResult {
    ValidationReport report;
    std::vector<DualModel> models; // one per outer fold when retained
    RegKind kind = RegKind::MoorePenrose;
};

namespace detail {

struct InnerStats {
    int miss = 0;
    double brier_sq = 0.0;
};

inline bool better(const InnerStats& a, const InnerStats& b) {
    if (a.miss != b.miss) return a.miss < b.miss;
    return a.brier_sq < b.brier_sq;
}

/// Gathers K column `query` over `members`.
inline std::vector<double> gather_dots(const Matrix& k, std::span<const int> members, int query) {
    std::vector<double> dots(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) dots[i] = k(members[i], query);
    return dots;
}

inline std::vector<int> erase_index(std::span<const int> v, int drop_pos) {
    std::vector<int> out;
    out.reserve(v.size() - 1);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (static_cast<int>(i) != drop_pos) out.push_back(v[i]);
    return out;
}

} // namespace detail

/// Leave-one-out tuning over `members`: every grid value is evaluated on the
/// same inner folds, selection is by misclassification count, then Brier,
/// then most shrinkage. Sub-folds that would empty a group are skipped.
/// Returns the chosen k (as double) or gamma.
inline double inner_tune(const Matrix& k_full, std::span<const Label> labels,
                         std::span<const int> members, const TuningGrid& grid,
                         std::span<const double> priors, int dim) {
    require(is_pca_kind(grid.kind) || grid.kind == RegKind::Ridge,
            "double_cv: inner_tune needs a tunable method");
    if (is_pca_kind(grid.kind) && grid.ks.size() == 1) return grid.ks[0];
    if (grid.kind == RegKind::Ridge && grid.gammas.size() == 1) return grid.gammas[0];

    const int n_t = static_cast<int>(members.size());
    int g_count = 0;
    std::vector<int> group_size;
    for (int idx : members) {
        const Label g = labels[static_cast<std::size_t>(idx)];
        if (g > g_count) {
            g_count = g;
            group_size.resize(static_cast<std::size_t>(g_count), 0);
        }
        ++group_size[static_cast<std::size_t>(g - 1)];
    }
    for (int c : group_size)
        if (c < 2)
            throw ComputeError("double_cv: training set too small to tune (need 2 per group)");

    const bool auto_ks = is_pca_kind(grid.kind) && grid.ks.empty();
    const int max_auto = n_t - 1 - g_count; // rank bound of the inner sub-fits
    std::size_t n_candidates = auto_ks ? static_cast<std::size_t>(std::max(1, max_auto))
                              : is_pca_kind(grid.kind) ? grid.ks.size()
                                                       : grid.gammas.size();
    std::vector<detail::InnerStats> stats(n_candidates);
    int max_rank_seen = 0;
    int folds_used = 0;

    for (int j = 0; j < n_t; ++j) {
        const Label truth = labels[static_cast<std::size_t>(members[static_cast<std::size_t>(j)])];
        if (group_size[static_cast<std::size_t>(truth - 1)] < 2) continue;
        if (n_t - 1 - g_count < 1) continue;
        const auto sub_members = detail::erase_index(members, j);
        const SubsetFit fit = fit_subset(k_full, labels, sub_members, dim);
        const int query = members[static_cast<std::size_t>(j)];
        const auto dots = detail::gather_dots(k_full, fit.members, query);
        const QueryScores q = project_query(fit, dots, k_full(query, query));
        max_rank_seen = std::max(max_rank_seen, fit.rank);
        ++folds_used;

        for (std::size_t c = 0; c < n_candidates; ++c) {
            int k = 0;
            double gamma = 0.0;
            if (is_pca_kind(grid.kind))
                k = auto_ks ? static_cast<int>(c) + 1 : grid.ks[c];
            else
                gamma = grid.gammas[c];
            const auto post = subset_posterior(fit, q, grid.kind, k, gamma, priors);
            if (detail::allocate_from_posterior(post) != truth) ++stats[c].miss;
            const double miss_p = 1.0 - post[static_cast<std::size_t>(truth - 1)];
            stats[c].brier_sq += miss_p * miss_p;
        }
    }
    if (folds_used == 0) throw ComputeError("double_cv: training set too small to tune");

    // candidates are in most-shrinkage-first order for gammas and ascending for
    // ks, so keeping the first strict winner applies the tie-break rule
    std::size_t limit = n_candidates;
    if (auto_ks) limit = static_cast<std::size_t>(std::max(1, max_rank_seen));
    std::size_t best = 0;
    for (std::size_t c = 1; c < limit; ++c)
        if (detail::better(stats[c], stats[best])) best = c;
    if (is_pca_kind(grid.kind))
        return auto_ks ? static_cast<double>(best + 1) : static_cast<double>(grid.ks[best]);
    return grid.gammas[best];
}

namespace detail {

struct FoldOutcome {
    double p_true = 0.0, p1 = 0.0;
    Label alloc = 0;
    double chosen = 0.0;
};

/// Tunes (if applicable), refits on `members`, classifies one query given its
/// training dot products. The workhorse shared by double_cv, plain LOO and
/// the replicate-swap evaluation.
inline FoldOutcome run_fold(const Matrix& k_full, std::span<const Label> labels,
                            std::span<const int> members, const TuningGrid& grid,
                            std::span<const double> priors, std::span<const double> query_dots,
                            double query_sq, Label truth, int dim, DualModel* keep,
                            const std::shared_ptr<const Matrix>& data) {
    double chosen = 0.0;
    if (is_pca_kind(grid.kind) || grid.kind == RegKind::Ridge)
        chosen = inner_tune(k_full, labels, members, grid, priors, dim);

    SubsetFit fit = fit_subset(k_full, labels, {members.begin(), members.end()}, dim);
    int k = 0;
    double gamma = 0.0;
    if (is_pca_kind(grid.kind)) {
        k = std::min(static_cast<int>(chosen), fit.rank);
        chosen = static_cast<double>(k);
    } else if (grid.kind == RegKind::Ridge) {
        gamma = chosen;
    } else {
        chosen = static_cast<double>(fit.rank); // Moore-Penrose: every component
    }

    const QueryScores q = project_query(fit, query_dots, query_sq);
    const auto post = subset_posterior(fit, q, grid.kind, k, gamma, priors);

    FoldOutcome out;
    out.p_true = post[static_cast<std::size_t>(truth - 1)];
    out.p1 = post[0];
    out.alloc = allocate_from_posterior(post);
    out.chosen = chosen;
    if (keep) *keep = DualModel{data, std::move(fit), grid.kind, k, gamma,
                                {priors.begin(), priors.end()}};
    return out;
}

inline void check_two_group(std::span<const Label> labels, const std::string& ctx) {
    const int g = group_count(labels, ctx);
    require(g == 2, ctx + ": exactly two groups required");
    const auto counts = per_group_counts(labels, g);
    require(counts[0] >= 2 && counts[1] >= 2, ctx + ": need at least 2 samples per group");
}

} // namespace detail

/// Full double cross-validation over a feature matrix: for each sample i the
/// rule is recalibrated and retuned on everything except i, then applied to i.
inline DoubleCvResult double_cv(const Matrix& x, std::vector<Label> labels, TuningGrid grid,
                                const EngineOptions& opts = {},
                                std::vector<std::string> sample_ids = {}) {
    const int n = static_cast<int>(x.rows());
    require(n >= 3, "double_cv: need at least 3 samples");
    detail::check_two_group(labels, "double_cv");
    grid.canonicalize();

    const Matrix k_full = gram(x);
    std::shared_ptr<const Matrix> shared =
        opts.retain_models ? std::make_shared<const Matrix>(x) : nullptr;

    std::vector<detail::FoldOutcome> out(static_cast<std::size_t>(n));
    std::vector<DualModel> models(opts.retain_models ? static_cast<std::size_t>(n) : 0);

    parallel_for(
        n,
        [&](int i) {
            std::vector<int> members;
            members.reserve(static_cast<std::size_t>(n - 1));
            for (int j = 0; j < n; ++j)
                if (j != i) members.push_back(j);
            const auto dots = detail::gather_dots(k_full, members, i);
            out[static_cast<std::size_t>(i)] = detail::run_fold(
                k_full, labels, members, grid, opts.priors, dots, k_full(i, i),
                labels[static_cast<std::size_t>(i)], static_cast<int>(x.cols()),
                opts.retain_models ? &models[static_cast<std::size_t>(i)] : nullptr, shared);
        },
        opts.threads);

    DoubleCvResult res;
    res.kind = grid.kind;
    res.models = std::move(models);
    auto& rep = res.report;
    for (int i = 0; i < n; ++i) {
        const auto& f = out[static_cast<std::size_t>(i)];
        rep.sample_ids.push_back(sample_ids.empty() ? "s" + std::to_string(i + 1)
                                                    : sample_ids[static_cast<std::size_t>(i)]);
        rep.labels.push_back(labels[static_cast<std::size_t>(i)]);
        rep.p_true.push_back(f.p_true);
        rep.p_group1.push_back(f.p1);
        rep.allocations.push_back(f.alloc);
        rep.chosen_param.push_back(f.chosen);
    }
    rep.finalize();
    return res;
}

inline DoubleCvResult double_cv(const Dataset& d, const TuningGrid& grid,
                                const EngineOptions& opts = {}) {
    std::vector<std::string> ids;
    for (const auto& m : d.meta()) ids.push_back(m.id);
    return double_cv(d.features(), d.labels(), grid, opts, std::move(ids));
}

/// Plain leave-one-out with a fixed regularizer (no inner tuning). Written as
/// its own loop so the singleton-grid equivalence of double_cv is a real
/// cross-check rather than the same call.
inline DoubleCvResult plain_loo(const Matrix& x, std::vector<Label> labels, RegularizerSpec reg,
                                const EngineOptions& opts = {},
                                std::vector<std::string> sample_ids = {}) {
    const int n = static_cast<int>(x.rows());
    require(n >= 3, "double_cv: need at least 3 samples");
    detail::check_two_group(labels, "double_cv");

    const Matrix k_full = gram(x);
    std::vector<detail::FoldOutcome> out(static_cast<std::size_t>(n));
    parallel_for(
        n,
        [&](int i) {
            std::vector<int> members;
            members.reserve(static_cast<std::size_t>(n - 1));
            for (int j = 0; j < n; ++j)
                if (j != i) members.push_back(j);
            const SubsetFit fit =
                fit_subset(k_full, labels, members, static_cast<int>(x.cols()));
            const auto dots = detail::gather_dots(k_full, fit.members, i);
            const QueryScores q = project_query(fit, dots, k_full(i, i));
            int k = is_pca_kind(reg.kind) ? std::min(reg.k, fit.rank) : 0;
            const auto post = subset_posterior(fit, q, reg.kind, k, reg.gamma, opts.priors);
            auto& f = out[static_cast<std::size_t>(i)];
            const Label truth = labels[static_cast<std::size_t>(i)];
            f.p_true = post[static_cast<std::size_t>(truth - 1)];
            f.p1 = post[0];
            f.alloc = detail::allocate_from_posterior(post);
            f.chosen = is_pca_kind(reg.kind) ? static_cast<double>(k)
                       : reg.kind == RegKind::Ridge ? reg.gamma
                                                    : static_cast<double>(fit.rank);
        },
        opts.threads);

    DoubleCvResult res;
    res.kind = reg.kind;
    auto& rep = res.report;
    for (int i = 0; i < n; ++i) {
        const auto& f = out[static_cast<std::size_t>(i)];
        rep.sample_ids.push_back(sample_ids.empty() ? "s" + std::to_string(i + 1)
                                                    : sample_ids[static_cast<std::size_t>(i)]);
        rep.labels.push_back(labels[static_cast<std::size_t>(i)]);
        rep.p_true.push_back(f.p_true);
        rep.p_group1.push_back(f.p1);
        rep.allocations.push_back(f.alloc);
        rep.chosen_param.push_back(f.chosen);
    }
    rep.finalize();
    return res;
}

/// Replicate-swap evaluation: inner calibration and tuning use week-1 data
/// exclusively; each sample present in week 2 is classified from its week-2
/// feature vector. Metrics cover the week-2-present samples only.
inline DoubleCvResult replicate_swap_eval(const ReplicatePair& pair, TuningGrid grid,
                                          const EngineOptions& opts = {}) {
    const Matrix& x1 = pair.week1.features();
    const Matrix& x2 = pair.week2.features();
    require(x1.cols() == x2.cols(), "double_cv: week-1/week-2 feature dimensions differ");
    const auto labels = pair.week1.labels();
    const int n1 = pair.week1.n();
    const int n2 = pair.week2.n();
    require(n2 >= 1, "double_cv: empty replicate overlap");
    require(n1 >= 3, "double_cv: need at least 3 samples");
    detail::check_two_group(labels, "double_cv");
    grid.canonicalize();

    const Matrix k_full = gram(x1);
    const Matrix k_swap = cross_gram(x1, x2);
    const Matrix k_week2 = gram(x2);

    std::vector<detail::FoldOutcome> out(static_cast<std::size_t>(n2));
    parallel_for(
        n2,
        [&](int j) {
            const int i = pair.week2_to_week1[static_cast<std::size_t>(j)];
            std::vector<int> members;
            members.reserve(static_cast<std::size_t>(n1 - 1));
            for (int t = 0; t < n1; ++t)
                if (t != i) members.push_back(t);
            std::vector<double> dots(members.size());
            for (std::size_t m = 0; m < members.size(); ++m)
                dots[m] = k_swap(members[m], j);
            out[static_cast<std::size_t>(j)] = detail::run_fold(
                k_full, labels, members, grid, opts.priors, dots, k_week2(j, j),
                labels[static_cast<std::size_t>(i)], static_cast<int>(x1.cols()), nullptr,
                nullptr);
        },
        opts.threads);

    DoubleCvResult res;
    res.kind = grid.kind;
    auto& rep = res.report;
    for (int j = 0; j < n2; ++j) {
        const auto& f = out[static_cast<std::size_t>(j)];
        const int i = pair.week2_to_week1[static_cast<std::size_t>(j)];
        rep.sample_ids.push_back(pair.week2.meta(j).id);
        rep.labels.push_back(labels[static_cast<std::size_t>(i)]);
        rep.p_true.push_back(f.p_true);
        rep.p_group1.push_back(f.p1);
        rep.allocations.push_back(f.alloc);
        rep.chosen_param.push_back(f.chosen);
    }
    rep.finalize();
    return res;
}

enum class AllocationStrategy { LooOnFull, ModeK, Ensemble };

/// A rule for allocating future samples; one model, or the double-CV ensemble
/// pooled by the mean of the per-model posteriors.
struct AllocationRule {
    std::vector<DualModel> models;

    std::vector<double> posterior(const Vector& x) const {
        require(!models.empty(), "double_cv: empty allocation rule");
        std::vector<double> mean;
        for (const auto& m : models) {
            const auto p = m.posterior(x);
            if (mean.empty()) mean.assign(p.size(), 0.0);
            for (std::size_t g = 0; g < p.size(); ++g) mean[g] += p[g];
        }
        for (double& v : mean) v /= static_cast<double>(models.size());
        return mean;
    }

    Label allocate(const Vector& x) const {
        const auto post = posterior(x);
        return detail::allocate_from_posterior(post);
    }
};

/// Most frequent tuned value; ties fall to the most-shrinkage side.
inline double mode_param(std::span<const double> chosen, RegKind kind) {
    require(!chosen.empty(), "double_cv: no tuned values to take the mode of");
    std::vector<double> values(chosen.begin(), chosen.end());
    if (kind == RegKind::Ridge)
        std::sort(values.begin(), values.end(), std::greater<>()); // largest gamma first
    else
        std::sort(values.begin(), values.end()); // smallest k first
    double best = values[0];
    int best_count = 0;
    std::size_t i = 0;
    while (i < values.size()) {
        std::size_t j = i;
        while (j + 1 < values.size() && values[j + 1] == values[i]) ++j;
        const int count = static_cast<int>(j - i + 1);
        if (count > best_count) {
            best_count = count;
            best = values[i];
        }
        i = j + 1;
    }
    return best;
}

/// Builds the rule for allocating new samples after a double-CV run:
/// leave-one-out tuning on the full data, a refit at the modal inner choice,
/// or the retained n-classifier ensemble.
inline AllocationRule final_classifier(const Matrix& x, std::vector<Label> labels,
                                       TuningGrid grid, AllocationStrategy strategy,
                                       const EngineOptions& opts = {},
                                       const DoubleCvResult* dcv = nullptr) {
    detail::check_two_group(labels, "double_cv");
    grid.canonicalize();
    const int n = static_cast<int>(x.rows());
    auto shared = std::make_shared<const Matrix>(x);

    if (strategy == AllocationStrategy::Ensemble) {
        require(dcv != nullptr && !dcv->models.empty(),
                "double_cv: ensemble needs a double-CV run with retained models");
        AllocationRule rule;
        rule.models = dcv->models;
        return rule;
    }

    const Matrix k_full = gram(x);
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;

    double chosen = 0.0;
    if (strategy == AllocationStrategy::ModeK) {
        require(dcv != nullptr && !dcv->report.chosen_param.empty(),
                "double_cv: mode strategy needs a completed double-CV result");
        require(dcv->kind == grid.kind, "double_cv: mode strategy grid kind mismatch");
        chosen = mode_param(dcv->report.chosen_param, grid.kind);
    } else if (is_pca_kind(grid.kind) || grid.kind == RegKind::Ridge) {
        chosen = inner_tune(k_full, labels, all, grid, opts.priors, static_cast<int>(x.cols()));
    }

    SubsetFit fit = fit_subset(k_full, labels, all, static_cast<int>(x.cols()));
    int k = 0;
    double gamma = 0.0;
    if (is_pca_kind(grid.kind))
        k = std::min(static_cast<int>(chosen), fit.rank);
    else if (grid.kind == RegKind::Ridge)
        gamma = chosen;

    AllocationRule rule;
    rule.models.push_back(DualModel{shared, std::move(fit), grid.kind, k, gamma, opts.priors});
    return rule;
}

} // namespace msdcv
