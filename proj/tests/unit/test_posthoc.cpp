#include <doctest.h>

#include "msdcv/posthoc.hpp"
#include "msdcv/rng.hpp"

using namespace msdcv;

namespace {

/// Two correlated blocks of columns driven by per-sample factors, noise
/// elsewhere. Factors carry group contrasts of opposite sign, and the whole
/// matrix sits on a preprocessed-like scale (small values).
struct Planted {
    Matrix x;
    std::vector<Label> labels;
    std::vector<int> block1, block2;
};

Planted planted_blocks(int n, int p, double contrast, std::uint64_t seed) {
    Rng rng(seed);
    Planted out;
    out.x.resize(n, p);
    const int c1 = p / 4, c2 = 3 * p / 4;
    for (int j = c1 - 3; j <= c1 + 3; ++j) out.block1.push_back(j);
    for (int j = c2 - 3; j <= c2 + 3; ++j) out.block2.push_back(j);
    for (int i = 0; i < n; ++i) {
        const Label g = i % 2 == 0 ? 1 : 2;
        out.labels.push_back(g);
        const double sign = g == 1 ? 1.0 : -1.0;
        const double f1 = 3.0 * rng.next_normal() + sign * contrast * 3.0;
        const double f2 = 3.0 * rng.next_normal() - sign * contrast * 3.0;
        for (int j = 0; j < p; ++j) {
            double v = 0.15 * rng.next_normal();
            const double w1 = std::exp(-0.1 * (j - c1) * (j - c1));
            const double w2 = std::exp(-0.1 * (j - c2) * (j - c2));
            v += f1 * w1 + f2 * w2;
            out.x(i, j) = 0.01 * v;
        }
    }
    return out;
}

Dataset wrap(const Planted& p) {
    std::vector<SampleMeta> meta;
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
        SampleMeta m;
        m.id = "s" + std::to_string(i);
        m.group = p.labels[i];
        meta.push_back(m);
    }
    std::vector<double> mz;
    for (int b = 0; b < p.x.cols(); ++b) mz.push_back(1000.0 + b);
    return Dataset::from_features(p.x, mz, meta, 1);
}

} // namespace

TEST_CASE("reduce_bins base cases") {
    SUBCASE("single bin selects itself") {
        Matrix x(4, 1);
        x << 1.0, 2.0, 3.0, 4.0;
        const auto sel = reduce_bins(x);
        CHECK(sel.indices == std::vector<int>{0});
        REQUIRE(sel.clusters.size() == 1);
        CHECK(sel.clusters[0].seed == 0);
    }
    SUBCASE("equal variances stop after the first cluster") {
        // columns identical up to sign flips: all variances equal, and
        // v_ref equals them, so no second seed survives v > v_ref
        Matrix x(6, 5);
        Rng rng(4);
        for (int i = 0; i < 6; ++i) x(i, 0) = rng.next_normal();
        for (int j = 1; j < 5; ++j)
            for (int i = 0; i < 6; ++i) x(i, j) = (j % 2 == 0 ? 1.0 : -1.0) * x(i, 0);
        const auto sel = reduce_bins(x);
        CHECK(sel.clusters.size() == 1);
    }
    SUBCASE("needs 3 samples") {
        Matrix x(2, 3);
        x << 1, 2, 3, 4, 5, 6;
        CHECK_THROWS_AS(reduce_bins(x), InvalidInput);
    }
}

TEST_CASE("reduce_bins recovers planted correlated blocks") {
    const Planted p = planted_blocks(40, 60, 2.0, 31);
    const auto sel = reduce_bins(p.x);

    // both planted blocks are covered
    int hit1 = 0, hit2 = 0;
    for (int j : sel.indices) {
        if (std::find(p.block1.begin(), p.block1.end(), j) != p.block1.end()) ++hit1;
        if (std::find(p.block2.begin(), p.block2.end(), j) != p.block2.end()) ++hit2;
    }
    CHECK(hit1 >= static_cast<int>(p.block1.size()) - 1);
    CHECK(hit2 >= static_cast<int>(p.block2.size()) - 1);

    // selection never looks at labels: permuting them changes nothing
    const auto sel_same = reduce_bins(p.x);
    CHECK(sel_same.indices == sel.indices); // deterministic
    Dataset d = wrap(p);
    std::vector<Label> flipped = d.labels();
    std::reverse(flipped.begin(), flipped.end());
    const auto sel_flipped = reduce_bins(d.with_labels(flipped));
    CHECK(sel_flipped.indices == sel.indices);
    CHECK(sel.v_ref == quantile(sel.variances, 0.95));

    // clusters are contiguous index runs containing their seed
    for (const auto& c : sel.clusters) {
        CHECK(c.from <= c.seed);
        CHECK(c.seed <= c.to);
    }
}

TEST_CASE("reduce_bins stops at array boundaries") {
    // strongest column at the edge: growth must fail on the missing side
    Rng rng(8);
    Matrix x(10, 6);
    for (int i = 0; i < 10; ++i) {
        const double f = 5.0 * rng.next_normal();
        x(i, 0) = f;
        x(i, 1) = f + 0.01 * rng.next_normal();
        for (int j = 2; j < 6; ++j) x(i, j) = 0.1 * rng.next_normal();
    }
    const auto sel = reduce_bins(x);
    REQUIRE(!sel.clusters.empty());
    CHECK(sel.clusters[0].seed == 0);
    CHECK(sel.clusters[0].from == 0);
    CHECK(sel.clusters[0].to == 0); // lower neighbor out of range ends growth
}

TEST_CASE("correlation_map finds opposite signs at planted contrasts") {
    const Planted p = planted_blocks(40, 60, 2.0, 57);
    const Dataset d = wrap(p);
    const auto out = correlation_map(d, 2);
    REQUIRE(out.rho.size() == 60);

    const int c1 = p.block1[3], c2 = p.block2[3]; // block centers
    CHECK(out.rho[static_cast<std::size_t>(c1)] * out.rho[static_cast<std::size_t>(c2)] < 0.0);
    CHECK(out.max_abs_rho <= 1.0 + 1e-9);
    // the planted locations dominate the correlation map
    double off_block = 0.0;
    for (std::size_t j = 0; j < out.rho.size(); ++j) {
        const int jj = static_cast<int>(j);
        if (std::abs(jj - c1) <= 5 || std::abs(jj - c2) <= 5) continue;
        off_block = std::max(off_block, std::abs(out.rho[j]));
    }
    CHECK(std::abs(out.rho[static_cast<std::size_t>(c1)]) > 3.0 * off_block);
    CHECK(std::abs(out.rho[static_cast<std::size_t>(c2)]) > 3.0 * off_block);

    // zero discriminant weight means zero correlation
    Vector beta = out.beta;
    for (std::size_t j = 0; j < out.rho.size(); ++j)
        if (beta(static_cast<Eigen::Index>(j)) == 0.0) CHECK(out.rho[j] == 0.0);

    // restricting to the selection barely changes the picture at the peaks
    const auto sel = reduce_bins(p.x);
    const auto restricted = correlation_map(d, 2, &sel);
    REQUIRE(restricted.bins.size() == sel.indices.size());
    for (std::size_t r = 0; r < restricted.bins.size(); ++r) {
        if (restricted.bins[r] == c1)
            CHECK(std::signbit(restricted.rho[r]) ==
                  std::signbit(out.rho[static_cast<std::size_t>(c1)]));
        if (restricted.bins[r] == c2)
            CHECK(std::signbit(restricted.rho[r]) ==
                  std::signbit(out.rho[static_cast<std::size_t>(c2)]));
    }

    // component scores separate the groups along the contrast
    double mean1 = 0.0, mean2 = 0.0;
    int n1 = 0, n2 = 0;
    for (int i = 0; i < d.n(); ++i) {
        if (p.labels[static_cast<std::size_t>(i)] == 1) {
            mean1 += out.component_scores(i, 0);
            ++n1;
        } else {
            mean2 += out.component_scores(i, 0);
            ++n2;
        }
    }
    const double pooled_spread = std::abs(mean1 / n1) + std::abs(mean2 / n2) + 1e-12;
    CHECK(std::abs(mean1 / n1 - mean2 / n2) > 0.5 * pooled_spread);
}

TEST_CASE("correlation_map validates its inputs") {
    const Planted p = planted_blocks(12, 20, 1.0, 3);
    const Dataset d = wrap(p);
    CHECK_THROWS_AS(correlation_map(d, 0), InvalidInput);
    CHECK_THROWS_AS(correlation_map(d, 50), InvalidInput);
    Planted three = p;
    three.labels[0] = 3;
    CHECK_THROWS_AS(correlation_map(wrap(three), 2), InvalidInput);
}

TEST_CASE("contrast") {
    const Planted p = planted_blocks(30, 40, 2.0, 13);
    const Dataset d = wrap(p);
    SUBCASE("same bin gives zeros") {
        for (const auto& row : contrast(d, 7, 7)) CHECK(row.value == 0.0);
    }
    SUBCASE("hand 2x2") {
        Matrix x(2, 2);
        x << 3.0, 1.0, -2.0, 5.0;
        std::vector<SampleMeta> meta(2);
        meta[0].id = "a";
        meta[0].group = 1;
        meta[1].id = "b";
        meta[1].group = 2;
        const Dataset tiny = Dataset::from_features(x, {100.0, 101.0}, meta, 1);
        const auto rows = contrast(tiny, 0, 1);
        CHECK(rows[0].value == 2.0);
        CHECK(rows[1].value == -7.0);
        CHECK(rows[0].group == 1);
    }
    SUBCASE("planted contrast separates the groups in sign") {
        const auto rows = contrast(d, p.block1[3], p.block2[3]);
        int agree = 0;
        for (const auto& row : rows)
            if ((row.group == 1) == (row.value > 0.0)) ++agree;
        CHECK(agree >= static_cast<int>(0.9 * static_cast<double>(rows.size())));
    }
    SUBCASE("index out of range") {
        CHECK_THROWS_AS(contrast(d, -1, 2), InvalidInput);
        CHECK_THROWS_AS(contrast(d, 0, 40), InvalidInput);
    }
}
