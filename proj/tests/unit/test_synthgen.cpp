#include <doctest.h>

#include "msdcv/preprocess.hpp"
#include "msdcv/synthgen.hpp"

using namespace msdcv;

namespace {

SynthSpec small_spec(std::uint64_t seed, double delta) {
    SynthSpec spec;
    spec.n_cases = 10;
    spec.n_controls = 10;
    spec.mz_min = 1000.0;
    spec.mz_max = 1100.0;
    spec.peaks = {
        {1025.0, 3.0, 400.0, 40.0, delta},
        {1060.0, 3.0, 350.0, 35.0, -delta},
        {1085.0, 2.5, 300.0, 30.0, 0.0},
    };
    spec.baseline_amplitude = 30.0;
    spec.plate_sd = 10.0;
    spec.day_sd = 5.0;
    spec.week_noise_sd = 10.0;
    spec.spot_noise_sd = 8.0;
    spec.spots = 4;
    spec.plates = 3;
    spec.seed = seed;
    return spec;
}

} // namespace

TEST_CASE("generation is deterministic under the seed") {
    const auto a = generate(small_spec(11, 2.0));
    const auto b = generate(small_spec(11, 2.0));
    REQUIRE(a.week1.n() == b.week1.n());
    for (int i = 0; i < a.week1.n(); ++i) {
        CHECK(a.week1.meta(i).id == b.week1.meta(i).id);
        CHECK(a.week1.spots(i) == b.week1.spots(i)); // bit-identical
        CHECK(a.week2.spots(i) == b.week2.spots(i));
    }
    const auto c = generate(small_spec(12, 2.0));
    CHECK(a.week1.spots(0) != c.week1.spots(0));
}

TEST_CASE("weeks share the biology but not the noise") {
    const auto r = generate(small_spec(21, 2.0));
    CHECK(r.week1.n() == 20);
    CHECK(r.week2.n() == 20);
    CHECK(r.week1.week() == 1);
    CHECK(r.week2.week() == 2);
    for (int i = 0; i < r.week1.n(); ++i) {
        CHECK(r.week1.meta(i).id == r.week2.meta(i).id);
        CHECK(r.week1.meta(i).group == r.week2.meta(i).group);
        CHECK(r.week1.meta(i).plate == r.week2.meta(i).plate);
        CHECK(r.week1.spots(i) != r.week2.spots(i)); // remeasured
    }
    // replicate pairing accepts the pair wholesale
    const auto pair = pair_replicates(r.week1, r.week2);
    CHECK(pair.overlap() == 20);
}

TEST_CASE("dropping a plate shrinks week 2 only") {
    auto spec = small_spec(31, 2.0);
    spec.week2_drop_plate = 3;
    const auto r = generate(spec);
    CHECK(r.week1.n() == 20);
    CHECK(r.week2.n() < 20);
    for (int j = 0; j < r.week2.n(); ++j) CHECK(r.week2.meta(j).plate != 3);
    const auto pair = pair_replicates(r.week1, r.week2);
    CHECK(pair.overlap() == r.week2.n());
}

TEST_CASE("planted group difference matches the requested contrast") {
    auto spec = small_spec(41, 2.0);
    spec.n_cases = 60;
    spec.n_controls = 60;
    spec.plate_sd = 8.0;
    const auto r = generate(spec);
    REQUIRE(r.truth.contrast_peaks.size() == 2);

    for (const auto& cp : r.truth.contrast_peaks) {
        // raw-bin index closest to the peak center
        const auto& mz = r.week1.mz();
        int center = cp.raw_from;
        double best = 1e18;
        for (int b = cp.raw_from; b <= cp.raw_to; ++b) {
            const double d = std::abs(mz[static_cast<std::size_t>(b)] - cp.mz);
            if (d < best) {
                best = d;
                center = b;
            }
        }
        // spot-averaged group means at that bin
        double m1 = 0.0, m2 = 0.0, s1 = 0.0, s2 = 0.0;
        int n1 = 0, n2 = 0;
        std::vector<double> g1, g2;
        for (int i = 0; i < r.week1.n(); ++i) {
            double v = 0.0;
            for (const auto& spot : r.week1.spots(i))
                v += spot[static_cast<std::size_t>(center)];
            v /= static_cast<double>(r.week1.spots(i).size());
            if (r.week1.meta(i).group == 1) {
                g1.push_back(v);
                m1 += v;
                ++n1;
            } else {
                g2.push_back(v);
                m2 += v;
                ++n2;
            }
        }
        m1 /= n1;
        m2 /= n2;
        for (double v : g1) s1 += (v - m1) * (v - m1);
        for (double v : g2) s2 += (v - m2) * (v - m2);
        s1 /= (n1 - 1);
        s2 /= (n2 - 1);
        const double se = std::sqrt(s1 / n1 + s2 / n2);
        // peak kernel is ~1 at the center, so the planted shift is delta*amp_sd
        double amp_sd = 0.0;
        for (const auto& pk : spec.peaks)
            if (pk.mz == cp.mz) amp_sd = pk.amp_sd;
        REQUIRE(amp_sd > 0.0);
        const double planted = cp.delta * amp_sd;
        const double observed = m1 - m2;
        CHECK(std::abs(observed - planted) < 3.0 * se);
    }
}

TEST_CASE("truth record maps the planted zones onto the raw grid") {
    const auto r = generate(small_spec(51, 1.5));
    for (const auto& cp : r.truth.contrast_peaks) {
        CHECK(cp.mz_lo == cp.mz - 1.5 * cp.sigma);
        CHECK(cp.mz_hi == cp.mz + 1.5 * cp.sigma);
        CHECK(cp.raw_from >= 0);
        CHECK(cp.raw_to >= cp.raw_from);
        CHECK(cp.raw_to < static_cast<int>(r.week1.mz().size()));
    }
}

TEST_CASE("raw grid ramps and intensities stay non-negative") {
    const auto r = generate(small_spec(61, 0.0));
    const auto& mz = r.week1.mz();
    for (std::size_t b = 1; b < mz.size(); ++b) CHECK(mz[b] > mz[b - 1]);
    const double w_first = mz[1] - mz[0];
    const double w_last = mz[mz.size() - 1] - mz[mz.size() - 2];
    CHECK(w_first == doctest::Approx(0.07).epsilon(0.01));
    CHECK(w_last <= 0.24 + 1e-9);
    CHECK(w_last > w_first);
    for (int i = 0; i < r.week1.n(); ++i)
        for (const auto& spot : r.week1.spots(i))
            for (double v : spot) CHECK(v >= 0.0);
}

TEST_CASE("generated data runs through the preprocessing chain") {
    const auto r = generate(small_spec(71, 2.0));
    PreprocessConfig cfg;
    const Dataset d = preprocess_dataset(r.week1, cfg);
    CHECK(d.n() == 20);
    CHECK(d.p() > 30);
    CHECK(d.p() < 120);
    CHECK(d.has_features());

    // planted peak survives preprocessing with positive standardized
    // intensity at the aggregated bin containing the peak center
    const auto& plan = *d.bin_plan();
    const double peak_mz = 1025.0;
    int agg = -1;
    for (std::size_t b = 0; b < plan.bins.size(); ++b)
        if (plan.bins[b].lower <= peak_mz && peak_mz < plan.bins[b].upper)
            agg = static_cast<int>(b);
    REQUIRE(agg >= 0);
    // the log step maps the spectrum median to log(alpha) - beta
    const double floor_value = std::log(cfg.log_alpha) - cfg.log_beta;
    int above = 0;
    for (int i = 0; i < d.n(); ++i)
        if (d.features()(i, agg) > floor_value) ++above;
    CHECK(above == d.n());
}

TEST_CASE("spec validation") {
    auto spec = small_spec(1, 2.0);
    spec.n_cases = 1;
    CHECK_THROWS_AS(generate(spec), InvalidInput);
    spec = small_spec(1, 2.0);
    spec.peaks[0].sigma = 0.0;
    CHECK_THROWS_AS(generate(spec), InvalidInput);
    spec = small_spec(1, 2.0);
    spec.mz_max = spec.mz_min;
    CHECK_THROWS_AS(generate(spec), InvalidInput);
}
