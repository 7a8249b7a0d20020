#pragma once

#include "msdcv/dataset.hpp"
#include "msdcv/design.hpp"
#include "msdcv/rng.hpp"

namespace msdcv {

// Synthetic MALDI-like spot-level data with a known planted signal: Gaussian
// peaks with per-sample amplitudes, a smooth per-sample baseline, additive
// plate/day batch effects, spot noise, and a replicate second week that
// redraws the batch and noise terms. The truth record makes the planted
// discriminating bins checkable downstream.

struct SynthPeak {
    double mz = 0.0;
    double sigma = 0.0;
    double amplitude = 0.0; // mean peak height
    double amp_sd = 0.0;    // within-group SD of the height
    double delta = 0.0;     // group-1 shift in units of amp_sd; sign matters
};

struct SynthSpec {
    int n_cases = 0;
    int n_controls = 0;
    double mz_min = 1000.0;
    double mz_max = 1900.0;
    double raw_width_min = 0.07; // raw bin width ramp across the m/z range
    double raw_width_max = 0.24;
    std::vector<SynthPeak> peaks;
    double baseline_amplitude = 0.0;
    double plate_sd = 0.0;
    double day_sd = 0.0;
    double week_noise_sd = 0.0; // extra per-sample-peak amplitude noise in week 2
    double spot_noise_sd = 0.0;
    int spots = 4;
    int plates = 3;
    int positions_per_plate = 0; // 0 = fit to the sample count with slack
    int week2_drop_plate = 0;    // 0 = keep all plates in week 2
    std::uint64_t seed = 0;

    void validate() const {
        require(n_cases >= 2 && n_controls >= 2, "synthgen: need at least 2 per group");
        require(mz_max > mz_min, "synthgen: empty m/z range");
        require(raw_width_min > 0.0 && raw_width_max >= raw_width_min,
                "synthgen: raw widths must be positive and non-decreasing");
        for (const auto& pk : peaks) {
            require(pk.sigma > 0.0, "synthgen: peak width must be positive");
            require(pk.amp_sd >= 0.0, "synthgen: negative amplitude SD");
        }
        require(spot_noise_sd >= 0.0 && plate_sd >= 0.0 && day_sd >= 0.0 && week_noise_sd >= 0.0,
                "synthgen: negative noise SD");
        require(spots >= 1, "synthgen: need at least one spot");
        require(plates >= 1, "synthgen: need at least one plate");
    }
};

struct SynthTruth {
    struct ContrastPeak {
        double mz = 0.0;
        double sigma = 0.0;
        double delta = 0.0;
        double mz_lo = 0.0; // planted zone, mz +- 1.5 sigma
        double mz_hi = 0.0;
        int raw_from = -1; // raw bins whose centers fall in the zone
        int raw_to = -1;
    };
    std::vector<ContrastPeak> contrast_peaks;
};

struct SynthResult {
    Dataset week1;
    Dataset week2;
    SynthTruth truth;
};

inline SynthResult generate(const SynthSpec& spec) {
    spec.validate();

    // raw grid with a linear width ramp
    std::vector<double> edges{spec.mz_min};
    while (edges.back() < spec.mz_max) {
        const double t = (edges.back() - spec.mz_min) / (spec.mz_max - spec.mz_min);
        edges.push_back(edges.back() +
                        spec.raw_width_min + (spec.raw_width_max - spec.raw_width_min) * t);
    }
    const int n_bins = static_cast<int>(edges.size());
    std::vector<double> centers(static_cast<std::size_t>(n_bins));
    for (int b = 0; b < n_bins; ++b) {
        const double upper = b + 1 < n_bins
                                 ? edges[static_cast<std::size_t>(b + 1)]
                                 : edges[static_cast<std::size_t>(b)] + spec.raw_width_max;
        centers[static_cast<std::size_t>(b)] = 0.5 * (edges[static_cast<std::size_t>(b)] + upper);
    }

    // block design for the plate/day assignment
    DesignSpec design;
    design.class_sizes = {spec.n_cases, spec.n_controls};
    design.plates = spec.plates;
    const int total = spec.n_cases + spec.n_controls;
    design.positions_per_plate = spec.positions_per_plate > 0
                                     ? spec.positions_per_plate
                                     : (total + spec.plates - 1) / spec.plates + 2;
    design.seed = mix_seed(spec.seed, 0xde51);
    const DesignTable table = allocate(design);

    Rng rng(mix_seed(spec.seed, 0xda7a));
    const int n = static_cast<int>(table.size());

    // per-sample peak heights; the group contrast shifts group 1
    std::vector<std::vector<double>> heights(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        heights[static_cast<std::size_t>(i)].reserve(spec.peaks.size());
        for (const auto& pk : spec.peaks) {
            double h = pk.amplitude + pk.amp_sd * rng.next_normal();
            if (table[static_cast<std::size_t>(i)].group == 1) h += pk.delta * pk.amp_sd;
            heights[static_cast<std::size_t>(i)].push_back(h);
        }
    }

    const auto make_week = [&](int week) {
        // batch terms are redrawn each week
        std::vector<double> plate_shift(static_cast<std::size_t>(spec.plates));
        std::vector<double> day_shift(static_cast<std::size_t>(spec.plates));
        for (int pl = 0; pl < spec.plates; ++pl) {
            plate_shift[static_cast<std::size_t>(pl)] = spec.plate_sd * rng.next_normal();
            day_shift[static_cast<std::size_t>(pl)] = spec.day_sd * rng.next_normal();
        }
        std::vector<Sample> samples;
        samples.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const auto& row = table[static_cast<std::size_t>(i)];
            SampleMeta meta;
            meta.id = row.sample_id;
            meta.group = row.group;
            meta.stage = row.stage;
            meta.plate = row.plate;
            meta.day = row.day;
            meta.position = row.position;
            meta.week = week;

            std::vector<double> amps = heights[static_cast<std::size_t>(i)];
            if (week == 2)
                for (double& a : amps) a += spec.week_noise_sd * rng.next_normal();

            const double b0 = rng.next_normal();
            const double b1 = rng.next_normal();
            const double b2 = rng.next_normal();
            const double batch = plate_shift[static_cast<std::size_t>(row.plate - 1)] +
                                 day_shift[static_cast<std::size_t>(row.plate - 1)];

            std::vector<double> clean(static_cast<std::size_t>(n_bins));
            for (int b = 0; b < n_bins; ++b) {
                const double t = (centers[static_cast<std::size_t>(b)] - spec.mz_min) /
                                 (spec.mz_max - spec.mz_min);
                clean[static_cast<std::size_t>(b)] =
                    spec.baseline_amplitude * (2.5 + b0 + b1 * t + b2 * std::sin(M_PI * t)) +
                    batch;
            }
            for (std::size_t k = 0; k < spec.peaks.size(); ++k) {
                const auto& pk = spec.peaks[k];
                const double lo = pk.mz - 5.0 * pk.sigma;
                const double hi = pk.mz + 5.0 * pk.sigma;
                const auto first = std::lower_bound(centers.begin(), centers.end(), lo);
                for (auto it = first; it != centers.end() && *it <= hi; ++it) {
                    const double u = (*it - pk.mz) / pk.sigma;
                    clean[static_cast<std::size_t>(it - centers.begin())] +=
                        amps[k] * std::exp(-0.5 * u * u);
                }
            }

            Sample sample;
            sample.meta = meta;
            sample.spots.resize(static_cast<std::size_t>(spec.spots));
            for (int s = 0; s < spec.spots; ++s) {
                auto& spot = sample.spots[static_cast<std::size_t>(s)];
                spot.resize(static_cast<std::size_t>(n_bins));
                for (int b = 0; b < n_bins; ++b)
                    spot[static_cast<std::size_t>(b)] =
                        std::max(0.0, clean[static_cast<std::size_t>(b)] +
                                          spec.spot_noise_sd * rng.next_normal());
            }
            samples.push_back(std::move(sample));
        }
        return samples;
    };

    auto week1_samples = make_week(1);
    auto week2_samples = make_week(2);
    if (spec.week2_drop_plate > 0) {
        std::vector<Sample> kept;
        for (auto& s : week2_samples)
            if (s.meta.plate != spec.week2_drop_plate) kept.push_back(std::move(s));
        require(!kept.empty(), "synthgen: dropping that plate empties week 2");
        week2_samples = std::move(kept);
    }

    SynthResult out;
    out.week1 = Dataset::from_spots(edges, std::move(week1_samples), 1);
    out.week2 = Dataset::from_spots(edges, std::move(week2_samples), 2);
    for (const auto& pk : spec.peaks) {
        if (pk.delta == 0.0) continue;
        SynthTruth::ContrastPeak cp;
        cp.mz = pk.mz;
        cp.sigma = pk.sigma;
        cp.delta = pk.delta;
        cp.mz_lo = pk.mz - 1.5 * pk.sigma;
        cp.mz_hi = pk.mz + 1.5 * pk.sigma;
        for (int b = 0; b < n_bins; ++b) {
            if (centers[static_cast<std::size_t>(b)] < cp.mz_lo ||
                centers[static_cast<std::size_t>(b)] > cp.mz_hi)
                continue;
            if (cp.raw_from < 0) cp.raw_from = b;
            cp.raw_to = b;
        }
        out.truth.contrast_peaks.push_back(cp);
    }
    return out;
}

} // namespace msdcv
