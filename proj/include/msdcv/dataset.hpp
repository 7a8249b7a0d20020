#pragma once

#include "msdcv/bin_plan.hpp"
#include "msdcv/csv.hpp"
#include "msdcv/common.hpp"

#include <map>
#include <optional>

namespace msdcv {

/// One spectrum on the shared raw grid: bin lower edges live on the owning
/// dataset, intensities here.
using RawSpectrum = std::vector<double>;

struct SampleMeta {
    std::string id;
    Label group = 0;              // 1 = cases, 2 = controls
    std::optional<int> stage;     // disease stratum, cases only
    int plate = 0;
    int day = 0;
    int position = 0;
    int week = 1;
};

/// One biological sample: metadata plus its 1..S spot spectra.
struct Sample {
    SampleMeta meta;
    std::vector<RawSpectrum> spots;
};

/// Samples-by-bins data, either spot-level (as acquired) or feature-level
/// (after preprocessing). Immutable after construction; share freely.
class Dataset {
public:
    Dataset() = default;

    /// Spot-level construction.
    static Dataset from_spots(std::vector<double> grid, std::vector<Sample> samples,
                              int week = 1) {
        Dataset d;
        d.mz_ = std::move(grid);
        d.week_ = week;
        require(!d.mz_.empty(), "dataset: empty m/z grid");
        for (std::size_t b = 1; b < d.mz_.size(); ++b)
            require(d.mz_[b] > d.mz_[b - 1], "dataset: non-monotone m/z column");
        require(!samples.empty(), "dataset: no samples");
        for (const auto& s : samples) {
            require(!s.spots.empty(), "dataset: sample '" + s.meta.id + "' has no spots");
            for (const auto& spot : s.spots) {
                require(spot.size() == d.mz_.size(),
                        "dataset: spot length mismatch for sample '" + s.meta.id + "'");
                require(all_finite(spot),
                        "dataset: non-finite intensity in sample '" + s.meta.id + "'");
            }
            d.meta_.push_back(s.meta);
            d.spots_.push_back(s.spots);
        }
        d.validate_meta();
        return d;
    }

    /// Feature-level construction (rows = samples, cols = analysis bins).
    static Dataset from_features(Matrix x, std::vector<double> feature_mz,
                                 std::vector<SampleMeta> meta, int week = 1,
                                 std::optional<BinPlan> plan = std::nullopt) {
        Dataset d;
        require(x.rows() == static_cast<Eigen::Index>(meta.size()),
                "dataset: feature rows do not match metadata");
        require(x.cols() == static_cast<Eigen::Index>(feature_mz.size()),
                "dataset: feature columns do not match m/z edges");
        require(x.rows() > 0, "dataset: no samples");
        require(all_finite(x), "dataset: non-finite feature value");
        for (std::size_t b = 1; b < feature_mz.size(); ++b)
            require(feature_mz[b] > feature_mz[b - 1], "dataset: non-monotone m/z column");
        d.x_ = std::move(x);
        d.mz_ = std::move(feature_mz);
        d.meta_ = std::move(meta);
        d.week_ = week;
        d.plan_ = std::move(plan);
        d.validate_meta();
        return d;
    }

    int n() const { return static_cast<int>(meta_.size()); }
    int p() const { return static_cast<int>(x_.cols()); }
    int week() const { return week_; }

    bool has_spots() const { return !spots_.empty(); }
    bool has_features() const { return x_.rows() > 0; }

    const std::vector<double>& mz() const { return mz_; }
    const std::vector<SampleMeta>& meta() const { return meta_; }
    const SampleMeta& meta(int i) const { return meta_.at(static_cast<std::size_t>(i)); }
    const std::vector<RawSpectrum>& spots(int i) const {
        return spots_.at(static_cast<std::size_t>(i));
    }
    const Matrix& features() const {
        require(has_features(), "dataset: features not available (preprocess first)");
        return x_;
    }
    const std::optional<BinPlan>& bin_plan() const { return plan_; }

    std::vector<Label> labels() const {
        std::vector<Label> out;
        out.reserve(meta_.size());
        for (const auto& m : meta_) out.push_back(m.group);
        return out;
    }

    int groups() const {
        auto l = labels();
        return group_count(l, "dataset");
    }

    int index_of(const std::string& id) const {
        for (std::size_t i = 0; i < meta_.size(); ++i)
            if (meta_[i].id == id) return static_cast<int>(i);
        return -1;
    }

    /// Copy with a replaced label sequence (features shared by value).
    Dataset with_labels(const std::vector<Label>& labels) const {
        require(labels.size() == meta_.size(), "dataset: label count mismatch");
        Dataset d(*this);
        for (std::size_t i = 0; i < labels.size(); ++i) d.meta_[i].group = labels[i];
        return d;
    }

    /// Copy restricted to the given sample indices (order kept as given).
    Dataset subset_samples(std::span<const int> keep) const {
        require(!keep.empty(), "dataset: empty sample subset");
        Dataset d;
        d.mz_ = mz_;
        d.week_ = week_;
        d.plan_ = plan_;
        for (int i : keep) {
            require(i >= 0 && i < n(), "dataset: sample index out of range");
            d.meta_.push_back(meta_[static_cast<std::size_t>(i)]);
            if (has_spots()) d.spots_.push_back(spots_[static_cast<std::size_t>(i)]);
        }
        if (has_features()) {
            d.x_.resize(static_cast<Eigen::Index>(keep.size()), x_.cols());
            for (std::size_t r = 0; r < keep.size(); ++r)
                d.x_.row(static_cast<Eigen::Index>(r)) = x_.row(keep[r]);
        }
        return d;
    }

    /// Copy restricted to the given feature columns (feature-level only).
    Dataset subset_bins(std::span<const int> cols) const {
        require(has_features(), "dataset: bin subset needs feature-level data");
        require(!cols.empty(), "dataset: empty bin subset");
        Dataset d;
        d.meta_ = meta_;
        d.week_ = week_;
        d.x_.resize(x_.rows(), static_cast<Eigen::Index>(cols.size()));
        d.mz_.reserve(cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c) {
            require(cols[c] >= 0 && cols[c] < p(), "dataset: bin index out of range");
            d.x_.col(static_cast<Eigen::Index>(c)) = x_.col(cols[c]);
            d.mz_.push_back(mz_[static_cast<std::size_t>(cols[c])]);
        }
        return d;
    }

private:
    void validate_meta() const {
        std::map<std::string, int> seen;
        int week0 = meta_.empty() ? 1 : meta_.front().week;
        for (const auto& m : meta_) {
            require(!m.id.empty(), "dataset: empty sample_id");
            require(m.group >= 1, "dataset: unknown group label for sample '" + m.id + "'");
            require(seen.emplace(m.id, 1).second, "dataset: duplicate sample_id '" + m.id + "'");
            require(m.week == week0, "dataset: mixed weeks in one dataset");
        }
    }

    std::vector<SampleMeta> meta_;
    std::vector<double> mz_;                       // raw edges or aggregated lower edges
    std::vector<std::vector<RawSpectrum>> spots_;  // [sample][spot][bin]; spot-level only
    Matrix x_;                                     // n x p; feature-level only
    std::optional<BinPlan> plan_;
    int week_ = 1;
};

/// Week-1 measurements paired with their week-2 replicates (subset allowed).
struct ReplicatePair {
    Dataset week1;
    Dataset week2;
    /// week2_to_week1[j] = index in week1 of week-2 sample j.
    std::vector<int> week2_to_week1;

    int overlap() const { return static_cast<int>(week2_to_week1.size()); }
};

/// Pairs replicates by sample_id. Every week-2 id must exist in week 1 with
/// the same label; week 2 may be a strict subset (plate loss).
inline ReplicatePair pair_replicates(Dataset week1, Dataset week2) {
    std::vector<int> map;
    map.reserve(static_cast<std::size_t>(week2.n()));
    for (int j = 0; j < week2.n(); ++j) {
        const auto& m2 = week2.meta(j);
        const int i = week1.index_of(m2.id);
        require(i >= 0, "dataset: week-2 sample '" + m2.id + "' absent from week 1");
        require(week1.meta(i).group == m2.group,
                "dataset: label mismatch for replicate '" + m2.id + "'");
        map.push_back(i);
    }
    require(!map.empty(), "dataset: empty replicate overlap");
    return ReplicatePair{std::move(week1), std::move(week2), std::move(map)};
}

namespace detail {

struct SpectraColumns {
    std::vector<double> mz;
    std::vector<std::string> sample_ids;            // order of first appearance
    std::vector<std::vector<RawSpectrum>> spots;    // [sample][spot][bin]
    bool spot_level = false;
};

inline SpectraColumns read_spectra_csv(const std::string& path) {
    const auto rows = read_csv(path);
    require(rows.size() >= 2, "dataset: spectra file '" + path + "' has no data rows");
    const auto& header = rows[0];
    require(header.size() >= 2 && header[0] == "mz",
            "dataset: spectra header must start with 'mz'");

    SpectraColumns out;
    const std::size_t n_cols = header.size() - 1;
    std::map<std::string, std::size_t> col_of_sample;
    std::vector<std::size_t> col_sample;  // column -> sample slot
    bool any_spot = false, any_plain = false;
    for (std::size_t c = 0; c < n_cols; ++c) {
        std::string name = header[c + 1];
        std::string id = name;
        const std::size_t hash = name.find('#');
        if (hash != std::string::npos) {
            id = name.substr(0, hash);
            require(!id.empty() && hash + 1 < name.size(),
                    "dataset: malformed spot column '" + name + "'");
            any_spot = true;
        } else {
            any_plain = true;
        }
        auto it = col_of_sample.find(id);
        std::size_t slot;
        if (it == col_of_sample.end()) {
            slot = out.sample_ids.size();
            col_of_sample.emplace(id, slot);
            out.sample_ids.push_back(id);
            out.spots.emplace_back();
        } else {
            slot = it->second;
        }
        out.spots[slot].emplace_back();
        col_sample.push_back(slot);
    }
    require(!(any_spot && any_plain),
            "dataset: spectra file mixes spot columns with plain sample columns");
    out.spot_level = any_spot;

    const std::size_t n_bins = rows.size() - 1;
    out.mz.reserve(n_bins);
    for (auto& per_sample : out.spots)
        for (auto& spot : per_sample) spot.reserve(n_bins);

    std::vector<std::size_t> spot_cursor(out.sample_ids.size(), 0);
    // column -> (sample slot, spot slot), spots numbered by column order
    std::vector<std::pair<std::size_t, std::size_t>> target;
    for (std::size_t c = 0; c < n_cols; ++c) {
        const std::size_t slot = col_sample[c];
        target.emplace_back(slot, spot_cursor[slot]++);
    }

    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        require(cells.size() == header.size(),
                "dataset: ragged spectra row " + std::to_string(r + 1));
        const double mz = parse_double(cells[0], "dataset: m/z");
        if (!out.mz.empty())
            require(mz > out.mz.back(), "dataset: non-monotone m/z column");
        out.mz.push_back(mz);
        for (std::size_t c = 0; c < n_cols; ++c) {
            const double v = parse_double(cells[c + 1], "dataset: intensity");
            require(std::isfinite(v), "dataset: non-finite intensity");
            out.spots[target[c].first][target[c].second].push_back(v);
        }
    }
    return out;
}

inline std::optional<int> parse_optional_int(const std::string& s, const std::string& ctx) {
    if (s.empty()) return std::nullopt;
    return static_cast<int>(parse_long(s, ctx));
}

} // namespace detail

/// Loads a dataset from a spectra CSV (wide: mz,<sample_id>,... or spot-level
/// mz,<sample_id>#<spot>,...) and a metadata CSV keyed by sample_id.
/// Sample order equals metadata row order. Plain (non-spot) input is exposed
/// both as single-spot spectra and as a feature matrix.
inline Dataset load_dataset(const std::string& spectra_path, const std::string& metadata_path) {
    auto cols = detail::read_spectra_csv(spectra_path);

    const auto meta_rows = read_csv(metadata_path);
    require(!meta_rows.empty(), "dataset: no samples");
    const std::vector<std::string> expect = {"sample_id", "group", "stage",
                                             "plate",     "day",   "position", "week"};
    require(meta_rows[0] == std::vector<std::string>(expect.begin(), expect.end()),
            "dataset: metadata header must be sample_id,group,stage,plate,day,position,week");
    require(meta_rows.size() >= 2, "dataset: no samples");

    std::map<std::string, std::size_t> spectra_slot;
    for (std::size_t s = 0; s < cols.sample_ids.size(); ++s)
        spectra_slot.emplace(cols.sample_ids[s], s);

    std::vector<Sample> samples;
    samples.reserve(meta_rows.size() - 1);
    for (std::size_t r = 1; r < meta_rows.size(); ++r) {
        const auto& cells = meta_rows[r];
        require(cells.size() == expect.size(),
                "dataset: ragged metadata row " + std::to_string(r + 1));
        SampleMeta m;
        m.id = cells[0];
        m.group = static_cast<Label>(parse_long(cells[1], "dataset: group"));
        require(m.group >= 1, "dataset: unknown group label '" + cells[1] + "'");
        m.stage = detail::parse_optional_int(cells[2], "dataset: stage");
        m.plate = static_cast<int>(cells[3].empty() ? 0 : parse_long(cells[3], "dataset: plate"));
        m.day = static_cast<int>(cells[4].empty() ? 0 : parse_long(cells[4], "dataset: day"));
        m.position =
            static_cast<int>(cells[5].empty() ? 0 : parse_long(cells[5], "dataset: position"));
        m.week = static_cast<int>(cells[6].empty() ? 1 : parse_long(cells[6], "dataset: week"));

        const auto it = spectra_slot.find(m.id);
        require(it != spectra_slot.end(),
                "dataset: sample '" + m.id + "' has metadata but no spectra column");
        samples.push_back(Sample{m, std::move(cols.spots[it->second])});
        cols.spots[it->second].clear();
        spectra_slot.erase(it);
    }
    if (!spectra_slot.empty())
        throw InvalidInput("dataset: spectra column '" + spectra_slot.begin()->first +
                           "' has no metadata row");

    const int week = samples.front().meta.week;
    Dataset d = Dataset::from_spots(cols.mz, std::move(samples), week);
    if (!cols.spot_level) {
        // plain columns double as a feature matrix (e.g. preprocessed input)
        Matrix x(d.n(), static_cast<Eigen::Index>(d.mz().size()));
        for (int i = 0; i < d.n(); ++i) {
            const auto& v = d.spots(i)[0];
            for (std::size_t b = 0; b < v.size(); ++b)
                x(i, static_cast<Eigen::Index>(b)) = v[b];
        }
        std::vector<SampleMeta> meta = d.meta();
        return Dataset::from_features(std::move(x), d.mz(), std::move(meta), week);
    }
    return d;
}

/// Writes the wide spectra CSV (feature-level, or spot-level when present).
inline void save_spectra_csv(const Dataset& d, const std::string& path) {
    CsvWriter w(path);
    std::vector<std::string> header{"mz"};
    if (d.has_spots()) {
        for (int i = 0; i < d.n(); ++i)
            for (std::size_t s = 0; s < d.spots(i).size(); ++s)
                header.push_back(d.meta(i).id + "#" + std::to_string(s + 1));
    } else {
        for (int i = 0; i < d.n(); ++i) header.push_back(d.meta(i).id);
    }
    w.row(header);
    const std::size_t n_bins = d.mz().size();
    for (std::size_t b = 0; b < n_bins; ++b) {
        std::vector<std::string> row{format_double(d.mz()[b])};
        if (d.has_spots()) {
            for (int i = 0; i < d.n(); ++i)
                for (const auto& spot : d.spots(i)) row.push_back(format_double(spot[b]));
        } else {
            for (int i = 0; i < d.n(); ++i)
                row.push_back(format_double(d.features()(i, static_cast<Eigen::Index>(b))));
        }
        w.row(row);
    }
}

inline void save_metadata_csv(const Dataset& d, const std::string& path) {
    CsvWriter w(path);
    w.row({"sample_id", "group", "stage", "plate", "day", "position", "week"});
    for (int i = 0; i < d.n(); ++i) {
        const auto& m = d.meta(i);
        w.row({m.id, std::to_string(m.group), m.stage ? std::to_string(*m.stage) : "",
               std::to_string(m.plate), std::to_string(m.day), std::to_string(m.position),
               std::to_string(m.week)});
    }
}

} // namespace msdcv
