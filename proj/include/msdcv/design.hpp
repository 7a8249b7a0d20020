#pragma once

#include "msdcv/common.hpp"
#include "msdcv/rng.hpp"

#include <map>
#include <numeric>
#include <optional>

namespace msdcv {

// Randomized block design: samples from every group (and every disease stage
// within the cases) are spread across plates in as-equal-as-possible counts,
// positions within a plate are randomized, and each plate maps to one day.
// Batch effects then cannot masquerade as group separation.

struct DesignSpec {
    std::vector<int> class_sizes;            // per group, group 1 first
    std::vector<std::vector<int>> strata;    // per group; empty inner = unstratified
    int plates = 0;
    int positions_per_plate = 0;
    std::vector<int> plate_day;              // day per plate; empty = 1..plates
    std::uint64_t seed = 0;

    void validate() const {
        require(!class_sizes.empty(), "design: no groups");
        for (int s : class_sizes) require(s >= 1, "design: empty group");
        require(plates >= 1, "design: need at least one plate");
        require(positions_per_plate >= 1, "design: need at least one position per plate");
        const long total = std::accumulate(class_sizes.begin(), class_sizes.end(), 0L);
        require(total <= static_cast<long>(plates) * positions_per_plate,
                "design: capacity exceeded");
        if (!strata.empty()) {
            require(strata.size() == class_sizes.size(), "design: strata per group mismatch");
            for (std::size_t g = 0; g < strata.size(); ++g) {
                if (strata[g].empty()) continue;
                const long sum = std::accumulate(strata[g].begin(), strata[g].end(), 0L);
                require(sum == class_sizes[g],
                        "design: strata counts do not sum to the group total");
                for (int s : strata[g]) require(s >= 0, "design: negative stratum count");
            }
        }
        if (!plate_day.empty()) {
            require(static_cast<int>(plate_day.size()) == plates,
                    "design: one day per plate required");
            std::vector<int> days = plate_day;
            std::sort(days.begin(), days.end());
            require(std::adjacent_find(days.begin(), days.end()) == days.end(),
                    "design: plate-to-day assignment must be injective");
        }
    }
};

struct DesignRow {
    std::string sample_id;
    Label group = 0;
    std::optional<int> stage;
    int plate = 0;
    int day = 0;
    int position = 0;
};

using DesignTable = std::vector<DesignRow>;

/// Balanced-random allocation. Each class's samples are dealt round-robin
/// over a random plate order, stratum by stratum without resetting the deal,
/// so per-plate counts stay within 1 for every stratum and for the class
/// total alike; which plates receive the remainder is random through the
/// plate order. Samples are shuffled within each stratum first, so any
/// sample's plate is uniform within the balance constraints. Positions on a
/// plate are a random draw of distinct slots. Deterministic under seed.
inline DesignTable allocate(const DesignSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int g_count = static_cast<int>(spec.class_sizes.size());

    struct Member {
        Label group;
        std::optional<int> stage;
        int serial;
    };

    std::vector<std::vector<int>> plate_of_class(static_cast<std::size_t>(g_count));
    std::vector<std::vector<Member>> members_of_class(static_cast<std::size_t>(g_count));

    for (int attempt = 0;; ++attempt) {
        require(attempt < 1000,
                "design: cannot satisfy per-plate capacity; add positions or plates");
        std::vector<int> load(static_cast<std::size_t>(spec.plates), 0);
        for (int g = 0; g < g_count; ++g) {
            auto& members = members_of_class[static_cast<std::size_t>(g)];
            members.clear();
            const bool stratified =
                !spec.strata.empty() && !spec.strata[static_cast<std::size_t>(g)].empty();
            if (stratified) {
                const auto& st = spec.strata[static_cast<std::size_t>(g)];
                int serial = 0;
                for (std::size_t s = 0; s < st.size(); ++s) {
                    std::vector<Member> block;
                    for (int c = 0; c < st[s]; ++c)
                        block.push_back(Member{g + 1, static_cast<int>(s) + 1, ++serial});
                    rng.shuffle(block);
                    members.insert(members.end(), block.begin(), block.end());
                }
            } else {
                for (int c = 0; c < spec.class_sizes[static_cast<std::size_t>(g)]; ++c)
                    members.push_back(Member{g + 1, std::nullopt, c + 1});
                rng.shuffle(members);
            }

            const auto order = rng.permutation(spec.plates);
            auto& plate_of = plate_of_class[static_cast<std::size_t>(g)];
            plate_of.assign(members.size(), 0);
            for (std::size_t t = 0; t < members.size(); ++t) {
                const int pl = order[t % static_cast<std::size_t>(spec.plates)];
                plate_of[t] = pl;
                ++load[static_cast<std::size_t>(pl)];
            }
        }
        if (*std::max_element(load.begin(), load.end()) <= spec.positions_per_plate) break;
    }

    DesignTable table;
    std::vector<std::vector<std::size_t>> rows_of_plate(static_cast<std::size_t>(spec.plates));
    for (int g = 0; g < g_count; ++g) {
        const auto& members = members_of_class[static_cast<std::size_t>(g)];
        for (std::size_t t = 0; t < members.size(); ++t) {
            const int pl = plate_of_class[static_cast<std::size_t>(g)][t];
            DesignRow row;
            const std::string prefix = g_count == 2
                                           ? (members[t].group == 1 ? "case" : "ctrl")
                                           : "g" + std::to_string(members[t].group) + "s";
            char buf[8];
            std::snprintf(buf, sizeof(buf), "%03d", members[t].serial);
            row.sample_id = prefix + buf;
            row.group = members[t].group;
            row.stage = members[t].stage;
            row.plate = pl + 1;
            row.day = spec.plate_day.empty() ? pl + 1
                                             : spec.plate_day[static_cast<std::size_t>(pl)];
            rows_of_plate[static_cast<std::size_t>(pl)].push_back(table.size());
            table.push_back(row);
        }
    }
    for (int pl = 0; pl < spec.plates; ++pl) {
        const auto& rows = rows_of_plate[static_cast<std::size_t>(pl)];
        auto slots = rng.permutation(spec.positions_per_plate);
        for (std::size_t t = 0; t < rows.size(); ++t) table[rows[t]].position = slots[t] + 1;
    }
    return table;
}

/// Per-plate balance report. A group or stratum passes when every plate's
/// count is within 1 of its plate-size-proportional share (under equal plate
/// sizes that is the usual max-min <= 1 rule).
struct BalanceReport {
    struct Line {
        std::string what; // "group 1", "group 1 stage 2", ...
        std::vector<int> per_plate;
        double max_deviation = 0.0; // from the proportional share
        int spread = 0;             // max - min count
        bool pass = true;
    };
    std::vector<Line> lines;
    std::vector<int> plate_sizes;
    std::vector<std::string> warnings;
    bool pass = true;
    double max_deviation = 0.0;
};

inline BalanceReport validate_design(const DesignTable& table) {
    require(!table.empty(), "design: empty table");
    int n_plates = 0;
    for (const auto& row : table) {
        require(row.plate >= 1, "design: plate ids must be positive");
        n_plates = std::max(n_plates, row.plate);
    }
    BalanceReport report;
    report.plate_sizes.assign(static_cast<std::size_t>(n_plates), 0);
    for (const auto& row : table) ++report.plate_sizes[static_cast<std::size_t>(row.plate - 1)];
    const double n_total = static_cast<double>(table.size());
    for (int pl = 0; pl < n_plates; ++pl)
        if (report.plate_sizes[static_cast<std::size_t>(pl)] == 0)
            report.warnings.push_back("plate " + std::to_string(pl + 1) + " is empty");

    // distinct positions within each plate
    std::map<std::pair<int, int>, int> pos_seen;
    for (const auto& row : table)
        if (++pos_seen[{row.plate, row.position}] > 1) {
            report.warnings.push_back("duplicate position " + std::to_string(row.position) +
                                      " on plate " + std::to_string(row.plate));
            report.pass = false;
        }

    const auto add_line = [&](const std::string& what, const std::vector<int>& per_plate,
                              int total) {
        BalanceReport::Line line;
        line.what = what;
        line.per_plate = per_plate;
        int lo = per_plate[0], hi = per_plate[0];
        for (int pl = 0; pl < n_plates; ++pl) {
            const double share = static_cast<double>(total) *
                                 static_cast<double>(report.plate_sizes[static_cast<std::size_t>(pl)]) /
                                 n_total;
            const double dev = std::abs(static_cast<double>(per_plate[static_cast<std::size_t>(pl)]) - share);
            line.max_deviation = std::max(line.max_deviation, dev);
            lo = std::min(lo, per_plate[static_cast<std::size_t>(pl)]);
            hi = std::max(hi, per_plate[static_cast<std::size_t>(pl)]);
        }
        line.spread = hi - lo;
        line.pass = line.max_deviation < 1.0;
        report.max_deviation = std::max(report.max_deviation, line.max_deviation);
        if (!line.pass) report.pass = false;
        report.lines.push_back(std::move(line));
    };

    std::map<Label, std::vector<int>> group_counts;
    std::map<std::pair<Label, int>, std::vector<int>> stage_counts;
    std::map<Label, int> group_totals;
    std::map<std::pair<Label, int>, int> stage_totals;
    for (const auto& row : table) {
        auto& gc = group_counts[row.group];
        gc.resize(static_cast<std::size_t>(n_plates), 0);
        ++gc[static_cast<std::size_t>(row.plate - 1)];
        ++group_totals[row.group];
        if (row.stage) {
            auto& sc = stage_counts[{row.group, *row.stage}];
            sc.resize(static_cast<std::size_t>(n_plates), 0);
            ++sc[static_cast<std::size_t>(row.plate - 1)];
            ++stage_totals[{row.group, *row.stage}];
        }
    }
    for (auto& [g, counts] : group_counts) {
        counts.resize(static_cast<std::size_t>(n_plates), 0);
        add_line("group " + std::to_string(g), counts, group_totals[g]);
    }
    for (auto& [key, counts] : stage_counts) {
        counts.resize(static_cast<std::size_t>(n_plates), 0);
        add_line("group " + std::to_string(key.first) + " stage " + std::to_string(key.second),
                 counts, stage_totals[key]);
    }
    return report;
}

} // namespace msdcv
