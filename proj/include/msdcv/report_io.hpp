#pragma once

#include "msdcv/csv.hpp"
#include "msdcv/double_cv.hpp"
#include "msdcv/metrics.hpp"
#include "msdcv/permutation.hpp"
#include "msdcv/posthoc.hpp"

#include <json.hpp>

#include <fstream>

namespace msdcv {

using Json = nlohmann::json;

inline Json to_json(const ValidationReport& r) {
    Json j;
    j["n"] = r.n;
    j["n_cases"] = r.n_cases;
    j["n_controls"] = r.n_controls;
    j["t"] = r.t;
    j["se"] = r.se;
    j["sp"] = r.sp;
    j["brier"] = r.brier_distance;
    j["auc"] = r.auc_percent;
    return j;
}

inline Json to_json(const PermutationSummary& s) {
    const auto row = [](const PermutationSummary::Row& r) {
        return Json{{"misclassification", r.misclassification}, {"auc", r.auc}, {"brier", r.brier}};
    };
    Json j;
    j["replications"] = s.r;
    j["seed"] = s.seed;
    j["median"] = row(s.median);
    j["q2.5"] = row(s.q025);
    j["q97.5"] = row(s.q975);
    return j;
}

inline void write_json(const Json& j, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "report: cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

/// One-row CSV in result-table column order.
inline void write_report_csv(const ValidationReport& r, const std::string& path) {
    CsvWriter w(path);
    w.row({"t", "se", "sp", "brier", "auc"});
    w.row({format_double(r.t), format_double(r.se), format_double(r.sp),
           format_double(r.brier_distance), format_double(r.auc_percent)});
}

/// Per-sample validated results.
inline void write_per_sample_csv(const ValidationReport& r, const std::string& path) {
    CsvWriter w(path);
    w.row({"sample_id", "label", "p1", "allocation", "chosen_param"});
    for (std::size_t i = 0; i < r.sample_ids.size(); ++i)
        w.row({r.sample_ids[i], std::to_string(r.labels[i]), format_double(r.p_group1[i]),
               std::to_string(r.allocations[i]), format_double(r.chosen_param[i])});
}

inline void write_per_replication_csv(const PermutationSummary& s, const std::string& path) {
    CsvWriter w(path);
    w.row({"replication", "misclassification", "auc", "brier"});
    for (std::size_t i = 0; i < s.replications.size(); ++i)
        w.row({std::to_string(i + 1), format_double(s.replications[i].misclassification),
               format_double(s.replications[i].auc), format_double(s.replications[i].brier)});
}

inline void write_bin_plan_csv(const BinPlan& plan, const std::string& path) {
    CsvWriter w(path);
    w.row({"lower", "upper", "raw_from", "raw_to"});
    for (const auto& b : plan.bins)
        w.row({format_double(b.lower), format_double(b.upper), std::to_string(b.raw_from + 1),
               std::to_string(b.raw_to + 1)});
}

/// Selection export, 1-based bins, plot-ready.
inline void write_selection_csv(const BinSelection& sel, std::span<const double> lower_mz,
                                std::span<const double> upper_mz, const std::string& path) {
    CsvWriter w(path);
    w.row({"bin", "lower_mz", "upper_mz", "cluster_id"});
    for (int bin : sel.indices) {
        int cluster_id = 0;
        for (std::size_t c = 0; c < sel.clusters.size(); ++c)
            if (bin >= sel.clusters[c].from && bin <= sel.clusters[c].to) {
                cluster_id = static_cast<int>(c) + 1;
                break;
            }
        w.row({std::to_string(bin + 1), format_double(lower_mz[static_cast<std::size_t>(bin)]),
               format_double(upper_mz[static_cast<std::size_t>(bin)]),
               std::to_string(cluster_id)});
    }
}

} // namespace msdcv
