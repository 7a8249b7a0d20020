// msdcv: validated diagnostic classification of binned mass spectra.
// Subcommands cover the full workflow: design, synth, preprocess, dcv,
// permute, reduce, explore. Every run writes a manifest next to its primary
// output; all randomness flows from explicit --seed flags.

#include "msdcv/design.hpp"
#include "msdcv/double_cv.hpp"
#include "msdcv/permutation.hpp"
#include "msdcv/posthoc.hpp"
#include "msdcv/preprocess.hpp"
#include "msdcv/report_io.hpp"
#include "msdcv/synthgen.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

namespace {

using namespace msdcv;

constexpr const char* kVersion = "0.1.0";

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

/// Audit-trail record for one run. The timestamp is the one volatile field
/// and is isolated under its own key.
void write_manifest(const std::string& anchor_path, const std::string& subcommand,
                    const Json& arguments, const std::vector<std::string>& outputs) {
    Json m;
    m["tool"] = "msdcv";
    m["version"] = kVersion;
    m["subcommand"] = subcommand;
    m["arguments"] = arguments;
    m["outputs"] = outputs;
    m["timestamp"] = iso_timestamp();
    write_json(m, anchor_path + ".manifest.json");
}

Json load_json(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cli: cannot open '" + path + "'");
    Json j;
    in >> j;
    return j;
}

PreprocessConfig preprocess_config_from_json(const Json& j) {
    PreprocessConfig cfg;
    cfg.w_min = j.value("w_min", cfg.w_min);
    cfg.w_max = j.value("w_max", cfg.w_max);
    cfg.baseline_lambda = j.value("baseline_lambda", cfg.baseline_lambda);
    cfg.baseline_asymmetry = j.value("baseline_asymmetry", cfg.baseline_asymmetry);
    cfg.baseline_iterations = j.value("baseline_iterations", cfg.baseline_iterations);
    cfg.log_alpha = j.value("log_alpha", cfg.log_alpha);
    cfg.log_beta = j.value("log_beta", cfg.log_beta);
    cfg.validate();
    return cfg;
}

Json preprocess_config_to_json(const PreprocessConfig& cfg) {
    return Json{{"w_min", cfg.w_min},
                {"w_max", cfg.w_max},
                {"baseline_lambda", cfg.baseline_lambda},
                {"baseline_asymmetry", cfg.baseline_asymmetry},
                {"baseline_iterations", cfg.baseline_iterations},
                {"log_alpha", cfg.log_alpha},
                {"log_beta", cfg.log_beta}};
}

DesignSpec design_spec_from_json(const Json& j) {
    DesignSpec spec;
    spec.class_sizes = j.at("class_sizes").get<std::vector<int>>();
    if (j.contains("strata")) {
        for (const auto& s : j.at("strata"))
            spec.strata.push_back(s.is_null() ? std::vector<int>{} : s.get<std::vector<int>>());
    }
    spec.plates = j.at("plates").get<int>();
    spec.positions_per_plate = j.at("positions_per_plate").get<int>();
    if (j.contains("plate_day")) spec.plate_day = j.at("plate_day").get<std::vector<int>>();
    return spec;
}

SynthSpec synth_spec_from_json(const Json& j) {
    SynthSpec spec;
    spec.n_cases = j.at("n_cases").get<int>();
    spec.n_controls = j.at("n_controls").get<int>();
    spec.mz_min = j.value("mz_min", spec.mz_min);
    spec.mz_max = j.value("mz_max", spec.mz_max);
    spec.raw_width_min = j.value("raw_width_min", spec.raw_width_min);
    spec.raw_width_max = j.value("raw_width_max", spec.raw_width_max);
    for (const auto& pk : j.at("peaks")) {
        SynthPeak p;
        p.mz = pk.at("mz").get<double>();
        p.sigma = pk.at("sigma").get<double>();
        p.amplitude = pk.at("amplitude").get<double>();
        p.amp_sd = pk.value("amp_sd", 0.0);
        p.delta = pk.value("delta", 0.0);
        spec.peaks.push_back(p);
    }
    spec.baseline_amplitude = j.value("baseline_amplitude", 0.0);
    spec.plate_sd = j.value("plate_sd", 0.0);
    spec.day_sd = j.value("day_sd", 0.0);
    spec.week_noise_sd = j.value("week_noise_sd", 0.0);
    spec.spot_noise_sd = j.value("spot_noise_sd", 0.0);
    spec.spots = j.value("spots", 4);
    spec.plates = j.value("plates", 3);
    spec.positions_per_plate = j.value("positions_per_plate", 0);
    spec.week2_drop_plate = j.value("week2_drop_plate", 0);
    return spec;
}

TuningGrid grid_from_flags(const std::string& method, const std::string& grid_flag) {
    const RegKind kind = reg_kind_from_string(method);
    TuningGrid grid;
    grid.kind = kind;
    if (!grid_flag.empty()) {
        std::vector<std::string> parts = split_csv_line(grid_flag);
        for (const auto& part : parts) {
            if (is_pca_kind(kind))
                grid.ks.push_back(static_cast<int>(parse_long(part, "cli: grid value")));
            else if (kind == RegKind::Ridge)
                grid.gammas.push_back(parse_double(part, "cli: grid value"));
            else
                throw InvalidInput("cli: --grid is not accepted for method '" + method + "'");
        }
    }
    grid.canonicalize();
    return grid;
}

int cmd_design(const std::string& spec_path, std::uint64_t seed, const std::string& out) {
    DesignSpec spec = design_spec_from_json(load_json(spec_path));
    spec.seed = seed;
    const DesignTable table = allocate(spec);
    CsvWriter w(out);
    w.row({"sample_id", "group", "stage", "plate", "day", "position"});
    for (const auto& r : table)
        w.row({r.sample_id, std::to_string(r.group), r.stage ? std::to_string(*r.stage) : "",
               std::to_string(r.plate), std::to_string(r.day), std::to_string(r.position)});

    const BalanceReport report = validate_design(table);
    std::cout << "design: " << table.size() << " samples on " << report.plate_sizes.size()
              << " plates; balance " << (report.pass ? "ok" : "FAILED")
              << " (max deviation " << report.max_deviation << ")\n";
    for (const auto& warn : report.warnings) std::cout << "design: warning: " << warn << "\n";
    write_manifest(out, "design",
                   Json{{"spec", spec_path}, {"seed", seed}, {"out", out}}, {out});
    return report.pass ? 0 : 1;
}

int cmd_synth(const std::string& spec_path, std::uint64_t seed, const std::string& prefix) {
    SynthSpec spec = synth_spec_from_json(load_json(spec_path));
    spec.seed = seed;
    const SynthResult result = generate(spec);

    const std::string w1s = prefix + "week1_spectra.csv";
    const std::string w1m = prefix + "week1_metadata.csv";
    const std::string w2s = prefix + "week2_spectra.csv";
    const std::string w2m = prefix + "week2_metadata.csv";
    const std::string truth = prefix + "truth.json";
    save_spectra_csv(result.week1, w1s);
    save_metadata_csv(result.week1, w1m);
    save_spectra_csv(result.week2, w2s);
    save_metadata_csv(result.week2, w2m);

    Json tj;
    tj["contrast_peaks"] = Json::array();
    for (const auto& cp : result.truth.contrast_peaks)
        tj["contrast_peaks"].push_back(Json{{"mz", cp.mz},
                                            {"sigma", cp.sigma},
                                            {"delta", cp.delta},
                                            {"mz_lo", cp.mz_lo},
                                            {"mz_hi", cp.mz_hi},
                                            {"raw_from", cp.raw_from + 1},
                                            {"raw_to", cp.raw_to + 1}});
    write_json(tj, truth);
    std::cout << "synth: wrote " << result.week1.n() << " week-1 samples, " << result.week2.n()
              << " week-2 replicates, " << result.week1.mz().size() << " raw bins\n";
    write_manifest(prefix + "synth", "synth",
                   Json{{"spec", spec_path}, {"seed", seed}, {"out_prefix", prefix}},
                   {w1s, w1m, w2s, w2m, truth});
    return 0;
}

int cmd_preprocess(const std::string& in, const std::string& meta, const std::string& config,
                   const std::string& out, std::string plan_out) {
    PreprocessConfig cfg;
    if (!config.empty()) cfg = preprocess_config_from_json(load_json(config));
    const Dataset raw = load_dataset(in, meta);
    const Dataset processed = preprocess_dataset(raw, cfg);
    save_spectra_csv(processed, out);
    std::vector<std::string> outputs{out};
    if (plan_out.empty()) plan_out = out + ".plan.csv";
    write_bin_plan_csv(*processed.bin_plan(), plan_out);
    outputs.push_back(plan_out);
    std::cout << "preprocess: " << processed.n() << " samples, " << raw.mz().size()
              << " raw bins -> " << processed.p() << " aggregated bins\n";
    Json args{{"in", in}, {"meta", meta}, {"out", out}, {"plan", plan_out}};
    args["config"] = preprocess_config_to_json(cfg);
    write_manifest(out, "preprocess", args, outputs);
    return 0;
}

int cmd_dcv(const std::string& in, const std::string& meta, const std::string& method,
            const std::string& grid_flag, const std::string& replicates,
            const std::string& replicates_meta, const std::string& out,
            const std::string& per_sample, const std::string& per_sample_replicates,
            const std::string& summary_csv, int threads) {
    const TuningGrid grid = grid_from_flags(method, grid_flag);
    EngineOptions opts;
    opts.threads = threads;
    const Dataset week1 = load_dataset(in, meta);

    const DoubleCvResult res = double_cv(week1, grid, opts);
    Json j;
    j["method"] = method;
    j["week1"] = to_json(res.report);

    std::vector<std::string> outputs{out};
    if (!per_sample.empty()) {
        write_per_sample_csv(res.report, per_sample);
        outputs.push_back(per_sample);
    }
    if (!summary_csv.empty()) {
        write_report_csv(res.report, summary_csv);
        outputs.push_back(summary_csv);
    }
    std::cout << "dcv week 1: T " << res.report.t << " (Se " << res.report.se << ", Sp "
              << res.report.sp << ") B " << res.report.brier_distance << " AUC "
              << res.report.auc_percent << "\n";

    if (!replicates.empty()) {
        require(!replicates_meta.empty(), "cli: --replicates needs --replicates-meta");
        const Dataset week2 = load_dataset(replicates, replicates_meta);
        const auto pair = pair_replicates(week1, week2);
        const DoubleCvResult swap = replicate_swap_eval(pair, grid, opts);
        j["week2_swap"] = to_json(swap.report);
        j["week2_overlap"] = pair.overlap();
        if (!per_sample_replicates.empty()) {
            write_per_sample_csv(swap.report, per_sample_replicates);
            outputs.push_back(per_sample_replicates);
        }
        std::cout << "dcv week 2 (replicate swap, " << pair.overlap() << " samples): T "
                  << swap.report.t << " (Se " << swap.report.se << ", Sp " << swap.report.sp
                  << ") B " << swap.report.brier_distance << " AUC "
                  << swap.report.auc_percent << "\n";
    }
    write_json(j, out);
    write_manifest(out, "dcv",
                   Json{{"in", in},
                        {"meta", meta},
                        {"method", method},
                        {"grid", grid_flag},
                        {"replicates", replicates},
                        {"threads", threads}},
                   outputs);
    return 0;
}

int cmd_permute(const std::string& in, const std::string& meta, const std::string& method,
                const std::string& grid_flag, int reps, std::uint64_t seed,
                const std::string& out, std::string per_rep, bool stratify,
                int threads) {
    const TuningGrid grid = grid_from_flags(method, grid_flag);
    PermutationOptions opts;
    opts.stratify_by_plate = stratify;
    opts.threads = threads;
    const Dataset data = load_dataset(in, meta);
    const PermutationSummary summary = permutation_study(data, grid, reps, seed, opts);

    Json j = to_json(summary);
    j["method"] = method;
    write_json(j, out);
    std::vector<std::string> outputs{out};
    if (per_rep.empty()) per_rep = out + ".reps.csv";
    write_per_replication_csv(summary, per_rep);
    outputs.push_back(per_rep);
    std::cout << "permute: R " << reps << "; median misclassification "
              << summary.median.misclassification << " [" << summary.q025.misclassification
              << ", " << summary.q975.misclassification << "], median AUC "
              << summary.median.auc << " [" << summary.q025.auc << ", " << summary.q975.auc
              << "]\n";
    write_manifest(out, "permute",
                   Json{{"in", in},
                        {"meta", meta},
                        {"method", method},
                        {"grid", grid_flag},
                        {"reps", reps},
                        {"seed", seed},
                        {"stratify_plate", stratify},
                        {"threads", threads}},
                   outputs);
    return 0;
}

int cmd_reduce(const std::string& in, const std::string& meta, const std::string& out) {
    const Dataset data = load_dataset(in, meta);
    const BinSelection sel = reduce_bins(data);
    // upper edges from the next lower edge; the final one extrapolates
    std::vector<double> lower = data.mz();
    std::vector<double> upper(lower.size());
    for (std::size_t b = 0; b + 1 < lower.size(); ++b) upper[b] = lower[b + 1];
    if (lower.size() >= 2)
        upper.back() = lower.back() + (lower.back() - lower[lower.size() - 2]);
    else
        upper.back() = lower.back() + 1.0;
    write_selection_csv(sel, lower, upper, out);
    std::cout << "reduce: " << sel.indices.size() << " bins in " << sel.clusters.size()
              << " clusters (variance threshold " << sel.v_ref << ")\n";
    write_manifest(out, "reduce", Json{{"in", in}, {"meta", meta}, {"out", out}}, {out});
    return 0;
}

int cmd_explore(const std::string& in, const std::string& meta, const std::string& selection,
                int k, const std::string& contrast_flag, const std::string& prefix) {
    const Dataset data = load_dataset(in, meta);
    BinSelection sel;
    const BinSelection* sel_ptr = nullptr;
    if (!selection.empty()) {
        const auto rows = read_csv(selection);
        require(rows.size() >= 2 && !rows[0].empty() && rows[0][0] == "bin",
                "cli: selection file must come from the reduce subcommand");
        for (std::size_t r = 1; r < rows.size(); ++r)
            sel.indices.push_back(static_cast<int>(parse_long(rows[r][0], "cli: bin")) - 1);
        sel_ptr = &sel;
    }
    const ExplorationOutput out = correlation_map(data, k, sel_ptr);
    if (out.max_abs_rho > 1.0 + 1e-9)
        std::cout << "explore: warning: |rho| exceeds 1 (max " << out.max_abs_rho << ")\n";

    std::vector<std::string> outputs;
    {
        CsvWriter w(prefix + "correlation.csv");
        w.row({"bin", "mz", "rho"});
        for (std::size_t j = 0; j < out.bins.size(); ++j)
            w.row({std::to_string(out.bins[j] + 1), format_double(out.mz[j]),
                   format_double(out.rho[j])});
        outputs.push_back(prefix + "correlation.csv");
    }
    {
        CsvWriter w(prefix + "components.csv");
        w.row({"bin", "mz", "pc1", "pc2"});
        for (std::size_t j = 0; j < out.bins.size(); ++j)
            w.row({std::to_string(out.bins[j] + 1), format_double(out.mz[j]),
                   format_double(out.component_loadings(static_cast<Eigen::Index>(j), 0)),
                   format_double(out.component_loadings(static_cast<Eigen::Index>(j), 1))});
        outputs.push_back(prefix + "components.csv");
    }
    {
        CsvWriter w(prefix + "scores.csv");
        w.row({"sample_id", "group", "pc1", "pc2"});
        for (int i = 0; i < data.n(); ++i)
            w.row({data.meta(i).id, std::to_string(data.meta(i).group),
                   format_double(out.component_scores(i, 0)),
                   format_double(out.component_scores(i, 1))});
        outputs.push_back(prefix + "scores.csv");
    }
    {
        CsvWriter w(prefix + "group_means.csv");
        w.row({"bin", "mz", "mean_cases", "mean_controls"});
        for (std::size_t j = 0; j < out.bins.size(); ++j)
            w.row({std::to_string(out.bins[j] + 1), format_double(out.mz[j]),
                   format_double(out.group_means(0, static_cast<Eigen::Index>(j))),
                   format_double(out.group_means(1, static_cast<Eigen::Index>(j)))});
        outputs.push_back(prefix + "group_means.csv");
    }
    if (!contrast_flag.empty()) {
        const auto parts = split_csv_line(contrast_flag);
        require(parts.size() == 2, "cli: --contrast expects two 1-based bin indices");
        const int a = static_cast<int>(parse_long(parts[0], "cli: contrast bin")) - 1;
        const int b = static_cast<int>(parse_long(parts[1], "cli: contrast bin")) - 1;
        const auto rows = contrast(data, a, b);
        CsvWriter w(prefix + "contrast.csv");
        w.row({"sample_id", "group", "contrast"});
        for (const auto& row : rows)
            w.row({row.sample_id, std::to_string(row.group), format_double(row.value)});
        outputs.push_back(prefix + "contrast.csv");
    }
    std::cout << "explore: " << out.bins.size() << " bins, max |rho| " << out.max_abs_rho
              << "\n";
    write_manifest(prefix + "explore", "explore",
                   Json{{"in", in},
                        {"meta", meta},
                        {"selection", selection},
                        {"k", k},
                        {"contrast", contrast_flag},
                        {"out_prefix", prefix}},
                   outputs);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"validated diagnostic classification of binned mass spectra"};
    app.require_subcommand(1);

    // design
    auto* design = app.add_subcommand("design", "randomized block design allocation");
    std::string design_spec, design_out = "design.csv";
    std::uint64_t design_seed = 0;
    design->add_option("--spec", design_spec, "design spec JSON")->required();
    design->add_option("--seed", design_seed, "random seed")->required();
    design->add_option("--out", design_out, "output CSV");

    // synth
    auto* synth = app.add_subcommand("synth", "synthetic spot-level spectra with known truth");
    std::string synth_spec, synth_prefix = "synth_";
    std::uint64_t synth_seed = 0;
    synth->add_option("--spec", synth_spec, "generator spec JSON")->required();
    synth->add_option("--seed", synth_seed, "random seed")->required();
    synth->add_option("--out-prefix", synth_prefix, "prefix for the output files");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "within-sample preprocessing chain");
    std::string pre_in, pre_meta, pre_config, pre_out = "processed.csv", pre_plan;
    pre->add_option("--in", pre_in, "spectra CSV (spot-level or plain)")->required();
    pre->add_option("--meta", pre_meta, "metadata CSV")->required();
    pre->add_option("--config", pre_config, "preprocessing config JSON");
    pre->add_option("--out", pre_out, "processed wide CSV");
    pre->add_option("--plan", pre_plan, "bin plan CSV (default <out>.plan.csv)");

    // dcv
    auto* dcv = app.add_subcommand("dcv", "double cross-validated evaluation");
    std::string dcv_in, dcv_meta, dcv_method = "pca", dcv_grid, dcv_repl, dcv_repl_meta;
    std::string dcv_out = "report.json", dcv_ps, dcv_ps_repl, dcv_summary;
    int dcv_threads = 0;
    dcv->add_option("--in", dcv_in, "processed week-1 spectra CSV")->required();
    dcv->add_option("--meta", dcv_meta, "metadata CSV")->required();
    dcv->add_option("--method", dcv_method, "mp|pca|mp-euclid|pca-euclid|ridge");
    dcv->add_option("--grid", dcv_grid, "comma-separated tuning values (k or gamma)");
    dcv->add_option("--replicates", dcv_repl, "processed week-2 spectra CSV");
    dcv->add_option("--replicates-meta", dcv_repl_meta, "week-2 metadata CSV");
    dcv->add_option("--out", dcv_out, "report JSON");
    dcv->add_option("--per-sample", dcv_ps, "per-sample CSV");
    dcv->add_option("--per-sample-replicates", dcv_ps_repl, "week-2 per-sample CSV");
    dcv->add_option("--summary-csv", dcv_summary, "one-row summary CSV (t,se,sp,brier,auc)");
    dcv->add_option("--threads", dcv_threads, "worker cap (0 = hardware)");

    // permute
    auto* perm = app.add_subcommand("permute", "label-permutation bias audit");
    std::string perm_in, perm_meta, perm_method = "pca", perm_grid;
    std::string perm_out = "permutation.json", perm_rep_csv;
    int perm_reps = 600, perm_threads = 0;
    std::uint64_t perm_seed = 0;
    bool perm_stratify = false;
    perm->add_option("--in", perm_in, "processed spectra CSV")->required();
    perm->add_option("--meta", perm_meta, "metadata CSV")->required();
    perm->add_option("--method", perm_method, "mp|pca|mp-euclid|pca-euclid|ridge");
    perm->add_option("--grid", perm_grid, "comma-separated tuning values");
    perm->add_option("--reps", perm_reps, "number of permutations");
    perm->add_option("--seed", perm_seed, "random seed")->required();
    perm->add_option("--out", perm_out, "summary JSON");
    perm->add_option("--per-rep", perm_rep_csv, "per-replication CSV (default <out>.reps.csv)");
    perm->add_flag("--stratify-plate", perm_stratify, "shuffle labels within plates");
    perm->add_option("--threads", perm_threads, "worker cap (0 = hardware)");

    // reduce
    auto* reduce = app.add_subcommand("reduce", "variance-seeded bin-cluster selection");
    std::string red_in, red_meta, red_out = "selection.csv";
    reduce->add_option("--in", red_in, "processed spectra CSV")->required();
    reduce->add_option("--meta", red_meta, "metadata CSV")->required();
    reduce->add_option("--out", red_out, "selection CSV");

    // explore
    auto* explore = app.add_subcommand("explore", "discriminant correlation exploration");
    std::string exp_in, exp_meta, exp_sel, exp_contrast, exp_prefix = "explore_";
    int exp_k = 2;
    explore->add_option("--in", exp_in, "processed spectra CSV")->required();
    explore->add_option("--meta", exp_meta, "metadata CSV")->required();
    explore->add_option("--selection", exp_sel, "selection CSV from reduce");
    explore->add_option("--k", exp_k, "component count for the euclidean fit");
    explore->add_option("--contrast", exp_contrast, "two 1-based bins, e.g. 120,310");
    explore->add_option("--out-prefix", exp_prefix, "prefix for the output files");

    CLI11_PARSE(app, argc, argv);

    try {
        if (design->parsed()) return cmd_design(design_spec, design_seed, design_out);
        if (synth->parsed()) return cmd_synth(synth_spec, synth_seed, synth_prefix);
        if (pre->parsed()) return cmd_preprocess(pre_in, pre_meta, pre_config, pre_out, pre_plan);
        if (dcv->parsed())
            return cmd_dcv(dcv_in, dcv_meta, dcv_method, dcv_grid, dcv_repl, dcv_repl_meta,
                           dcv_out, dcv_ps, dcv_ps_repl, dcv_summary, dcv_threads);
        if (perm->parsed())
            return cmd_permute(perm_in, perm_meta, perm_method, perm_grid, perm_reps, perm_seed,
                               perm_out, perm_rep_csv, perm_stratify, perm_threads);
        if (reduce->parsed()) return cmd_reduce(red_in, red_meta, red_out);
        if (explore->parsed())
            return cmd_explore(exp_in, exp_meta, exp_sel, exp_k, exp_contrast, exp_prefix);
    } catch (const std::exception& err) {
        std::cerr << "msdcv: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
