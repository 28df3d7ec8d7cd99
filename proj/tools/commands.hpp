#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include "fusedpath/fusedpath.hpp"

namespace fusedpath::cli {

namespace fs = std::filesystem;

struct RunConfig {
    std::string data;
    std::string schema;  // optional
    std::string out = "out";
    FitConfig fit;
    std::size_t k = 5;
    std::uint64_t seed = 1;
    std::optional<StarThresholds> thresholds;
    std::string host = "127.0.0.1";
    int port = 8080;
};

/// Input after ingest, masking and standardization.
struct Prepared {
    Dataset raw;
    Dataset standardized;
    StandardizationStats stats;
    FusedProblem problem;
};

inline std::ifstream open_input(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(std::string("cannot open ") + what + " '" + path + "'");
    return in;
}

inline Dataset load_raw(const RunConfig& cfg, std::ostream& log) {
    if (cfg.data.empty()) throw UsageError("--data is required");
    Schema schema;
    if (!cfg.schema.empty()) {
        auto in = open_input(cfg.schema, "schema file");
        schema = parse_schema(in);
    }
    auto in = open_input(cfg.data, "data file");
    Dataset ds = ingest(read_csv(in), schema);
    if (ds.dropped_rows) log << "note: dropped " << ds.dropped_rows << " rows with a missing response\n";
    if (schema.mask_missing) ds = apply_missingness_mask(std::move(ds));
    for (const auto& w : ds.warnings) log << "warning: " << w << '\n';
    return ds;
}

inline Prepared prepare(const RunConfig& cfg, std::ostream& log) {
    cfg.fit.validate();
    Dataset raw = load_raw(cfg, log);
    auto [standardized, stats] = standardize(raw);
    std::size_t deleted = 0;
    auto designs = build_designs(standardized, &deleted);
    if (deleted) log << "note: " << deleted << " rows deleted listwise for residual missing values\n";
    FusedProblem problem(std::move(designs), standardized.classes, standardized.p());
    return {std::move(raw), std::move(standardized), std::move(stats), std::move(problem)};
}

inline fs::path output_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory '" + cfg.out + "'");
    return dir;
}

inline std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    return out;
}

inline void write_json(const fs::path& path, const Json& j) { open_output(path) << j.dump(2) << '\n'; }

/// summary_stats.csv, class_sizes.csv, missingness.csv
inline int cmd_summarize(const RunConfig& cfg, std::ostream& log) {
    const Dataset ds = load_raw(cfg, log);
    const auto dir = output_dir(cfg);
    const auto report = summarize(ds);
    {
        auto out = open_output(dir / "summary_stats.csv");
        write_summary_csv(out, report);
    }
    {
        auto out = open_output(dir / "class_sizes.csv");
        write_class_sizes_csv(out, report);
    }
    {
        auto out = open_output(dir / "missingness.csv");
        write_missingness_csv(out, report);
    }
    log << "wrote summary for " << ds.n() << " rows, " << ds.num_classes() << " classes to " << dir.string() << '\n';
    return 0;
}

inline void log_path(const PathResult& path, std::ostream& log) {
    log << "lambda_max = " << format_double(path.lambda_max) << '\n';
    for (const auto& w : path.warnings) log << "warning: " << w << '\n';
    for (std::size_t k = path.points.size(); k-- > 0;) {
        const auto& pt = path.points[k];
        log << "  lambda " << format_double(pt.lambda) << ": df " << pt.df << ", iterations " << pt.iterations
            << ", primal " << format_double(pt.primal_residual) << ", dual " << format_double(pt.dual_residual)
            << (pt.polished ? ", polished" : "") << '\n';
    }
}

/// path.csv, lambda_grid.json
inline int cmd_path(const RunConfig& cfg, std::ostream& log) {
    const auto prep = prepare(cfg, log);
    const auto dir = output_dir(cfg);
    const PathResult path = solve_path(prep.problem, cfg.fit);
    log_path(path, log);
    {
        auto out = open_output(dir / "path.csv");
        write_path_csv(out, prep.standardized, prep.stats, prep.problem, path);
    }
    write_json(dir / "lambda_grid.json", grid_json(path));
    return 0;
}

struct Fitted {
    PathResult path;
    CvReport cv;
    AicCurve aic;
};

inline Fitted fit_all(const Prepared& prep, const RunConfig& cfg, std::ostream& log) {
    Fitted f;
    f.path = solve_path(prep.problem, cfg.fit);
    log << "lambda_max = " << format_double(f.path.lambda_max) << '\n';
    for (const auto& w : f.path.warnings) log << "warning: " << w << '\n';
    f.cv = cv_select(prep.standardized, f.path.grid(), cfg.fit, cfg.k, cfg.seed);
    for (const auto& w : f.cv.warnings) log << "warning: " << w << '\n';
    f.aic = aic_select(f.path, prep.problem.n());
    log << "cv selected lambda = " << format_double(f.cv.selected_lambda()) << " (MAE "
        << format_double(f.cv.mae[f.cv.selected]) << "), aic selected lambda = "
        << format_double(f.aic.lambda[f.aic.best]) << '\n';
    return f;
}

/// cv_folds.csv, cv_curve.csv, aic.csv, selection.json, model_cv_selected.json, model_aic_selected.json
inline int cmd_cv(const RunConfig& cfg, std::ostream& log) {
    const auto prep = prepare(cfg, log);
    const auto dir = output_dir(cfg);
    const auto fitted = fit_all(prep, cfg, log);
    {
        auto out = open_output(dir / "cv_folds.csv");
        write_cv_folds_csv(out, prep.standardized, fitted.cv);
    }
    {
        auto out = open_output(dir / "cv_curve.csv");
        write_cv_curve_csv(out, fitted.cv);
    }
    {
        auto out = open_output(dir / "aic.csv");
        write_aic_csv(out, fitted.aic);
    }
    write_json(dir / "selection.json", cv_json(prep.standardized, fitted.cv, fitted.aic));
    write_json(dir / "model_cv_selected.json",
               model_json(prep.standardized, prep.stats, prep.problem, fitted.path, fitted.cv.selected));
    write_json(dir / "model_aic_selected.json",
               model_json(prep.standardized, prep.stats, prep.problem, fitted.path, fitted.aic.best));
    return 0;
}

inline constexpr const char* kMethodCv = "CV selected";
inline constexpr const char* kMethodNewPooled = "new pooled";
inline constexpr const char* kMethodClassicPooled = "classic pooled";
inline constexpr const char* kMethodSeparate = "separate";

/// Out-of-fold predictions of the four methods, evaluated per class.
inline MethodComparison compare_methods(const Dataset& ds, const CvReport& cv, const StarThresholds& thresholds) {
    const std::vector<double> truths(ds.response.data(), ds.response.data() + ds.response.size());
    auto column = [&](Eigen::Index c) {
        const Eigen::VectorXd v = cv.predictions.col(c);
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    MethodComparison cmp;
    auto add = [&](const char* name, const std::vector<double>& pred) {
        cmp.methods.emplace_back(name);
        cmp.reports.push_back(per_class_report(pred, truths, ds.row_class, ds.classes, thresholds));
    };
    add(kMethodCv, column(static_cast<Eigen::Index>(cv.selected)));
    add(kMethodNewPooled, column(static_cast<Eigen::Index>(cv.grid.size() - 1)));
    add(kMethodClassicPooled, std::vector<double>(cv.classic_pooled_predictions.data(),
                                                 cv.classic_pooled_predictions.data() + cv.classic_pooled_predictions.size()));
    add(kMethodSeparate, column(0));
    return cmp;
}

/// evaluation.csv, confusion.csv, evaluation.json
inline int cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
    if (!cfg.thresholds) throw UsageError("--thresholds t3,t4,t5 is required for evaluate");
    const auto prep = prepare(cfg, log);
    const auto dir = output_dir(cfg);
    const auto fitted = fit_all(prep, cfg, log);
    const auto cmp = compare_methods(prep.standardized, fitted.cv, *cfg.thresholds);
    {
        auto out = open_output(dir / "evaluation.csv");
        write_comparison_csv(out, cmp);
    }
    {
        auto out = open_output(dir / "confusion.csv");
        write_confusion_csv(out, cmp);
    }
    Json j = evaluation_json(cmp, *cfg.thresholds);
    j["k"] = cfg.k;
    j["seed"] = cfg.seed;
    j["cv_selected_lambda"] = fitted.cv.selected_lambda();
    write_json(dir / "evaluation.json", j);
    return 0;
}

} // namespace fusedpath::cli
