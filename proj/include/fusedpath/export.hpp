#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fusedpath/csv.hpp"
#include "fusedpath/data_model.hpp"
#include "fusedpath/evaluation.hpp"
#include "fusedpath/selection.hpp"
#include "fusedpath/solver.hpp"

namespace fusedpath {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "fusedpath/v1";
inline constexpr const char* kInterceptName = "(intercept)";

namespace detail {

inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json numbers(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

inline Json partition_json(const Dataset& ds, const FusionPartition& partition) {
    Json out = Json::object();
    for (std::size_t j = 0; j < partition.size(); ++j) {
        if (partition[j].empty()) continue;
        Json groups = Json::array();
        for (const auto& g : partition[j]) {
            Json members = Json::array();
            for (auto m : g) members.push_back(ds.classes[m]);
            groups.push_back(members);
        }
        out[ds.predictors[j].name] = groups;
    }
    return out;
}

inline Json coefficients_json(const Dataset& ds, const CoefficientLayout& layout, const Coefficients& coef,
                              const StandardizationStats& stats) {
    const Coefficients raw = to_raw_scale(layout, coef, stats);
    Json out = Json::array();
    for (std::size_t m = 0; m < layout.num_classes(); ++m) {
        Json c;
        c["class"] = ds.classes[m];
        c["intercept"] = number(coef.intercepts(static_cast<Eigen::Index>(m)));
        c["intercept_raw"] = number(raw.intercepts(static_cast<Eigen::Index>(m)));
        Json slopes = Json::object();
        for (auto j : layout.predictors(m)) {
            const auto col = layout.column(m, j);
            slopes[ds.predictors[j].name] = {{"standardized", number(coef.slopes(col))}, {"raw", number(raw.slopes(col))}};
        }
        c["slopes"] = slopes;
        out.push_back(c);
    }
    return out;
}

} // namespace detail

/// Classes, predictors and availability (structurally absent coefficients are false).
inline Json meta_json(const Dataset& ds, const StandardizationStats& stats) {
    Json out;
    out["schema"] = kSchemaVersion;
    Json classes = Json::array();
    for (std::size_t m = 0; m < ds.num_classes(); ++m) {
        Json masked = Json::array();
        for (auto j : ds.masked[m]) masked.push_back(ds.predictors[j].name);
        classes.push_back({{"id", ds.classes[m]}, {"n", ds.class_size(m)}, {"masked", masked}});
    }
    out["classes"] = classes;
    Json preds = Json::array();
    for (std::size_t j = 0; j < ds.p(); ++j)
        preds.push_back({{"name", ds.predictors[j].name},
                         {"variable", ds.predictors[j].variable},
                         {"mean", detail::number(stats.mean[j])},
                         {"scale", detail::number(stats.scale[j])}});
    out["predictors"] = preds;
    Json avail = Json::array();
    for (std::size_t m = 0; m < ds.num_classes(); ++m) {
        Json row = Json::array();
        for (std::size_t j = 0; j < ds.p(); ++j) row.push_back(static_cast<bool>(ds.available[m][j]));
        avail.push_back(row);
    }
    out["availability"] = avail;
    return out;
}

/// A single fitted model at a grid point: everything needed to score new raw observations.
inline Json model_json(const Dataset& ds, const StandardizationStats& stats, const FusedProblem& problem,
                       const PathResult& path, std::size_t index) {
    const auto& pt = path.points.at(index);
    Json out;
    out["schema"] = kSchemaVersion;
    out["lambda"] = pt.lambda;
    out["lambda_index"] = index;
    out["lambda_max"] = path.lambda_max;
    out["df"] = pt.df;
    out["rss"] = pt.rss;
    out["penalty"] = pt.penalty;
    Json standardization = Json::object();
    for (std::size_t j = 0; j < ds.p(); ++j)
        standardization[ds.predictors[j].name] = {{"mean", stats.mean[j]}, {"scale", stats.scale[j]}};
    out["standardization"] = standardization;
    Json layout = Json::array();
    for (std::size_t m = 0; m < problem.layout().num_classes(); ++m) {
        Json preds = Json::array();
        for (auto j : problem.layout().predictors(m)) preds.push_back(ds.predictors[j].name);
        layout.push_back({{"class", ds.classes[m]}, {"predictors", preds}});
    }
    out["layout"] = layout;
    out["coefficients"] = detail::coefficients_json(ds, problem.layout(), pt.coefficients, stats);
    out["partition"] = detail::partition_json(ds, pt.partition);
    return out;
}

/// Whole path with per-point diagnostics, coefficients and partitions.
inline Json path_json(const Dataset& ds, const StandardizationStats& stats, const FusedProblem& problem,
                      const PathResult& path) {
    Json out;
    out["schema"] = kSchemaVersion;
    out["lambda_max"] = path.lambda_max;
    out["grid"] = detail::numbers(path.grid());
    Json pts = Json::array();
    for (const auto& pt : path.points) {
        Json p;
        p["lambda"] = pt.lambda;
        p["df"] = pt.df;
        p["rss"] = pt.rss;
        p["penalty"] = pt.penalty;
        p["objective"] = pt.objective;
        p["iterations"] = pt.iterations;
        p["primal_residual"] = pt.primal_residual;
        p["dual_residual"] = pt.dual_residual;
        p["polished"] = pt.polished;
        p["coefficients"] = detail::coefficients_json(ds, problem.layout(), pt.coefficients, stats);
        p["partition"] = detail::partition_json(ds, pt.partition);
        pts.push_back(p);
    }
    out["points"] = pts;
    out["warnings"] = path.warnings;
    return out;
}

/// Grid and convergence diagnostics only.
inline Json grid_json(const PathResult& path) {
    Json out;
    out["schema"] = kSchemaVersion;
    out["lambda_max"] = path.lambda_max;
    out["grid"] = detail::numbers(path.grid());
    Json pts = Json::array();
    for (const auto& pt : path.points)
        pts.push_back({{"lambda", pt.lambda},
                       {"df", pt.df},
                       {"rss", pt.rss},
                       {"penalty", pt.penalty},
                       {"iterations", pt.iterations},
                       {"primal_residual", pt.primal_residual},
                       {"dual_residual", pt.dual_residual},
                       {"polished", pt.polished}});
    out["points"] = pts;
    return out;
}

/// Long format, ascending lambda; intercepts appear as predictor "(intercept)".
inline void write_path_csv(std::ostream& out, const Dataset& ds, const StandardizationStats& stats,
                           const FusedProblem& problem, const PathResult& path) {
    write_row(out, {"lambda", "class", "predictor", "coefficient_standardized", "coefficient_raw", "df", "rss", "penalty"});
    const auto& layout = problem.layout();
    for (const auto& pt : path.points) {
        const Coefficients raw = to_raw_scale(layout, pt.coefficients, stats);
        const auto lam = format_double(pt.lambda), df = std::to_string(pt.df), rss = format_double(pt.rss),
                   pen = format_double(pt.penalty);
        for (std::size_t m = 0; m < layout.num_classes(); ++m) {
            if (problem.designs()[m].n() == 0) continue;
            const auto i = static_cast<Eigen::Index>(m);
            write_row(out, {lam, ds.classes[m], kInterceptName, format_double(pt.coefficients.intercepts(i)),
                            format_double(raw.intercepts(i)), df, rss, pen});
            for (auto j : layout.predictors(m)) {
                const auto col = layout.column(m, j);
                write_row(out, {lam, ds.classes[m], ds.predictors[j].name, format_double(pt.coefficients.slopes(col)),
                                format_double(raw.slopes(col)), df, rss, pen});
            }
        }
    }
}

inline void write_aic_csv(std::ostream& out, const AicCurve& curve) {
    write_row(out, {"lambda", "aic", "df", "sigma2"});
    for (std::size_t k = 0; k < curve.lambda.size(); ++k)
        write_row(out, {format_double(curve.lambda[k]), format_double(curve.aic[k]), format_double(curve.df[k]),
                        format_double(curve.sigma2[k])});
}

inline void write_cv_folds_csv(std::ostream& out, const Dataset& ds, const CvReport& cv) {
    write_row(out, {"lambda", "fold", "class", "n_test", "mae", "mse"});
    for (const auto& e : cv.errors)
        write_row(out, {format_double(cv.grid[e.lambda_index]), std::to_string(e.fold + 1), ds.classes[e.class_index],
                        std::to_string(e.n_test), format_double(e.mae), format_double(e.mse)});
}

inline void write_cv_curve_csv(std::ostream& out, const CvReport& cv) {
    write_row(out, {"lambda", "mae", "mae_micro", "mse", "mse_micro"});
    for (std::size_t k = 0; k < cv.grid.size(); ++k)
        write_row(out, {format_double(cv.grid[k]), format_double(cv.mae[k]), format_double(cv.mae_micro[k]),
                        format_double(cv.mse[k]), format_double(cv.mse_micro[k])});
}

/// CV curve, AIC curve, both selections and the classic pooled reference error.
inline Json cv_json(const Dataset& ds, const CvReport& cv, const AicCurve& aic) {
    Json out;
    out["schema"] = kSchemaVersion;
    out["k"] = cv.k;
    out["seed"] = cv.seed;
    out["grid"] = detail::numbers(cv.grid);
    out["mae"] = detail::numbers(cv.mae);
    out["mae_micro"] = detail::numbers(cv.mae_micro);
    out["mse"] = detail::numbers(cv.mse);
    out["mse_micro"] = detail::numbers(cv.mse_micro);
    out["fold_mae"] = Json::array();
    for (const auto& row : cv.fold_mae) out["fold_mae"].push_back(detail::numbers(row));
    const auto classic = per_class_mae(ds, cv.classic_pooled_predictions);
    double classic_macro = 0.0;
    std::size_t classes = 0;
    for (double v : classic)
        if (!std::isnan(v)) {
            classic_macro += v;
            ++classes;
        }
    out["classic_pooled_mae"] = detail::number(classes ? classic_macro / static_cast<double>(classes) : kMissing);
    Json per_class = Json::array();
    for (std::size_t l = 0; l < cv.grid.size(); ++l) {
        const auto mae = per_class_mae(ds, cv.predictions.col(static_cast<Eigen::Index>(l)));
        Json row = Json::object();
        for (std::size_t m = 0; m < ds.num_classes(); ++m) row[ds.classes[m]] = detail::number(mae[m]);
        per_class.push_back(row);
    }
    out["class_mae"] = per_class;
    out["cv_selected"] = {{"index", cv.selected}, {"lambda", cv.selected_lambda()}, {"mae", cv.mae[cv.selected]}};
    out["aic"] = {{"lambda", detail::numbers(aic.lambda)},
                  {"aic", detail::numbers(aic.aic)},
                  {"df", detail::numbers(aic.df)},
                  {"sigma2", detail::numbers(aic.sigma2)}};
    out["aic_selected"] = {{"index", aic.best}, {"lambda", aic.lambda[aic.best]}, {"aic", detail::number(aic.aic[aic.best])}};
    out["warnings"] = cv.warnings;
    return out;
}

inline Json confusion_json(const ConfusionMatrix& cm) {
    Json rows = Json::array();
    for (const auto& r : cm.counts) rows.push_back(r);
    return rows;
}

inline Json evaluation_json(const MethodComparison& cmp, const StarThresholds& thresholds) {
    Json out;
    out["schema"] = kSchemaVersion;
    out["thresholds"] = {{"t3", thresholds.t3}, {"t4", thresholds.t4}, {"t5", thresholds.t5}};
    out["stars"] = {2, 3, 4, 5};
    Json methods = Json::array();
    for (std::size_t k = 0; k < cmp.methods.size(); ++k) {
        const auto& r = cmp.reports[k];
        Json classes = Json::array();
        for (const auto& ce : r.classes)
            classes.push_back({{"class", ce.class_id},
                               {"n", ce.n},
                               {"mae", detail::number(ce.mae)},
                               {"mse", detail::number(ce.mse)},
                               {"accuracy", detail::number(ce.accuracy)},
                               {"consumer_accuracy", detail::number(ce.consumer_accuracy)},
                               {"confusion", confusion_json(ce.confusion)}});
        methods.push_back({{"method", cmp.methods[k]},
                           {"macro_mae", detail::number(r.macro_mae)},
                           {"micro_mae", detail::number(r.micro_mae)},
                           {"accuracy", detail::number(r.accuracy)},
                           {"consumer_accuracy", detail::number(r.consumer_accuracy)},
                           {"confusion", confusion_json(r.overall)},
                           {"classes", classes}});
    }
    out["methods"] = methods;
    return out;
}

} // namespace fusedpath
