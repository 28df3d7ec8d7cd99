#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <numeric>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "fusedpath/data_model.hpp"
#include "fusedpath/solver.hpp"

namespace fusedpath {

// ---------------------------------------------------------------------------
// AIC

inline double aic_value(double sigma2, double df, double n) { return std::log(sigma2) + 2.0 * df / n; }

struct AicCurve {
    std::vector<double> lambda;
    std::vector<double> sigma2;  // RSS / n
    std::vector<double> df;
    std::vector<double> aic;
    std::size_t best = 0;
};

/// Index of the minimum; ties go to the largest lambda (values are in ascending-lambda order).
inline std::size_t argmin_prefer_last(const std::vector<double>& values) {
    std::size_t best = values.size() - 1;
    for (std::size_t k = values.size(); k-- > 0;)
        if (values[k] < values[best]) best = k;
    return best;
}

inline AicCurve aic_select(const PathResult& path, std::size_t n) {
    if (path.points.empty()) throw UsageError("aic_select: empty path");
    AicCurve curve;
    const double nn = static_cast<double>(n);
    for (const auto& pt : path.points) {
        curve.lambda.push_back(pt.lambda);
        curve.sigma2.push_back(pt.rss / nn);
        curve.df.push_back(static_cast<double>(pt.df));
        curve.aic.push_back(aic_value(curve.sigma2.back(), curve.df.back(), nn));
    }
    curve.best = argmin_prefer_last(curve.aic);
    return curve;
}

// ---------------------------------------------------------------------------
// Folds

struct FoldAssignment {
    std::size_t k = 0;
    std::vector<std::size_t> fold_of_row;
    std::vector<std::string> warnings;

    std::vector<std::size_t> test_rows(std::size_t fold) const {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < fold_of_row.size(); ++i)
            if (fold_of_row[i] == fold) rows.push_back(i);
        return rows;
    }

    std::vector<std::size_t> train_rows(std::size_t fold) const {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < fold_of_row.size(); ++i)
            if (fold_of_row[i] != fold) rows.push_back(i);
        return rows;
    }
};

/// Within each class, a seeded shuffle cut into K contiguous near-equal blocks.
inline FoldAssignment make_folds(const Dataset& ds, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw UsageError("K must be at least 2");
    FoldAssignment folds;
    folds.k = k;
    folds.fold_of_row.assign(ds.n(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t m = 0; m < ds.num_classes(); ++m) {
        auto rows = ds.rows_of(m);
        std::shuffle(rows.begin(), rows.end(), rng);
        const std::size_t n = rows.size();
        if (n < k)
            folds.warnings.push_back("class '" + ds.classes[m] + "' has " + std::to_string(n) +
                                     " observations, fewer than K=" + std::to_string(k));
        for (std::size_t r = 0; r < n; ++r) folds.fold_of_row[rows[r]] = r * k / n;
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldClassError {
    std::size_t lambda_index = 0;
    std::size_t fold = 0;
    std::size_t class_index = 0;
    std::size_t n_test = 0;
    double mae = 0.0;
    double mse = 0.0;
};

struct CvReport {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<double> grid;
    FoldAssignment folds;
    std::vector<FoldClassError> errors;           // per lambda, fold, class with test rows
    std::vector<std::vector<double>> fold_mae;    // [lambda][fold], macro over classes
    std::vector<double> mae;                      // macro, averaged over folds (selection criterion)
    std::vector<double> mae_micro;
    std::vector<double> mse;
    std::vector<double> mse_micro;
    std::size_t selected = 0;
    Eigen::MatrixXd predictions;                  // out-of-fold, rows x grid
    Eigen::VectorXd classic_pooled_predictions;   // out-of-fold
    std::vector<std::string> warnings;

    double selected_lambda() const { return grid[selected]; }
};

namespace detail {

struct FoldErrors {
    double macro = 0.0, micro = 0.0, macro_mse = 0.0, micro_mse = 0.0;
    std::vector<FoldClassError> per_class;
};

/// Per-class MAE/MSE on `rows`, then macro (equal class weight) and micro (pooled) aggregates.
inline FoldErrors fold_errors(const Dataset& ds, const std::vector<std::size_t>& rows, const Eigen::VectorXd& pred) {
    FoldErrors out;
    std::vector<double> abs_sum(ds.num_classes(), 0.0), sq_sum(ds.num_classes(), 0.0);
    std::vector<std::size_t> count(ds.num_classes(), 0);
    for (auto i : rows) {
        const double e = pred(static_cast<Eigen::Index>(i)) - ds.response(static_cast<Eigen::Index>(i));
        const auto m = ds.row_class[i];
        abs_sum[m] += std::abs(e);
        sq_sum[m] += e * e;
        ++count[m];
    }
    std::size_t classes = 0, total = 0;
    double abs_total = 0.0, sq_total = 0.0;
    for (std::size_t m = 0; m < ds.num_classes(); ++m) {
        if (count[m] == 0) continue;
        const double c = static_cast<double>(count[m]);
        FoldClassError fe;
        fe.class_index = m;
        fe.n_test = count[m];
        fe.mae = abs_sum[m] / c;
        fe.mse = sq_sum[m] / c;
        out.macro += fe.mae;
        out.macro_mse += fe.mse;
        out.per_class.push_back(fe);
        ++classes;
        total += count[m];
        abs_total += abs_sum[m];
        sq_total += sq_sum[m];
    }
    if (classes) {
        out.macro /= static_cast<double>(classes);
        out.macro_mse /= static_cast<double>(classes);
        out.micro = abs_total / static_cast<double>(total);
        out.micro_mse = sq_total / static_cast<double>(total);
    }
    return out;
}

struct FoldFit {
    Eigen::MatrixXd predictions;        // test rows x grid
    Eigen::VectorXd classic_pooled;     // test rows
    std::vector<std::string> warnings;
};

inline FoldFit fit_fold(const Dataset& ds, const std::vector<std::size_t>& train, const std::vector<std::size_t>& test,
                        const std::vector<double>& grid, const FitConfig& config) {
    const Dataset train_ds = subset_rows(ds, train);
    const Dataset test_ds = subset_rows(ds, test);
    const auto problem = FusedProblem::from_dataset(train_ds);
    const PathResult path = solve_grid(problem, grid, config);
    const Coefficients classic = fit_classic_pooled(problem);

    FoldFit fit;
    fit.warnings = path.warnings;
    fit.classic_pooled = predict(problem.layout(), classic, test_ds);
    fit.predictions.resize(static_cast<Eigen::Index>(test.size()), static_cast<Eigen::Index>(grid.size()));
    for (std::size_t g = 0; g < grid.size(); ++g)
        fit.predictions.col(static_cast<Eigen::Index>(g)) = predict(problem.layout(), path.points[g].coefficients, test_ds);

    // classes without training rows borrow the pooled fit
    for (std::size_t m = 0; m < ds.num_classes(); ++m) {
        if (problem.designs()[m].n() > 0) continue;
        bool tested = false;
        for (std::size_t r = 0; r < test.size(); ++r) {
            if (test_ds.row_class[r] != m) continue;
            tested = true;
            const auto row = static_cast<Eigen::Index>(r);
            // the pooled model has a single intercept, so any other class's value works
            Eigen::Index donor = -1;
            for (Eigen::Index c = 0; c < classic.intercepts.size(); ++c)
                if (!std::isnan(classic.intercepts(c))) donor = c;
            double yhat = donor >= 0 ? classic.intercepts(donor) : kMissing;
            if (donor >= 0) {
                for (auto j : problem.layout().predictors(static_cast<std::size_t>(donor))) {
                    const double b = classic.slopes(problem.layout().column(static_cast<std::size_t>(donor), j));
                    if (b != 0.0) yhat += b * test_ds.values(row, static_cast<Eigen::Index>(j));
                }
            }
            fit.predictions.row(row).setConstant(yhat);
            fit.classic_pooled(row) = yhat;
        }
        if (tested)
            fit.warnings.push_back("class '" + ds.classes[m] +
                                   "' has no training rows in a fold; its test rows use the classic pooled fit");
    }
    return fit;
}

} // namespace detail

/// K-fold CV over a fixed lambda grid (normally the full-data path grid). Each fold refits the
/// path on its training rows; the selected lambda minimizes the fold-averaged macro MAE.
inline CvReport cv_select(const Dataset& standardized, const std::vector<double>& grid, const FitConfig& config,
                          std::size_t k, std::uint64_t seed) {
    if (grid.empty()) throw UsageError("cv_select: empty lambda grid");
    CvReport report;
    report.k = k;
    report.seed = seed;
    report.grid = grid;
    report.folds = make_folds(standardized, k, seed);
    report.warnings = report.folds.warnings;
    const auto n = static_cast<Eigen::Index>(standardized.n());
    const auto g = grid.size();
    report.predictions = Eigen::MatrixXd::Constant(n, static_cast<Eigen::Index>(g), kMissing);
    report.classic_pooled_predictions = Eigen::VectorXd::Constant(n, kMissing);

    std::vector<std::future<detail::FoldFit>> jobs;
    for (std::size_t f = 0; f < k; ++f)
        jobs.push_back(std::async(std::launch::async, [&, f] {
            return detail::fit_fold(standardized, report.folds.train_rows(f), report.folds.test_rows(f), grid, config);
        }));

    report.fold_mae.assign(g, std::vector<double>(k, 0.0));
    std::vector<std::vector<double>> fold_micro(g, std::vector<double>(k, 0.0)), fold_mse(g, std::vector<double>(k, 0.0)),
        fold_mse_micro(g, std::vector<double>(k, 0.0));
    std::vector<std::size_t> used_folds;
    for (std::size_t f = 0; f < k; ++f) {
        const auto fit = jobs[f].get();  // rethrows fold failures
        for (const auto& w : fit.warnings)
            if (std::find(report.warnings.begin(), report.warnings.end(), w) == report.warnings.end())
                report.warnings.push_back(w);
        const auto test = report.folds.test_rows(f);
        if (test.empty()) continue;
        used_folds.push_back(f);
        for (std::size_t r = 0; r < test.size(); ++r) {
            report.predictions.row(static_cast<Eigen::Index>(test[r])) = fit.predictions.row(static_cast<Eigen::Index>(r));
            report.classic_pooled_predictions(static_cast<Eigen::Index>(test[r])) = fit.classic_pooled(static_cast<Eigen::Index>(r));
        }
        for (std::size_t l = 0; l < g; ++l) {
            const auto errs = detail::fold_errors(standardized, test, report.predictions.col(static_cast<Eigen::Index>(l)));
            report.fold_mae[l][f] = errs.macro;
            fold_micro[l][f] = errs.micro;
            fold_mse[l][f] = errs.macro_mse;
            fold_mse_micro[l][f] = errs.micro_mse;
            for (auto fe : errs.per_class) {
                fe.lambda_index = l;
                fe.fold = f;
                report.errors.push_back(fe);
            }
        }
    }
    auto average = [&](const std::vector<double>& per_fold) {
        double s = 0.0;
        for (auto f : used_folds) s += per_fold[f];
        return s / static_cast<double>(used_folds.size());
    };
    for (std::size_t l = 0; l < g; ++l) {
        report.mae.push_back(average(report.fold_mae[l]));
        report.mae_micro.push_back(average(fold_micro[l]));
        report.mse.push_back(average(fold_mse[l]));
        report.mse_micro.push_back(average(fold_mse_micro[l]));
    }
    std::sort(report.errors.begin(), report.errors.end(), [](const FoldClassError& a, const FoldClassError& b) {
        return std::tie(a.lambda_index, a.fold, a.class_index) < std::tie(b.lambda_index, b.fold, b.class_index);
    });
    report.selected = argmin_prefer_last(report.mae);
    return report;
}

/// Mean absolute error per class of out-of-fold predictions (NaN for classes without rows).
inline std::vector<double> per_class_mae(const Dataset& ds, const Eigen::VectorXd& predictions) {
    std::vector<double> sum(ds.num_classes(), 0.0);
    std::vector<std::size_t> count(ds.num_classes(), 0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        sum[ds.row_class[i]] += std::abs(predictions(static_cast<Eigen::Index>(i)) - ds.response(static_cast<Eigen::Index>(i)));
        ++count[ds.row_class[i]];
    }
    std::vector<double> out;
    for (std::size_t m = 0; m < ds.num_classes(); ++m)
        out.push_back(count[m] ? sum[m] / static_cast<double>(count[m]) : kMissing);
    return out;
}

} // namespace fusedpath
