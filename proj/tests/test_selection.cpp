#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "fusedpath/synthetic.hpp"
#include "support.hpp"

using namespace fusedpath;
using fusedpath::testing::from_csv;

namespace {

PathPoint point(double lambda, double rss, std::size_t df) {
    PathPoint p;
    p.lambda = lambda;
    p.rss = rss;
    p.df = df;
    return p;
}

// Per-class leave-one-out OLS residuals via the hat matrix: e_i / (1 - h_ii).
std::vector<double> loo_abs_residuals(const ClassDesign& d) {
    const Eigen::MatrixXd& x = d.design;
    const Eigen::MatrixXd h = x * (x.transpose() * x).inverse() * x.transpose();
    const Eigen::VectorXd e = d.response - h * d.response;
    std::vector<double> out;
    for (Eigen::Index i = 0; i < e.size(); ++i) out.push_back(std::abs(e(i) / (1.0 - h(i, i))));
    return out;
}

} // namespace

TEST(Aic, HandEvaluation) {
    EXPECT_DOUBLE_EQ(aic_value(4.0, 10.0, 100.0), 1.5862943611198906);
    PathResult path;
    path.points = {point(0.0, 400.0, 10)};
    auto curve = aic_select(path, 100);
    EXPECT_DOUBLE_EQ(curve.aic[0], std::log(4.0) + 0.2);
}

TEST(Aic, EqualVarianceSmallerDfWins) {
    PathResult path;
    path.points = {point(0.0, 400.0, 12), point(1.0, 400.0, 9), point(2.0, 500.0, 9)};
    auto curve = aic_select(path, 100);
    EXPECT_EQ(curve.best, 1u);
}

TEST(Aic, TiesGoToLargerLambda) {
    EXPECT_EQ(argmin_prefer_last({3.0, 1.0, 2.0, 1.0, 5.0}), 3u);
    EXPECT_EQ(argmin_prefer_last({1.0, 1.0, 1.0}), 2u);
    EXPECT_EQ(argmin_prefer_last({0.5, 1.0, 1.0}), 0u);
}

TEST(Aic, DfAtLambdaZeroTwoClassesTwoPredictors) {
    synthetic::Spec spec;
    spec.class_sizes = {15, 12};
    spec.intercepts = {10, 20};
    spec.slopes = {{1, 2}, {2, 1}};
    spec.centers = {0, 5};
    spec.spreads = {1, 2};
    spec.seed = 4;
    auto problem = FusedProblem::from_dataset(standardize(synthetic::generate(spec)).first);
    auto path = solve_path(problem);
    EXPECT_EQ(path.points.front().df, 6u);
    auto curve = aic_select(path, problem.n());
    // recomputation from exported sigma2 and df
    for (std::size_t k = 0; k < curve.aic.size(); ++k)
        EXPECT_NEAR(curve.aic[k], std::log(curve.sigma2[k]) + 2.0 * curve.df[k] / static_cast<double>(problem.n()), 1e-12);
    EXPECT_LT(curve.best, curve.lambda.size());
}

TEST(Folds, StratifiedNearEqualBlocks) {
    auto ds = synthetic::generate(synthetic::shared_slope_benchmark(1, {10, 10, 13}));
    auto folds = make_folds(ds, 5, 42);
    for (std::size_t m = 0; m < 3; ++m) {
        std::vector<std::size_t> sizes(5, 0);
        for (auto i : ds.rows_of(m)) ++sizes[folds.fold_of_row[i]];
        const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
        if (m < 2)
            for (auto s : sizes) EXPECT_EQ(s, 2u);
        EXPECT_LE(*hi - *lo, 1u);
    }
    EXPECT_EQ(make_folds(ds, 5, 42).fold_of_row, folds.fold_of_row);
    EXPECT_NE(make_folds(ds, 5, 43).fold_of_row, folds.fold_of_row);

    std::set<std::size_t> seen;
    for (std::size_t f = 0; f < 5; ++f) {
        for (auto i : folds.test_rows(f)) EXPECT_TRUE(seen.insert(i).second);
        EXPECT_EQ(folds.test_rows(f).size() + folds.train_rows(f).size(), ds.n());
    }
    EXPECT_EQ(seen.size(), ds.n());
    EXPECT_THROW(make_folds(ds, 1, 1), UsageError);
}

TEST(Folds, SmallClassIsLogged) {
    auto ds = synthetic::generate(synthetic::shared_slope_benchmark(1, {10, 3}));
    auto folds = make_folds(ds, 5, 1);
    ASSERT_EQ(folds.warnings.size(), 1u);
    EXPECT_NE(folds.warnings[0].find("C02"), std::string::npos);
}

TEST(Cv, ClassMaeArithmetic) {
    auto ds = from_csv("class,response,x\nA,2,1\nA,4,2\nB,10,1\nB,10,3\nB,10,5\n");
    Eigen::VectorXd pred(5);
    pred << 1, 2, 10, 13, 10;
    auto errs = detail::fold_errors(ds, {0, 1, 2, 3, 4}, pred);
    ASSERT_EQ(errs.per_class.size(), 2u);
    EXPECT_DOUBLE_EQ(errs.per_class[0].mae, 1.5);
    EXPECT_DOUBLE_EQ(errs.per_class[1].mae, 1.0);
    EXPECT_DOUBLE_EQ(errs.macro, 1.25);
    EXPECT_DOUBLE_EQ(errs.micro, 6.0 / 5.0);
    auto per_class = per_class_mae(ds, pred);
    EXPECT_DOUBLE_EQ(per_class[0], 1.5);
    EXPECT_DOUBLE_EQ(per_class[1], 1.0);
}

TEST(Cv, MaeInvariantToWithinClassOrder) {
    auto ds = from_csv("class,response,x\nA,2,1\nA,4,2\nA,7,3\nB,10,1\nB,11,3\n");
    Eigen::VectorXd pred(5);
    pred << 1, 5, 7.5, 12, 10;
    auto a = detail::fold_errors(ds, {0, 1, 2, 3, 4}, pred);
    auto b = detail::fold_errors(ds, {2, 0, 4, 1, 3}, pred);
    EXPECT_EQ(a.macro, b.macro);
    EXPECT_EQ(a.micro, b.micro);
}

TEST(Cv, OneClassTwoFoldsIsPlainOlsCv) {
    auto raw = synthetic::generate(synthetic::shared_slope_benchmark(3, {16}));
    auto ds = standardize(raw).first;
    auto cv = cv_select(ds, {0.0}, FitConfig{}, 2, 9);
    double total = 0.0;
    for (std::size_t f = 0; f < 2; ++f) {
        auto train = subset_rows(ds, cv.folds.train_rows(f));
        auto test = subset_rows(ds, cv.folds.test_rows(f));
        const auto d = build_designs(train)[0];
        Eigen::VectorXd beta = d.design.colPivHouseholderQr().solve(d.response);
        const auto td = build_designs(test)[0];
        total += (td.design * beta - td.response).cwiseAbs().mean();
    }
    EXPECT_NEAR(cv.mae[0], total / 2.0, 1e-9);
}

TEST(Cv, LeaveOneOutMatchesHatMatrixOracle) {
    auto raw = synthetic::generate(synthetic::shared_slope_benchmark(5, {7, 7, 7}));
    auto ds = standardize(raw).first;
    auto cv = cv_select(ds, {0.0}, FitConfig{}, 7, 2);
    const auto designs = build_designs(ds);
    double expected = 0.0;
    for (const auto& d : designs) {
        auto r = loo_abs_residuals(d);
        expected += std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    }
    expected /= static_cast<double>(designs.size());
    EXPECT_NEAR(cv.mae[0], expected, 1e-9);
}

TEST(Cv, SelectedLambdaIsGridMemberAndDeterministic) {
    auto ds = standardize(synthetic::generate(synthetic::shared_slope_benchmark(6, {40, 10, 10}))).first;
    auto problem = FusedProblem::from_dataset(ds);
    FitConfig cfg;
    cfg.grid_size = 25;
    auto path = solve_path(problem, cfg);
    auto a = cv_select(ds, path.grid(), cfg, 5, 11);
    auto b = cv_select(ds, path.grid(), cfg, 5, 11);
    EXPECT_EQ(a.mae, b.mae);
    EXPECT_EQ(a.selected, b.selected);
    EXPECT_TRUE(std::find(a.grid.begin(), a.grid.end(), a.selected_lambda()) != a.grid.end());
    EXPECT_EQ(a.selected, argmin_prefer_last(a.mae));
    for (Eigen::Index i = 0; i < a.predictions.rows(); ++i)
        for (Eigen::Index g = 0; g < a.predictions.cols(); ++g) EXPECT_TRUE(std::isfinite(a.predictions(i, g)));
    // fold-averaged macro equals the mean of per-fold values
    for (std::size_t l = 0; l < a.grid.size(); ++l) {
        double s = 0.0;
        for (double v : a.fold_mae[l]) s += v;
        EXPECT_NEAR(a.mae[l], s / 5.0, 1e-12);
    }
}

TEST(Cv, ClassMissingFromTrainingUsesPooledFallback) {
    auto ds = standardize(from_csv(
                              "class,response,x\nA,10,1\nA,12,2\nA,15,4\nA,17,5\nA,20,6\nA,21,7\nB,30,3\nB,33,4\nB,37,6\nB,38,8\nC,25,4\n"))
                  .first;
    auto cv = cv_select(ds, {0.0, 0.5, 5.0}, FitConfig{}, 2, 1);
    const auto c_row = static_cast<Eigen::Index>(ds.rows_of(2)[0]);
    EXPECT_TRUE(std::isfinite(cv.predictions(c_row, 0)));
    EXPECT_EQ(cv.predictions(c_row, 0), cv.classic_pooled_predictions(c_row));
    bool flagged = false;
    for (const auto& w : cv.warnings) flagged = flagged || w.find("'C' has no training rows") != std::string::npos;
    EXPECT_TRUE(flagged);
}
