#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fusedpath/synthetic.hpp"
#include "support.hpp"

using namespace fusedpath;
using fusedpath::testing::from_csv;

namespace {

std::string rows_csv(const std::string& header, const std::vector<std::string>& rows) {
    std::string s = header + "\n";
    for (const auto& r : rows) s += r + "\n";
    return s;
}

const SummaryRow& find_row(const SummaryReport& rep, const std::string& group, const std::string& var,
                           const std::string& level = "") {
    auto it = std::find_if(rep.rows.begin(), rep.rows.end(), [&](const SummaryRow& r) {
        return r.group == group && r.variable == var && r.level == level;
    });
    if (it == rep.rows.end()) throw std::runtime_error("row not found");
    return *it;
}

} // namespace

TEST(Ingest, ThreeRowsOneClass) {
    auto ds = from_csv("class,response,x\nA,10,1\nA,20,2\nA,30,3\n");
    EXPECT_EQ(ds.num_classes(), 1u);
    EXPECT_EQ(ds.class_size(0), 3u);
    EXPECT_EQ(ds.p(), 1u);
    EXPECT_TRUE(ds.available[0][0]);
}

TEST(Ingest, CategoricalMissingCellMasksPredictorForThatClassOnly) {
    std::vector<std::string> rows;
    for (int i = 0; i < 6; ++i) rows.push_back("A1," + std::to_string(40 + i) + "," + std::to_string(i) + "," + (i % 2 ? "grain" : "grass"));
    for (int i = 0; i < 5; ++i) rows.push_back("B9," + std::to_string(50 + i) + "," + std::to_string(i) + "," + (i == 2 ? "" : (i % 2 ? "grain" : "grass")));
    auto ds = from_csv(rows_csv("class,response,dagd,feed", rows), "numeric = dagd\ncategorical = feed\n");
    const auto b9 = static_cast<std::size_t>(ds.class_index("B9"));
    const auto a1 = static_cast<std::size_t>(ds.class_index("A1"));
    const auto feed = static_cast<std::size_t>(ds.predictor_index("feed=grass"));
    EXPECT_FALSE(ds.available[b9][feed]);
    EXPECT_TRUE(ds.available[a1][feed]);
    EXPECT_EQ(ds.class_size(b9), 5u);
    // reference is the lexicographically first level
    EXPECT_EQ(ds.predictor_index("feed=grain"), -1);
}

TEST(Ingest, ClassSizes317And17) {
    std::vector<std::string> rows;
    for (int i = 0; i < 317; ++i) rows.push_back("A1," + std::to_string(i % 90 + 5) + "," + std::to_string(i));
    for (int i = 0; i < 17; ++i) rows.push_back("A14," + std::to_string(i + 30) + "," + std::to_string(i * 2));
    auto rep = summarize(from_csv(rows_csv("class,response,x", rows)));
    ASSERT_EQ(rep.class_sizes.size(), 2u);
    EXPECT_EQ(rep.class_sizes[0], std::make_pair(std::string("A1"), std::size_t{317}));
    EXPECT_EQ(rep.class_sizes[1], std::make_pair(std::string("A14"), std::size_t{17}));
}

TEST(Ingest, MissingResponseRowsAreDroppedAndCounted) {
    auto ds = from_csv("class,response,x\nA,10,1\nA,,2\nA,30,3\nB,40,1\nB,41,5\n");
    EXPECT_EQ(ds.n(), 4u);
    EXPECT_EQ(ds.dropped_rows, 1u);
}

TEST(Ingest, Errors) {
    std::istringstream schema("numeric = y\n");
    std::istringstream csv("class,response,x\nA,1,2\n");
    EXPECT_THROW(ingest(read_csv(csv), parse_schema(schema)), DataError);
    EXPECT_THROW(from_csv("class,response,x\nA,10,abc\n"), DataError);
    EXPECT_THROW(from_csv("class,response,x\nA,101,1\n"), DataError);
    EXPECT_THROW(from_csv("class,response,x\nA,10\n"), DataError);
    EXPECT_THROW(from_csv("class,response,x\nA,10,1\n", "bogus = 1\n"), DataError);
    EXPECT_THROW(from_csv("cls,response,x\nA,10,1\n"), DataError);
}

TEST(Ingest, EmptyClassIsDroppedWithWarning) {
    auto ds = from_csv("class,response,x\nA,10,1\nA,20,2\nB,,3\n");
    EXPECT_EQ(ds.num_classes(), 1u);
    ASSERT_EQ(ds.warnings.size(), 1u);
    EXPECT_NE(ds.warnings[0].find("'B'"), std::string::npos);
}

TEST(Mask, OneMissingOf50RemovesPredictorKeepsRows) {
    std::vector<std::string> rows;
    for (int i = 0; i < 50; ++i) rows.push_back("C," + std::to_string(20 + i) + "," + (i == 17 ? "" : std::to_string(i % 7)) + "," + std::to_string(i));
    for (int i = 0; i < 10; ++i) rows.push_back("D," + std::to_string(20 + i) + "," + std::to_string(i) + "," + std::to_string(i * i));
    auto ds = from_csv(rows_csv("class,response,uoss,hump", rows));
    const auto c = static_cast<std::size_t>(ds.class_index("C"));
    EXPECT_FALSE(ds.available[c][0]);
    EXPECT_TRUE(ds.available[c][1]);
    EXPECT_EQ(ds.class_size(c), 50u);
    EXPECT_TRUE(ds.available[1][0]);
}

TEST(Mask, NoMissingCellsIsIdentityAndMaskIsIdempotent) {
    auto spec = synthetic::random_instance(4);
    auto raw = synthetic::generate(spec);
    auto once = apply_missingness_mask(raw);
    auto twice = apply_missingness_mask(once);
    EXPECT_EQ(once.available, twice.available);
    EXPECT_EQ(once.masked, twice.masked);
    EXPECT_EQ(once.warnings, twice.warnings);

    auto full = from_csv("class,response,x\nA,10,1\nA,20,2\n", "", false);
    EXPECT_EQ(apply_missingness_mask(full).available, full.available);
}

TEST(Mask, AvailablePredictorsHaveNoMissingCells) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto ds = apply_missingness_mask(synthetic::generate(synthetic::random_instance(seed)));
        for (std::size_t i = 0; i < ds.n(); ++i)
            for (std::size_t j = 0; j < ds.p(); ++j)
                if (ds.available[ds.row_class[i]][j])
                    EXPECT_FALSE(is_missing(ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    }
}

TEST(Mask, ClassWithNoPredictorsWarns) {
    auto ds = from_csv("class,response,x\nA,10,1\nA,20,2\nA,25,4\nB,30,\nB,35,2\n");
    ASSERT_EQ(ds.warnings.size(), 1u);
    EXPECT_NE(ds.warnings[0].find("intercept only"), std::string::npos);
}

TEST(Standardize, ThreePointSampleSd) {
    auto [ds, stats] = standardize(from_csv("class,response,x\nA,10,1\nA,20,2\nA,30,3\n"));
    EXPECT_DOUBLE_EQ(stats.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(stats.scale[0], 1.0);
    EXPECT_DOUBLE_EQ(ds.values(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(ds.values(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(ds.values(2, 0), 1.0);
    // response is left alone
    EXPECT_DOUBLE_EQ(ds.response(2), 30.0);
}

TEST(Standardize, Idempotent) {
    auto raw = apply_missingness_mask(synthetic::generate(synthetic::random_instance(7)));
    auto once = standardize(raw).first;
    auto twice = standardize(once).first;
    for (Eigen::Index i = 0; i < once.values.rows(); ++i)
        for (Eigen::Index j = 0; j < once.values.cols(); ++j) {
            const double a = once.values(i, j), b = twice.values(i, j);
            if (is_missing(a))
                EXPECT_TRUE(is_missing(b));
            else
                EXPECT_NEAR(a, b, 1e-12);
        }
}

TEST(Standardize, ScaleInvariance) {
    auto raw = apply_missingness_mask(synthetic::generate(synthetic::random_instance(11)));
    auto scaled = raw;
    scaled.values.col(0) *= 1000.0;
    auto a = standardize(raw).first, b = standardize(scaled).first;
    for (Eigen::Index i = 0; i < a.values.rows(); ++i) {
        if (is_missing(a.values(i, 0))) continue;
        EXPECT_NEAR(a.values(i, 0), b.values(i, 0), 1e-12);
    }
}

TEST(Standardize, ZeroVarianceRejectedByName) {
    try {
        standardize(from_csv("class,response,flat\nA,10,5\nA,20,5\nA,30,5\n"));
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
    }
}

TEST(Standardize, RoundTripPredictions) {
    auto raw = apply_missingness_mask(synthetic::generate(synthetic::random_instance(3)));
    auto [ds, stats] = standardize(raw);
    auto problem = FusedProblem::from_dataset(ds);
    auto coef = fit_separate(problem);
    auto raw_coef = to_raw_scale(problem.layout(), coef, stats);
    StandardizationStats identity{std::vector<double>(ds.p(), 0.0), std::vector<double>(ds.p(), 1.0)};
    // mask unavailable cells so predict() only touches available predictors
    auto a = predict(problem.layout(), coef, ds);
    auto b = predict(problem.layout(), raw_coef, identity, raw);
    for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_NEAR(a(i), b(i), 1e-10 * std::max(1.0, std::abs(a(i))));
}

TEST(Mq4, Examples) {
    RawPanelRecord all50;
    for (auto& t : all50.scores) t.assign(10, 50.0);
    EXPECT_DOUBLE_EQ(mq4(all50), 50.0);

    RawPanelRecord ladder;
    for (auto& t : ladder.scores) t = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    EXPECT_DOUBLE_EQ(clipped_mean(ladder.scores[0]), 55.0);
    EXPECT_NEAR(mq4(ladder), 55.0, 1e-12);

    RawPanelRecord shifted = all50;
    shifted.scores[0].assign(10, 60.0);
    EXPECT_NEAR(mq4(shifted), 53.0, 1e-12);
}

TEST(Mq4, Errors) {
    RawPanelRecord short_panel;
    for (auto& t : short_panel.scores) t.assign(10, 50.0);
    short_panel.scores[2].pop_back();
    EXPECT_THROW(mq4(short_panel), DataError);
    RawPanelRecord out_of_range;
    for (auto& t : out_of_range.scores) t.assign(10, 50.0);
    out_of_range.scores[1][3] = 101.0;
    EXPECT_THROW(mq4(out_of_range), DataError);
}

TEST(Mq4, BoundedAndMonotone) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int rep = 0; rep < 200; ++rep) {
        RawPanelRecord r;
        for (auto& t : r.scores)
            for (int k = 0; k < 10; ++k) t.push_back(u(rng));
        const double base = mq4(r);
        EXPECT_GE(base, 0.0);
        EXPECT_LE(base, 100.0);
        auto bumped = r;
        auto& cell = bumped.scores[rep % 4][static_cast<std::size_t>(rep % 10)];
        cell = std::min(100.0, cell + 7.5);
        EXPECT_GE(mq4(bumped), base - 1e-12);
    }
}

TEST(Summarize, OrderStatistics) {
    auto rep = summarize(from_csv("class,response,c,x\nA,10,5,1\nA,20,5,2\nA,30,5,3\nB,40,5,100\n"));
    const auto& c = find_row(rep, "A", "c");
    EXPECT_EQ(c.mean, 5.0);
    EXPECT_EQ(c.sd, 0.0);
    EXPECT_EQ(c.median, 5.0);
    EXPECT_EQ(c.min, 5.0);
    EXPECT_EQ(c.max, 5.0);
    const auto& x = find_row(rep, "(all)", "x");
    EXPECT_EQ(x.median, 2.5);
    EXPECT_EQ(x.max, 100.0);
    EXPECT_EQ(x.count, 4u);
}

TEST(Summarize, MissingPercent) {
    std::vector<std::string> rows;
    for (int i = 0; i < 838; ++i) rows.push_back("A," + std::to_string(i % 100) + "," + std::to_string(i % 13) + "," + (i < 710 ? "" : (i % 2 ? "F" : "M")));
    auto rep = summarize(from_csv(rows_csv("class,response,x,sex", rows), "numeric = x\ncategorical = sex\n"));
    const auto& miss = find_row(rep, "A", "sex", "(missing)");
    EXPECT_EQ(miss.count, 710u);
    EXPECT_NEAR(miss.percent, 84.7, 0.05);
    EXPECT_TRUE(rep.missing[0][2]);
    EXPECT_FALSE(rep.missing[837][2]);
}

TEST(Summarize, RowPermutationInvariant) {
    std::string csv = "class,response,x,feed\n";
    std::vector<std::string> lines;
    std::mt19937_64 rng(9);
    for (int i = 0; i < 40; ++i)
        lines.push_back(std::string(i % 3 ? "P" : "Q") + "," + std::to_string(10 + i) + "," +
                        (i % 11 == 0 ? "" : std::to_string(i * 0.5)) + "," + (i % 4 ? "grain" : "grass"));
    auto shuffled = lines;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const std::string schema = "numeric = x\ncategorical = feed\n";
    auto a = summarize(from_csv(rows_csv("class,response,x,feed", lines), schema));
    auto b = summarize(from_csv(rows_csv("class,response,x,feed", shuffled), schema));
    std::ostringstream sa, sb, ca, cb;
    write_summary_csv(sa, a);
    write_summary_csv(sb, b);
    write_class_sizes_csv(ca, a);
    write_class_sizes_csv(cb, b);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(ca.str(), cb.str());
}

TEST(Csv, QuotedFieldsAndRoundTrip) {
    std::istringstream in("a,b\n\"x,1\",\"he said \"\"hi\"\"\"\r\n2,3\n");
    auto t = read_csv(in);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][0], "x,1");
    EXPECT_EQ(t.rows[0][1], "he said \"hi\"");
    std::ostringstream out;
    write_row(out, t.rows[0]);
    EXPECT_EQ(out.str(), "\"x,1\",\"he said \"\"hi\"\"\"\n");
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}
