#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fusedpath/csv.hpp"
#include "fusedpath/error.hpp"

namespace fusedpath {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Column roles for an input CSV. Read from a `key = value` file, see parse_schema.
struct Schema {
    std::string class_column = "class";
    std::string response_column = "response";
    std::vector<std::string> numeric;
    std::vector<std::string> categorical;
    std::map<std::string, std::vector<std::string>> levels;  // declared levels per categorical
    std::map<std::string, std::string> reference;            // reference level per categorical
    bool mask_missing = true;
    double response_min = 0.0;
    double response_max = 100.0;
};

namespace detail {

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) pos = s.size();
        auto item = trim(s.substr(start, pos - start));
        if (!item.empty()) out.push_back(std::move(item));
        start = pos + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    auto t = trim(s);
    if (t.empty()) return std::nullopt;
    double v = 0;
    const char* first = t.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
    if (v == "off" || v == "false" || v == "no" || v == "0") return false;
    throw DataError("schema: '" + key + "' expects on/off, got '" + v + "'");
}

} // namespace detail

/// Keys: class, response, numeric, categorical, levels.<var>, reference.<var>,
/// mask (on/off), response_range (lo,hi). Lists are comma-separated; '#' starts a comment.
inline Schema parse_schema(std::istream& in) {
    Schema schema;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto body = detail::trim(line);
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string::npos)
            throw DataError("schema: line " + std::to_string(lineno) + " is not 'key = value'");
        auto key = detail::trim(std::string_view(body).substr(0, eq));
        auto value = detail::trim(std::string_view(body).substr(eq + 1));
        if (key == "class") {
            schema.class_column = value;
        } else if (key == "response") {
            schema.response_column = value;
        } else if (key == "numeric") {
            schema.numeric = detail::split_list(value);
        } else if (key == "categorical") {
            schema.categorical = detail::split_list(value);
        } else if (key.rfind("levels.", 0) == 0) {
            schema.levels[key.substr(7)] = detail::split_list(value);
        } else if (key.rfind("reference.", 0) == 0) {
            schema.reference[key.substr(10)] = value;
        } else if (key == "mask") {
            schema.mask_missing = detail::parse_bool(key, value);
        } else if (key == "response_range") {
            auto parts = detail::split_list(value);
            std::optional<double> lo, hi;
            if (parts.size() == 2) {
                lo = detail::parse_double(parts[0]);
                hi = detail::parse_double(parts[1]);
            }
            if (!lo || !hi || !(*lo < *hi)) throw DataError("schema: bad response_range '" + value + "'");
            schema.response_min = *lo;
            schema.response_max = *hi;
        } else {
            throw DataError("schema: unknown key '" + key + "'");
        }
    }
    return schema;
}

/// One model column. Categorical variables expand to one indicator per non-reference level.
struct Predictor {
    std::string name;      // "dagd" or "feed=grass"
    std::string variable;  // source CSV column
    std::string level;     // empty for numeric predictors
};

struct CategoricalColumn {
    std::string variable;
    std::vector<std::string> levels;  // reference first
    std::vector<std::string> values;  // per row, empty = missing
};

/// Observations grouped by class. Values are raw (or standardized, after standardize());
/// missing cells are NaN. `available[m][j]` is the predictor set S_m of class m.
struct Dataset {
    std::vector<std::string> classes;
    std::vector<Predictor> predictors;
    std::vector<std::size_t> row_class;
    Eigen::VectorXd response;
    Eigen::MatrixXd values;
    std::vector<std::vector<bool>> available;
    // Predictors removed from a class by the missingness mask: structurally absent, not zero.
    std::vector<std::vector<std::size_t>> masked;
    std::vector<std::string> numeric_variables;
    std::vector<CategoricalColumn> categorical;
    std::string response_name = "response";
    std::size_t dropped_rows = 0;
    std::vector<std::string> warnings;

    std::size_t n() const { return row_class.size(); }
    std::size_t p() const { return predictors.size(); }
    std::size_t num_classes() const { return classes.size(); }

    std::vector<std::size_t> rows_of(std::size_t m) const {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < row_class.size(); ++i)
            if (row_class[i] == m) rows.push_back(i);
        return rows;
    }

    std::size_t class_size(std::size_t m) const {
        return static_cast<std::size_t>(std::count(row_class.begin(), row_class.end(), m));
    }

    std::vector<std::size_t> available_of(std::size_t m) const {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < predictors.size(); ++j)
            if (available[m][j]) out.push_back(j);
        return out;
    }

    long class_index(const std::string& id) const {
        auto it = std::find(classes.begin(), classes.end(), id);
        return it == classes.end() ? -1 : static_cast<long>(it - classes.begin());
    }

    long predictor_index(const std::string& name) const {
        for (std::size_t j = 0; j < predictors.size(); ++j)
            if (predictors[j].name == name) return static_cast<long>(j);
        return -1;
    }
};

/// Builds the dataset from a CSV table. Rows with a missing response are dropped and counted.
/// Classes are ordered lexicographically. Availability starts complete; see apply_missingness_mask.
inline Dataset ingest(const CsvTable& table, const Schema& schema) {
    auto require = [&](const std::string& name) {
        long c = table.column(name);
        if (c < 0) throw DataError("unknown column '" + name + "'");
        return static_cast<std::size_t>(c);
    };
    const auto class_col = require(schema.class_column);
    const auto response_col = require(schema.response_column);

    std::vector<std::string> numeric = schema.numeric;
    if (numeric.empty() && schema.categorical.empty()) {
        for (const auto& h : table.header)
            if (h != schema.class_column && h != schema.response_column) numeric.push_back(h);
    }
    std::vector<std::size_t> numeric_cols, categorical_cols;
    for (const auto& v : numeric) numeric_cols.push_back(require(v));
    for (const auto& v : schema.categorical) categorical_cols.push_back(require(v));
    for (const auto& [var, _] : schema.levels)
        if (std::find(schema.categorical.begin(), schema.categorical.end(), var) == schema.categorical.end())
            throw DataError("schema: levels given for non-categorical column '" + var + "'");
    for (const auto& [var, _] : schema.reference)
        if (std::find(schema.categorical.begin(), schema.categorical.end(), var) == schema.categorical.end())
            throw DataError("schema: reference given for non-categorical column '" + var + "'");

    Dataset ds;
    ds.response_name = schema.response_column;
    ds.numeric_variables = numeric;

    std::set<std::string> all_classes, kept_classes;
    std::vector<std::size_t> kept;
    std::vector<double> response;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        auto cls = detail::trim(row[class_col]);
        if (cls.empty()) throw DataError("row " + std::to_string(r + 1) + ": empty class label");
        all_classes.insert(cls);
        auto raw = detail::trim(row[response_col]);
        if (raw.empty()) {
            ++ds.dropped_rows;
            continue;
        }
        auto y = detail::parse_double(raw);
        if (!y || !std::isfinite(*y))
            throw DataError("row " + std::to_string(r + 1) + ": non-numeric response '" + raw + "'");
        if (*y < schema.response_min || *y > schema.response_max)
            throw DataError("row " + std::to_string(r + 1) + ": response " + raw + " outside [" +
                            format_double(schema.response_min) + ", " + format_double(schema.response_max) + "]");
        kept.push_back(r);
        response.push_back(*y);
        kept_classes.insert(cls);
    }
    for (const auto& c : all_classes)
        if (!kept_classes.count(c))
            ds.warnings.push_back("class '" + c + "' has no rows with a response and was dropped");
    if (kept.empty()) throw DataError("no rows with a response");

    ds.classes.assign(kept_classes.begin(), kept_classes.end());

    for (std::size_t k = 0; k < numeric.size(); ++k) ds.predictors.push_back({numeric[k], numeric[k], ""});
    for (std::size_t k = 0; k < schema.categorical.size(); ++k) {
        const auto& var = schema.categorical[k];
        CategoricalColumn col;
        col.variable = var;
        std::set<std::string> seen;
        for (auto r : kept) {
            auto v = detail::trim(table.rows[r][categorical_cols[k]]);
            if (!v.empty()) seen.insert(v);
            col.values.push_back(std::move(v));
        }
        if (auto it = schema.levels.find(var); it != schema.levels.end()) {
            col.levels = it->second;
            for (const auto& s : seen)
                if (std::find(col.levels.begin(), col.levels.end(), s) == col.levels.end())
                    throw DataError("column '" + var + "': undeclared level '" + s + "'");
        } else {
            col.levels.assign(seen.begin(), seen.end());
        }
        std::string ref = col.levels.empty() ? std::string() : *std::min_element(col.levels.begin(), col.levels.end());
        if (auto it = schema.reference.find(var); it != schema.reference.end()) {
            ref = it->second;
            if (std::find(col.levels.begin(), col.levels.end(), ref) == col.levels.end())
                throw DataError("column '" + var + "': reference level '" + ref + "' not among levels");
        }
        col.levels.erase(std::remove(col.levels.begin(), col.levels.end(), ref), col.levels.end());
        std::sort(col.levels.begin(), col.levels.end());
        if (!ref.empty()) col.levels.insert(col.levels.begin(), ref);
        for (std::size_t l = 1; l < col.levels.size(); ++l)
            ds.predictors.push_back({var + "=" + col.levels[l], var, col.levels[l]});
        ds.categorical.push_back(std::move(col));
    }

    const std::size_t n = kept.size();
    ds.response = Eigen::Map<const Eigen::VectorXd>(response.data(), static_cast<Eigen::Index>(n));
    ds.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ds.predictors.size()));
    ds.row_class.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = table.rows[kept[i]];
        auto cls = detail::trim(row[class_col]);
        ds.row_class[i] = static_cast<std::size_t>(ds.class_index(cls));
        for (std::size_t k = 0; k < numeric.size(); ++k) {
            const auto& cell = row[numeric_cols[k]];
            double v = kMissing;
            if (!detail::trim(cell).empty()) {
                auto parsed = detail::parse_double(cell);
                if (!parsed)
                    throw DataError("row " + std::to_string(kept[i] + 1) + ": non-numeric value '" + cell +
                                    "' in column '" + numeric[k] + "'");
                v = *parsed;
            }
            ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
        }
    }
    for (std::size_t j = numeric.size(); j < ds.predictors.size(); ++j) {
        const auto& pred = ds.predictors[j];
        const auto& col = *std::find_if(ds.categorical.begin(), ds.categorical.end(),
                                        [&](const CategoricalColumn& c) { return c.variable == pred.variable; });
        for (std::size_t i = 0; i < n; ++i) {
            const auto& v = col.values[i];
            ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                v.empty() ? kMissing : (v == pred.level ? 1.0 : 0.0);
        }
    }
    ds.available.assign(ds.classes.size(), std::vector<bool>(ds.predictors.size(), true));
    ds.masked.assign(ds.classes.size(), {});
    return ds;
}

/// Class-level missingness policy: a predictor with any missing cell in class m leaves S_m.
/// No rows are dropped. Idempotent.
inline Dataset apply_missingness_mask(Dataset ds) {
    for (std::size_t m = 0; m < ds.num_classes(); ++m) {
        const auto rows = ds.rows_of(m);
        bool removed = false;
        for (std::size_t j = 0; j < ds.p(); ++j) {
            if (!ds.available[m][j]) continue;
            for (auto i : rows) {
                if (is_missing(ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))) {
                    ds.available[m][j] = false;
                    ds.masked[m].push_back(j);
                    removed = true;
                    break;
                }
            }
        }
        const bool none_left = std::none_of(ds.available[m].begin(), ds.available[m].end(), [](bool b) { return b; });
        if (removed && none_left)
            ds.warnings.push_back("class '" + ds.classes[m] + "' has no available predictors; fitting intercept only");
    }
    return ds;
}

/// Per-predictor global location/scale. raw = standardized * scale + mean.
struct StandardizationStats {
    std::vector<double> mean;
    std::vector<double> scale;

    double to_raw(std::size_t j, double z) const { return z * scale[j] + mean[j]; }
    double to_standardized(std::size_t j, double x) const { return (x - mean[j]) / scale[j]; }
};

/// Centers and scales every predictor using rows of classes where it is available
/// (pooled across classes, sample SD). Predictors available nowhere are left untouched.
inline std::pair<Dataset, StandardizationStats> standardize(Dataset ds) {
    StandardizationStats stats;
    stats.mean.assign(ds.p(), 0.0);
    stats.scale.assign(ds.p(), 1.0);
    for (std::size_t j = 0; j < ds.p(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < ds.n(); ++i) {
            double v = ds.values(static_cast<Eigen::Index>(i), col);
            if (ds.available[ds.row_class[i]][j] && !is_missing(v)) {
                sum += v;
                ++count;
            }
        }
        if (count == 0) continue;
        const double mean = sum / static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t i = 0; i < ds.n(); ++i) {
            double v = ds.values(static_cast<Eigen::Index>(i), col);
            if (ds.available[ds.row_class[i]][j] && !is_missing(v)) ss += (v - mean) * (v - mean);
        }
        const double sd = count > 1 ? std::sqrt(ss / static_cast<double>(count - 1)) : 0.0;
        if (!(sd > 0.0) || sd <= 1e-12 * std::max(1.0, std::abs(mean)))
            throw DataError("predictor '" + ds.predictors[j].name + "' has zero variance");
        stats.mean[j] = mean;
        stats.scale[j] = sd;
        ds.values.col(col) = (ds.values.col(col).array() - mean) / sd;
    }
    return {std::move(ds), std::move(stats)};
}

/// Applies existing stats to a dataset with the same predictor columns (e.g. new observations).
inline Dataset apply_standardization(Dataset ds, const StandardizationStats& stats) {
    if (stats.mean.size() != ds.p()) throw UsageError("standardization stats do not match predictor count");
    for (std::size_t j = 0; j < ds.p(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        ds.values.col(col) = (ds.values.col(col).array() - stats.mean[j]) / stats.scale[j];
    }
    return ds;
}

/// Keeps the given rows (in order), all classes and availability.
inline Dataset subset_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Dataset out = ds;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.response.resize(n);
    out.values.resize(n, ds.values.cols());
    out.row_class.resize(rows.size());
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto i = rows[static_cast<std::size_t>(k)];
        out.response(k) = ds.response(static_cast<Eigen::Index>(i));
        out.values.row(k) = ds.values.row(static_cast<Eigen::Index>(i));
        out.row_class[static_cast<std::size_t>(k)] = ds.row_class[i];
    }
    for (auto& col : out.categorical) {
        std::vector<std::string> vals;
        for (auto i : rows) vals.push_back(col.values[i]);
        col.values = std::move(vals);
    }
    return out;
}

/// Per-class regression design: a leading column of ones followed by the available predictors.
struct ClassDesign {
    std::size_t class_index = 0;
    std::vector<std::size_t> rows;       // dataset row per design row
    std::vector<std::size_t> available;  // predictor indices, ascending
    Eigen::MatrixXd design;
    Eigen::VectorXd response;

    std::size_t n() const { return rows.size(); }
    std::size_t p() const { return available.size(); }
};

/// One design per class. Rows still missing an available predictor (possible only when the
/// mask was bypassed) are deleted listwise; the count goes to `*deleted` if given.
inline std::vector<ClassDesign> build_designs(const Dataset& ds, std::size_t* deleted = nullptr) {
    std::vector<ClassDesign> designs(ds.num_classes());
    std::size_t dropped = 0;
    for (std::size_t m = 0; m < ds.num_classes(); ++m) {
        auto& d = designs[m];
        d.class_index = m;
        d.available = ds.available_of(m);
        for (auto i : ds.rows_of(m)) {
            bool complete = true;
            for (auto j : d.available)
                complete = complete && !is_missing(ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            if (complete)
                d.rows.push_back(i);
            else
                ++dropped;
        }
        const auto n = static_cast<Eigen::Index>(d.rows.size());
        d.design.resize(n, static_cast<Eigen::Index>(d.available.size() + 1));
        d.response.resize(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto i = static_cast<Eigen::Index>(d.rows[static_cast<std::size_t>(r)]);
            d.design(r, 0) = 1.0;
            for (std::size_t k = 0; k < d.available.size(); ++k)
                d.design(r, static_cast<Eigen::Index>(k + 1)) = ds.values(i, static_cast<Eigen::Index>(d.available[k]));
            d.response(r) = ds.response(i);
        }
    }
    if (deleted) *deleted = dropped;
    return designs;
}

// ---------------------------------------------------------------------------
// MQ4 composite score

/// Consumer panel scores for one sample: tenderness, juiciness, flavour liking, overall liking.
struct RawPanelRecord {
    std::array<std::vector<double>, 4> scores;
};

inline constexpr std::array<double, 4> kMq4Weights{0.3, 0.1, 0.3, 0.3};
inline constexpr std::size_t kPanelSize = 10;
inline constexpr std::size_t kClipEachSide = 2;

/// Mean of the scores left after clipping the two highest and two lowest.
inline double clipped_mean(std::vector<double> scores) {
    if (scores.size() != kPanelSize)
        throw DataError("panel trait has " + std::to_string(scores.size()) + " scores, expected 10");
    std::sort(scores.begin(), scores.end());
    double sum = 0.0;
    for (std::size_t i = kClipEachSide; i < kPanelSize - kClipEachSide; ++i) sum += scores[i];
    return sum / static_cast<double>(kPanelSize - 2 * kClipEachSide);
}

inline double mq4(const RawPanelRecord& record) {
    double score = 0.0;
    for (std::size_t t = 0; t < 4; ++t) {
        for (double s : record.scores[t])
            if (!(s >= 0.0 && s <= 100.0)) throw DataError("panel score outside [0, 100]");
        score += kMq4Weights[t] * clipped_mean(record.scores[t]);
    }
    return std::clamp(score, 0.0, 100.0);
}

// ---------------------------------------------------------------------------
// Descriptive summaries

/// One line of the descriptive table. Numeric variables produce a stats row (level empty)
/// followed by a "(missing)" row; categorical variables produce one row per level plus "(missing)".
struct SummaryRow {
    std::string group;
    std::size_t group_n = 0;
    std::string variable;
    std::string level;
    std::size_t count = 0;
    double percent = 0.0;
    double mean = kMissing, sd = kMissing, median = kMissing, min = kMissing, max = kMissing;
};

struct SummaryReport {
    std::vector<SummaryRow> rows;
    std::vector<std::pair<std::string, std::size_t>> class_sizes;  // descending by size
    std::vector<std::string> matrix_columns;
    std::vector<std::string> matrix_row_class;
    std::vector<std::vector<bool>> missing;  // row per observation
};

namespace detail {

inline SummaryRow numeric_summary(std::vector<double> xs) {
    SummaryRow row;
    row.count = xs.size();
    if (xs.empty()) return row;
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    row.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - row.mean) * (x - row.mean);
    row.sd = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : kMissing;
    const auto mid = xs.size() / 2;
    row.median = xs.size() % 2 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
    row.min = xs.front();
    row.max = xs.back();
    return row;
}

} // namespace detail

/// Descriptive statistics per class and overall ("(all)"), computed on raw values before masking.
inline SummaryReport summarize(const Dataset& ds) {
    SummaryReport report;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
    for (std::size_t m = 0; m < ds.num_classes(); ++m) groups.emplace_back(ds.classes[m], ds.rows_of(m));
    std::vector<std::size_t> all(ds.n());
    std::iota(all.begin(), all.end(), 0);
    groups.emplace_back("(all)", all);

    auto percent = [](std::size_t k, std::size_t n) {
        return n ? 100.0 * static_cast<double>(k) / static_cast<double>(n) : 0.0;
    };
    auto numeric_rows = [&](const std::string& group, const std::vector<std::size_t>& rows,
                            const std::string& variable, auto&& value_of) {
        std::vector<double> xs;
        std::size_t missing = 0;
        for (auto i : rows) {
            double v = value_of(i);
            if (is_missing(v))
                ++missing;
            else
                xs.push_back(v);
        }
        auto row = detail::numeric_summary(std::move(xs));
        row.group = group;
        row.group_n = rows.size();
        row.variable = variable;
        row.percent = percent(row.count, rows.size());
        report.rows.push_back(row);
        SummaryRow miss;
        miss.group = group;
        miss.group_n = rows.size();
        miss.variable = variable;
        miss.level = "(missing)";
        miss.count = missing;
        miss.percent = percent(missing, rows.size());
        report.rows.push_back(miss);
    };

    for (const auto& [group, rows] : groups) {
        numeric_rows(group, rows, ds.response_name,
                     [&](std::size_t i) { return ds.response(static_cast<Eigen::Index>(i)); });
        for (const auto& var : ds.numeric_variables) {
            const auto j = static_cast<Eigen::Index>(ds.predictor_index(var));
            numeric_rows(group, rows, var, [&](std::size_t i) { return ds.values(static_cast<Eigen::Index>(i), j); });
        }
        for (const auto& col : ds.categorical) {
            std::vector<std::size_t> counts(col.levels.size(), 0);
            std::size_t missing = 0;
            for (auto i : rows) {
                const auto& v = col.values[i];
                if (v.empty()) {
                    ++missing;
                    continue;
                }
                auto it = std::find(col.levels.begin(), col.levels.end(), v);
                ++counts[static_cast<std::size_t>(it - col.levels.begin())];
            }
            for (std::size_t l = 0; l < col.levels.size(); ++l) {
                SummaryRow row;
                row.group = group;
                row.group_n = rows.size();
                row.variable = col.variable;
                row.level = col.levels[l];
                row.count = counts[l];
                row.percent = percent(counts[l], rows.size());
                report.rows.push_back(row);
            }
            SummaryRow miss;
            miss.group = group;
            miss.group_n = rows.size();
            miss.variable = col.variable;
            miss.level = "(missing)";
            miss.count = missing;
            miss.percent = percent(missing, rows.size());
            report.rows.push_back(miss);
        }
    }

    for (std::size_t m = 0; m < ds.num_classes(); ++m) report.class_sizes.emplace_back(ds.classes[m], ds.class_size(m));
    std::stable_sort(report.class_sizes.begin(), report.class_sizes.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    report.matrix_columns.push_back(ds.response_name);
    for (const auto& v : ds.numeric_variables) report.matrix_columns.push_back(v);
    for (const auto& c : ds.categorical) report.matrix_columns.push_back(c.variable);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        std::vector<bool> row;
        row.push_back(is_missing(ds.response(static_cast<Eigen::Index>(i))));
        for (const auto& v : ds.numeric_variables)
            row.push_back(is_missing(ds.values(static_cast<Eigen::Index>(i), ds.predictor_index(v))));
        for (const auto& c : ds.categorical) row.push_back(c.values[i].empty());
        report.missing.push_back(std::move(row));
        report.matrix_row_class.push_back(ds.classes[ds.row_class[i]]);
    }
    return report;
}

inline void write_summary_csv(std::ostream& out, const SummaryReport& report) {
    write_row(out, {"group", "group_n", "variable", "level", "count", "percent", "mean", "sd", "median", "min", "max"});
    for (const auto& r : report.rows)
        write_row(out, {r.group, std::to_string(r.group_n), r.variable, r.level, std::to_string(r.count),
                        format_double(r.percent), format_double(r.mean), format_double(r.sd),
                        format_double(r.median), format_double(r.min), format_double(r.max)});
}

inline void write_class_sizes_csv(std::ostream& out, const SummaryReport& report) {
    write_row(out, {"class", "n"});
    for (const auto& [c, n] : report.class_sizes) write_row(out, {c, std::to_string(n)});
}

inline void write_missingness_csv(std::ostream& out, const SummaryReport& report) {
    std::vector<std::string> header{"row", "class"};
    header.insert(header.end(), report.matrix_columns.begin(), report.matrix_columns.end());
    write_row(out, header);
    for (std::size_t i = 0; i < report.missing.size(); ++i) {
        std::vector<std::string> fields{std::to_string(i + 1), report.matrix_row_class[i]};
        for (bool b : report.missing[i]) fields.push_back(b ? "1" : "0");
        write_row(out, fields);
    }
}

} // namespace fusedpath
