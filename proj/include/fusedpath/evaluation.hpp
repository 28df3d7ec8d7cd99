#pragma once

#include <array>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fusedpath/csv.hpp"
#include "fusedpath/data_model.hpp"
#include "fusedpath/error.hpp"

namespace fusedpath {

/// Boundaries 2*/3*, 3*/4*, 4*/5* on the score scale. Values are configuration; this
/// library ships no defaults.
struct StarThresholds {
    double t3 = 0.0, t4 = 0.0, t5 = 0.0;

    void validate() const {
        if (!(t3 < t4 && t4 < t5)) throw UsageError("star thresholds must be strictly ascending");
        if (!(t3 > 0.0 && t5 < 100.0)) throw UsageError("star thresholds must lie in (0, 100)");
    }

    /// "t3,t4,t5"
    static StarThresholds parse(const std::string& text) {
        auto parts = detail::split_list(text);
        if (parts.size() != 3) throw UsageError("thresholds: expected 't3,t4,t5', got '" + text + "'");
        std::array<double, 3> v{};
        for (std::size_t i = 0; i < 3; ++i) {
            auto d = detail::parse_double(parts[i]);
            if (!d) throw UsageError("thresholds: '" + parts[i] + "' is not a number");
            v[i] = *d;
        }
        StarThresholds t{v[0], v[1], v[2]};
        t.validate();
        return t;
    }
};

/// 2..5; a score on a boundary takes the higher star.
inline int to_stars(double score, const StarThresholds& t) {
    if (score < t.t3) return 2;
    if (score < t.t4) return 3;
    if (score < t.t5) return 4;
    return 5;
}

/// Rows are the true star, columns the predicted star (index 0 = 2*).
struct ConfusionMatrix {
    std::array<std::array<std::size_t, 4>, 4> counts{};

    void add(int truth, int predicted) { ++counts[static_cast<std::size_t>(truth - 2)][static_cast<std::size_t>(predicted - 2)]; }

    std::size_t total() const {
        std::size_t s = 0;
        for (const auto& row : counts)
            for (auto c : row) s += c;
        return s;
    }
    std::size_t diagonal() const {
        std::size_t s = 0;
        for (std::size_t i = 0; i < 4; ++i) s += counts[i][i];
        return s;
    }
    /// Cells with truth above the prediction (under-prediction).
    std::size_t lower_triangle() const {
        std::size_t s = 0;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < i; ++j) s += counts[i][j];
        return s;
    }

    bool operator==(const ConfusionMatrix&) const = default;
};

inline double accuracy(const ConfusionMatrix& cm) {
    const auto n = cm.total();
    return n ? static_cast<double>(cm.diagonal()) / static_cast<double>(n) : kMissing;
}

/// Correct, or under-predicted so the consumer gets better quality than the rating claims.
inline double consumer_accuracy(const ConfusionMatrix& cm) {
    const auto n = cm.total();
    return n ? static_cast<double>(cm.diagonal() + cm.lower_triangle()) / static_cast<double>(n) : kMissing;
}

inline ConfusionMatrix confusion(std::span<const double> truths, std::span<const double> predictions,
                                 const StarThresholds& t) {
    if (truths.size() != predictions.size()) throw UsageError("confusion: size mismatch");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truths.size(); ++i) cm.add(to_stars(truths[i], t), to_stars(predictions[i], t));
    return cm;
}

struct ClassEvaluation {
    std::string class_id;
    std::size_t n = 0;
    double mae = kMissing;
    double mse = kMissing;
    ConfusionMatrix confusion;
    double accuracy = kMissing;
    double consumer_accuracy = kMissing;
};

struct EvaluationReport {
    std::vector<ClassEvaluation> classes;  // classes with at least one pair
    double macro_mae = kMissing;
    double micro_mae = kMissing;
    ConfusionMatrix overall;
    double accuracy = kMissing;
    double consumer_accuracy = kMissing;
};

/// Per-class MAE, confusion matrix and both accuracies; macro (equal class weight) and micro
/// (pooled pairs) aggregates.
inline EvaluationReport per_class_report(std::span<const double> predictions, std::span<const double> truths,
                                         std::span<const std::size_t> classes, const std::vector<std::string>& class_ids,
                                         const StarThresholds& t) {
    if (predictions.size() != truths.size() || truths.size() != classes.size())
        throw UsageError("per_class_report: size mismatch");
    t.validate();
    EvaluationReport report;
    double abs_total = 0.0, macro = 0.0;
    std::size_t total = 0;
    for (std::size_t m = 0; m < class_ids.size(); ++m) {
        ClassEvaluation ce;
        ce.class_id = class_ids[m];
        double abs_sum = 0.0, sq_sum = 0.0;
        for (std::size_t i = 0; i < truths.size(); ++i) {
            if (classes[i] != m) continue;
            const double e = predictions[i] - truths[i];
            abs_sum += std::abs(e);
            sq_sum += e * e;
            ce.confusion.add(to_stars(truths[i], t), to_stars(predictions[i], t));
            report.overall.add(to_stars(truths[i], t), to_stars(predictions[i], t));
            ++ce.n;
        }
        if (ce.n == 0) continue;
        ce.mae = abs_sum / static_cast<double>(ce.n);
        ce.mse = sq_sum / static_cast<double>(ce.n);
        ce.accuracy = accuracy(ce.confusion);
        ce.consumer_accuracy = consumer_accuracy(ce.confusion);
        abs_total += abs_sum;
        total += ce.n;
        macro += ce.mae;
        report.classes.push_back(ce);
    }
    if (!report.classes.empty()) {
        report.macro_mae = macro / static_cast<double>(report.classes.size());
        report.micro_mae = abs_total / static_cast<double>(total);
    }
    report.accuracy = accuracy(report.overall);
    report.consumer_accuracy = consumer_accuracy(report.overall);
    return report;
}

/// Several methods evaluated on the same observations, e.g. CV selected / new pooled /
/// classic pooled / separate.
struct MethodComparison {
    std::vector<std::string> methods;
    std::vector<EvaluationReport> reports;
};

/// One row per class: class, n, then the MAE of each method; closing macro and micro rows.
inline void write_comparison_csv(std::ostream& out, const MethodComparison& cmp) {
    std::vector<std::string> header{"class", "n"};
    header.insert(header.end(), cmp.methods.begin(), cmp.methods.end());
    write_row(out, header);
    if (cmp.reports.empty()) return;
    const auto& first = cmp.reports.front();
    for (std::size_t c = 0; c < first.classes.size(); ++c) {
        std::vector<std::string> row{first.classes[c].class_id, std::to_string(first.classes[c].n)};
        for (const auto& r : cmp.reports) row.push_back(format_double(r.classes[c].mae));
        write_row(out, row);
    }
    std::size_t total = 0;
    for (const auto& ce : first.classes) total += ce.n;
    std::vector<std::string> macro{"(macro)", std::to_string(total)}, micro{"(micro)", std::to_string(total)};
    for (const auto& r : cmp.reports) {
        macro.push_back(format_double(r.macro_mae));
        micro.push_back(format_double(r.micro_mae));
    }
    write_row(out, macro);
    write_row(out, micro);
}

/// Long format: method, class, truth_star, predicted_star, count (all 16 cells per class).
inline void write_confusion_csv(std::ostream& out, const MethodComparison& cmp) {
    write_row(out, {"method", "class", "truth_star", "predicted_star", "count"});
    for (std::size_t k = 0; k < cmp.methods.size(); ++k) {
        auto emit = [&](const std::string& cls, const ConfusionMatrix& cm) {
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    write_row(out, {cmp.methods[k], cls, std::to_string(i + 2), std::to_string(j + 2),
                                    std::to_string(cm.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])});
        };
        for (const auto& ce : cmp.reports[k].classes) emit(ce.class_id, ce.confusion);
        emit("(all)", cmp.reports[k].overall);
    }
}

} // namespace fusedpath
