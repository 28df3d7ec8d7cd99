#pragma once

#include <algorithm>
#include <ostream>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "fusedpath/csv.hpp"
#include "fusedpath/data_model.hpp"
#include "fusedpath/error.hpp"

namespace fusedpath {

/// Maps (class, predictor) to a slope column of the stacked coefficient vector.
/// Classes are laid out consecutively, predictors ascending within a class.
/// Intercepts are not part of the layout; they are unpenalized and handled per class.
class CoefficientLayout {
public:
    CoefficientLayout() = default;

    CoefficientLayout(const std::vector<ClassDesign>& designs, std::size_t num_predictors)
        : num_predictors_(num_predictors), index_(designs.size() * num_predictors, -1) {
        for (const auto& d : designs) {
            offsets_.push_back(size_);
            std::vector<std::size_t> preds;
            if (d.n() > 0) preds = d.available;
            for (auto j : preds) index_[d.class_index * num_predictors + j] = static_cast<long>(size_++);
            predictors_.push_back(std::move(preds));
        }
    }

    std::size_t size() const { return size_; }
    std::size_t num_classes() const { return predictors_.size(); }
    std::size_t num_predictors() const { return num_predictors_; }

    /// Slope column of predictor j in class m, or -1 if not estimated.
    long column(std::size_t m, std::size_t j) const { return index_[m * num_predictors_ + j]; }

    /// Predictors with a slope in class m.
    const std::vector<std::size_t>& predictors(std::size_t m) const { return predictors_[m]; }
    std::size_t offset(std::size_t m) const { return offsets_[m]; }

    /// Classes carrying predictor j, ascending.
    std::vector<std::size_t> classes_with(std::size_t j) const {
        std::vector<std::size_t> out;
        for (std::size_t m = 0; m < num_classes(); ++m)
            if (column(m, j) >= 0) out.push_back(m);
        return out;
    }

private:
    std::size_t num_predictors_ = 0;
    std::size_t size_ = 0;
    std::vector<long> index_;
    std::vector<std::size_t> offsets_;
    std::vector<std::vector<std::size_t>> predictors_;
};

/// A penalized difference beta_j^(first) - beta_j^(second), first < second.
struct FusionPair {
    std::size_t predictor = 0;
    std::size_t first = 0;
    std::size_t second = 0;
    double raw_weight = 1.0;  // max(n, n') / min(n, n')
    double weight = 1.0;      // raw_weight / max raw_weight over all class pairs
};

/// All class pairs sharing a predictor, sorted by (predictor, first, second).
/// Classes with no rows take no part. The normalizer is the largest size ratio over all
/// pairs of non-empty classes, shared by every predictor.
inline std::vector<FusionPair> build_pairs(const std::vector<ClassDesign>& designs, std::size_t num_predictors) {
    std::vector<std::size_t> active;
    for (std::size_t m = 0; m < designs.size(); ++m)
        if (designs[m].n() > 0) active.push_back(m);

    auto ratio = [&](std::size_t a, std::size_t b) {
        const double na = static_cast<double>(designs[a].n()), nb = static_cast<double>(designs[b].n());
        return std::max(na, nb) / std::min(na, nb);
    };
    double max_ratio = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a)
        for (std::size_t b = a + 1; b < active.size(); ++b) max_ratio = std::max(max_ratio, ratio(active[a], active[b]));

    auto has = [&](std::size_t m, std::size_t j) {
        const auto& av = designs[m].available;
        return std::binary_search(av.begin(), av.end(), j);
    };
    std::vector<FusionPair> pairs;
    for (std::size_t j = 0; j < num_predictors; ++j)
        for (std::size_t a = 0; a < active.size(); ++a)
            for (std::size_t b = a + 1; b < active.size(); ++b) {
                const auto m = active[a], mm = active[b];
                if (!has(m, j) || !has(mm, j)) continue;
                const double raw = ratio(m, mm);
                pairs.push_back({j, m, mm, raw, raw / max_ratio});
            }
    return pairs;
}

/// Sparse generalized-lasso operator: one row per pair, +w and -w in the two slope columns.
struct CouplingMatrix {
    std::vector<FusionPair> pairs;
    Eigen::SparseMatrix<double, Eigen::RowMajor> D;

    std::size_t rows() const { return pairs.size(); }
};

inline CouplingMatrix build_D(std::vector<FusionPair> pairs, const CoefficientLayout& layout) {
    std::sort(pairs.begin(), pairs.end(), [](const FusionPair& a, const FusionPair& b) {
        return std::tie(a.predictor, a.first, a.second) < std::tie(b.predictor, b.first, b.second);
    });
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(2 * pairs.size());
    for (std::size_t r = 0; r < pairs.size(); ++r) {
        const auto& p = pairs[r];
        const long c1 = p.first < layout.num_classes() ? layout.column(p.first, p.predictor) : -1;
        const long c2 = p.second < layout.num_classes() ? layout.column(p.second, p.predictor) : -1;
        if (c1 < 0 || c2 < 0) throw UsageError("coupling: layout has no column for a fused coefficient");
        entries.emplace_back(static_cast<int>(r), static_cast<int>(c1), p.weight);
        entries.emplace_back(static_cast<int>(r), static_cast<int>(c2), -p.weight);
    }
    CouplingMatrix cm;
    cm.pairs = std::move(pairs);
    cm.D.resize(static_cast<Eigen::Index>(cm.pairs.size()), static_cast<Eigen::Index>(layout.size()));
    cm.D.setFromTriplets(entries.begin(), entries.end());
    cm.D.makeCompressed();
    return cm;
}

/// Sum of w |b_j^(m) - b_j^(m')| over pairs, evaluated without D.
inline double pairwise_penalty(const std::vector<FusionPair>& pairs, const CoefficientLayout& layout,
                               const Eigen::VectorXd& slopes) {
    double total = 0.0;
    for (const auto& p : pairs)
        total += p.weight * std::abs(slopes(layout.column(p.first, p.predictor)) - slopes(layout.column(p.second, p.predictor)));
    return total;
}

/// Debug export: one line per pair, then the (row, col, value) triplets of D.
inline void write_pairs_csv(std::ostream& out, const CouplingMatrix& cm, const Dataset& ds) {
    write_row(out, {"row", "predictor", "class_a", "class_b", "raw_weight", "weight"});
    for (std::size_t r = 0; r < cm.pairs.size(); ++r) {
        const auto& p = cm.pairs[r];
        write_row(out, {std::to_string(r), ds.predictors[p.predictor].name, ds.classes[p.first], ds.classes[p.second],
                        format_double(p.raw_weight), format_double(p.weight)});
    }
}

inline void write_coupling_csv(std::ostream& out, const CouplingMatrix& cm) {
    write_row(out, {"row", "col", "value"});
    for (int r = 0; r < cm.D.outerSize(); ++r)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(cm.D, r); it; ++it)
            write_row(out, {std::to_string(it.row()), std::to_string(it.col()), format_double(it.value())});
}

} // namespace fusedpath
