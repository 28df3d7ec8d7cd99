#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "fusedpath/data_model.hpp"
#include "fusedpath/error.hpp"
#include "fusedpath/fusion_graph.hpp"

namespace fusedpath {

struct FitConfig {
    std::size_t grid_size = 100;
    double lambda_min_ratio = 1e-4;
    double admm_rho = 1.0;
    double tol_abs = 1e-8;
    double tol_rel = 1e-6;
    std::size_t max_iter = 50000;
    double fuse_tol = 1e-6;

    void validate() const {
        if (grid_size == 0) throw UsageError("grid_size must be positive");
        if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0))
            throw UsageError("lambda_min_ratio must lie in (0, 1)");
        if (!(admm_rho > 0.0) || !(tol_abs > 0.0) || !(tol_rel > 0.0) || !(fuse_tol > 0.0))
            throw UsageError("rho, tolerances and fuse_tol must be positive");
        if (max_iter == 0) throw UsageError("max_iter must be positive");
    }
};

/// Per-class intercepts plus slopes in CoefficientLayout order, standardized predictor scale.
struct Coefficients {
    Eigen::VectorXd intercepts;
    Eigen::VectorXd slopes;
};

/// Per predictor, the classes grouped by equal fitted slope. Groups are listed by ascending
/// value; classes within a group ascend.
using FusionPartition = std::vector<std::vector<std::vector<std::size_t>>>;

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(double lambda, Coefficients last, double primal, double dual, std::size_t iterations)
        : std::runtime_error("ADMM did not converge at lambda=" + format_double(lambda) + " after " +
                             std::to_string(iterations) + " iterations (primal residual " + format_double(primal) +
                             ", dual residual " + format_double(dual) + ")"),
          lambda_(lambda), last_(std::move(last)), primal_(primal), dual_(dual) {}

    double lambda() const noexcept { return lambda_; }
    const Coefficients& last_iterate() const noexcept { return last_; }
    double primal_residual() const noexcept { return primal_; }
    double dual_residual() const noexcept { return dual_; }

private:
    double lambda_;
    Coefficients last_;
    double primal_, dual_;
};

namespace detail {

/// Pseudo-inverse of a symmetric positive semidefinite matrix via eigendecomposition.
class PsdSolver {
public:
    PsdSolver() = default;
    explicit PsdSolver(const Eigen::MatrixXd& a) {
        if (a.rows() == 0) return;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
        vectors_ = eig.eigenvectors();
        const auto& vals = eig.eigenvalues();
        const double cutoff = 1e-11 * std::max(1.0, vals.cwiseAbs().maxCoeff());
        inv_.resize(vals.size());
        rank_ = 0;
        for (Eigen::Index i = 0; i < vals.size(); ++i) {
            if (vals(i) > cutoff) {
                inv_(i) = 1.0 / vals(i);
                ++rank_;
            } else {
                inv_(i) = 0.0;
            }
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        if (rhs.size() == 0) return rhs;
        return vectors_ * (inv_.asDiagonal() * (vectors_.transpose() * rhs));
    }

    Eigen::Index rank() const { return rank_; }
    Eigen::Index size() const { return inv_.size(); }
    bool full_rank() const { return rank_ == inv_.size(); }

private:
    Eigen::MatrixXd vectors_;
    Eigen::VectorXd inv_;
    Eigen::Index rank_ = 0;
};

inline Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
    return v.unaryExpr([t](double x) { return x > t ? x - t : (x < -t ? x + t : 0.0); });
}

} // namespace detail

/// The fused least-squares problem over centered class designs. Intercepts are profiled out:
/// for fixed slopes b_m the optimal intercept is mean(y_m) - mean(x_m) b_m.
class FusedProblem {
public:
    FusedProblem(std::vector<ClassDesign> designs, std::vector<std::string> class_ids, std::size_t num_predictors)
        : designs_(std::move(designs)), class_ids_(std::move(class_ids)), layout_(designs_, num_predictors),
          coupling_(build_D(build_pairs(designs_, num_predictors), layout_)) {
        const auto d = static_cast<Eigen::Index>(layout_.size());
        gram_ = Eigen::MatrixXd::Zero(d, d);
        xty_ = Eigen::VectorXd::Zero(d);
        for (const auto& des : designs_) {
            const auto m = des.class_index;
            Block blk;
            if (des.n() > 0) {
                const auto p = static_cast<Eigen::Index>(des.p());
                Eigen::MatrixXd x = des.design.rightCols(p);
                blk.xbar = x.colwise().mean();
                blk.ybar = des.response.mean();
                blk.xc = x.rowwise() - blk.xbar;
                blk.yc = des.response.array() - blk.ybar;
                const auto off = static_cast<Eigen::Index>(layout_.offset(m));
                gram_.block(off, off, p, p) = blk.xc.transpose() * blk.xc;
                xty_.segment(off, p) = blk.xc.transpose() * blk.yc;
            }
            blocks_.push_back(std::move(blk));
        }
    }

    /// Designs, layout and coupling for a standardized dataset.
    static FusedProblem from_dataset(const Dataset& standardized) {
        return FusedProblem(build_designs(standardized), standardized.classes, standardized.p());
    }

    const std::vector<ClassDesign>& designs() const { return designs_; }
    const std::vector<std::string>& class_ids() const { return class_ids_; }
    const CoefficientLayout& layout() const { return layout_; }
    const CouplingMatrix& coupling() const { return coupling_; }
    const Eigen::MatrixXd& gram() const { return gram_; }
    const Eigen::VectorXd& xty() const { return xty_; }
    std::size_t dim() const { return layout_.size(); }
    std::size_t num_classes() const { return designs_.size(); }

    std::size_t n() const {
        std::size_t total = 0;
        for (const auto& d : designs_) total += d.n();
        return total;
    }

    std::size_t active_classes() const {
        return static_cast<std::size_t>(
            std::count_if(designs_.begin(), designs_.end(), [](const ClassDesign& d) { return d.n() > 0; }));
    }

    Eigen::VectorXd class_slopes(const Eigen::VectorXd& slopes, std::size_t m) const {
        return slopes.segment(static_cast<Eigen::Index>(layout_.offset(m)),
                              static_cast<Eigen::Index>(layout_.predictors(m).size()));
    }

    /// Profiled intercepts; NaN for classes without rows.
    Eigen::VectorXd intercepts_for(const Eigen::VectorXd& slopes) const {
        Eigen::VectorXd a(static_cast<Eigen::Index>(num_classes()));
        for (std::size_t m = 0; m < num_classes(); ++m) {
            const auto& blk = blocks_[m];
            a(static_cast<Eigen::Index>(m)) =
                designs_[m].n() == 0 ? kMissing : blk.ybar - blk.xbar.dot(class_slopes(slopes, m));
        }
        return a;
    }

    Coefficients with_intercepts(Eigen::VectorXd slopes) const {
        Coefficients c;
        c.intercepts = intercepts_for(slopes);
        c.slopes = std::move(slopes);
        return c;
    }

    /// Residual sum of squares with profiled intercepts.
    double rss(const Eigen::VectorXd& slopes) const {
        double total = 0.0;
        for (std::size_t m = 0; m < num_classes(); ++m) {
            if (designs_[m].n() == 0) continue;
            const auto& blk = blocks_[m];
            total += (blk.yc - blk.xc * class_slopes(slopes, m)).squaredNorm();
        }
        return total;
    }

    double penalty(const Eigen::VectorXd& slopes) const { return (coupling_.D * slopes).lpNorm<1>(); }

    double objective(const Eigen::VectorXd& slopes, double lambda) const {
        return 0.5 * rss(slopes) + lambda * penalty(slopes);
    }

    /// Predictions for the problem's own design rows, class by class.
    std::vector<Eigen::VectorXd> fitted(const Coefficients& coef) const {
        std::vector<Eigen::VectorXd> out;
        for (std::size_t m = 0; m < num_classes(); ++m) {
            const auto& d = designs_[m];
            if (d.n() == 0) {
                out.emplace_back();
                continue;
            }
            Eigen::VectorXd beta(static_cast<Eigen::Index>(d.p() + 1));
            beta(0) = coef.intercepts(static_cast<Eigen::Index>(m));
            beta.tail(static_cast<Eigen::Index>(d.p())) = class_slopes(coef.slopes, m);
            out.push_back(d.design * beta);
        }
        return out;
    }

private:
    struct Block {
        Eigen::MatrixXd xc;
        Eigen::VectorXd yc;
        Eigen::RowVectorXd xbar;
        double ybar = 0.0;
    };

    std::vector<ClassDesign> designs_;
    std::vector<std::string> class_ids_;
    CoefficientLayout layout_;
    CouplingMatrix coupling_;
    std::vector<Block> blocks_;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd xty_;
};

/// Groups each predictor's slopes across classes; values within `tol` are chained transitively.
inline FusionPartition fusion_partition(const CoefficientLayout& layout, const Eigen::VectorXd& slopes, double tol) {
    FusionPartition partition(layout.num_predictors());
    for (std::size_t j = 0; j < layout.num_predictors(); ++j) {
        auto members = layout.classes_with(j);
        std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            return slopes(layout.column(a, j)) < slopes(layout.column(b, j));
        });
        auto& groups = partition[j];
        for (std::size_t k = 0; k < members.size(); ++k) {
            const double v = slopes(layout.column(members[k], j));
            if (k == 0 || v - slopes(layout.column(members[k - 1], j)) > tol) groups.emplace_back();
            groups.back().push_back(members[k]);
        }
        for (auto& g : groups) std::sort(g.begin(), g.end());
    }
    return partition;
}

/// Distinct slope values plus one intercept per class with data.
inline std::size_t degrees_of_freedom(const FusionPartition& partition, std::size_t intercepts) {
    std::size_t df = intercepts;
    for (const auto& groups : partition) df += groups.size();
    return df;
}

/// True when every predictor has a single group over the classes carrying it.
inline bool fully_pooled(const FusionPartition& partition) {
    return std::all_of(partition.begin(), partition.end(), [](const auto& g) { return g.size() <= 1; });
}

namespace detail {

/// Exact minimizer of the fused objective restricted to a fusion structure: slopes inside a group
/// are equal and the order between groups is fixed, so the penalty is linear in the group values.
/// Groups whose order flips are merged and the solve repeated. Returns nullopt if the slopes
/// don't reduce to a consistent structure.
inline std::optional<Eigen::VectorXd> solve_on_structure(const FusedProblem& problem, const Eigen::VectorXd& slopes,
                                                         double lambda, double fuse_tol) {
    const auto& layout = problem.layout();
    const auto d = static_cast<Eigen::Index>(layout.size());
    if (d == 0) return slopes;
    auto partition = fusion_partition(layout, slopes, fuse_tol);

    // group id per slope column (union-find so flipped groups can merge)
    std::vector<std::size_t> parent;
    std::vector<long> group_of(static_cast<std::size_t>(d), -1);
    for (std::size_t j = 0; j < partition.size(); ++j)
        for (const auto& g : partition[j]) {
            for (auto m : g) group_of[static_cast<std::size_t>(layout.column(m, j))] = static_cast<long>(parent.size());
            parent.push_back(parent.size());
        }
    auto find = [&](std::size_t g) {
        while (parent[g] != g) g = parent[g] = parent[parent[g]];
        return g;
    };
    // reference ordering from the input slopes: group mean value
    std::vector<double> ref(parent.size(), 0.0);
    std::vector<double> cnt(parent.size(), 0.0);
    for (Eigen::Index c = 0; c < d; ++c) {
        ref[static_cast<std::size_t>(group_of[static_cast<std::size_t>(c)])] += slopes(c);
        cnt[static_cast<std::size_t>(group_of[static_cast<std::size_t>(c)])] += 1.0;
    }
    for (std::size_t g = 0; g < ref.size(); ++g) ref[g] /= cnt[g];

    const auto& pairs = problem.coupling().pairs;
    for (std::size_t attempt = 0; attempt <= parent.size(); ++attempt) {
        std::vector<long> compact(parent.size(), -1);
        Eigen::Index num_groups = 0;
        for (std::size_t g = 0; g < parent.size(); ++g)
            if (find(g) == g) compact[g] = num_groups++;
        std::vector<Eigen::Index> col_group(static_cast<std::size_t>(d));
        for (Eigen::Index c = 0; c < d; ++c)
            col_group[static_cast<std::size_t>(c)] =
                compact[find(static_cast<std::size_t>(group_of[static_cast<std::size_t>(c)]))];
        // order sign for each pair between distinct groups
        std::vector<double> group_ref(static_cast<std::size_t>(num_groups), 0.0), group_cnt(static_cast<std::size_t>(num_groups), 0.0);
        for (std::size_t g = 0; g < parent.size(); ++g) {
            group_ref[static_cast<std::size_t>(compact[find(g)])] += ref[g] * cnt[g];
            group_cnt[static_cast<std::size_t>(compact[find(g)])] += cnt[g];
        }
        for (std::size_t g = 0; g < group_ref.size(); ++g) group_ref[g] /= group_cnt[g];

        Eigen::MatrixXd reduced_gram = Eigen::MatrixXd::Zero(num_groups, num_groups);
        Eigen::VectorXd reduced_rhs = Eigen::VectorXd::Zero(num_groups);
        const auto& h = problem.gram();
        const auto& g = problem.xty();
        for (Eigen::Index r = 0; r < d; ++r) {
            const auto gr = col_group[static_cast<std::size_t>(r)];
            reduced_rhs(gr) += g(r);
            for (Eigen::Index c = 0; c < d; ++c) {
                if (h(r, c) != 0.0) reduced_gram(gr, col_group[static_cast<std::size_t>(c)]) += h(r, c);
            }
        }
        std::vector<double> pair_sign(pairs.size(), 0.0);
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const auto& p = pairs[k];
            const auto ga = col_group[static_cast<std::size_t>(layout.column(p.first, p.predictor))];
            const auto gb = col_group[static_cast<std::size_t>(layout.column(p.second, p.predictor))];
            if (ga == gb) continue;
            const double s = group_ref[static_cast<std::size_t>(ga)] > group_ref[static_cast<std::size_t>(gb)] ? 1.0 : -1.0;
            pair_sign[k] = s;
            reduced_rhs(ga) -= lambda * s * p.weight;
            reduced_rhs(gb) += lambda * s * p.weight;
        }
        PsdSolver solver(reduced_gram);
        if (!solver.full_rank()) return std::nullopt;
        const Eigen::VectorXd values = solver.solve(reduced_rhs);

        // find the worst order violation
        double worst = 0.0;
        std::size_t worst_k = pairs.size();
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (pair_sign[k] == 0.0) continue;
            const auto& p = pairs[k];
            const auto ga = col_group[static_cast<std::size_t>(layout.column(p.first, p.predictor))];
            const auto gb = col_group[static_cast<std::size_t>(layout.column(p.second, p.predictor))];
            const double gap = pair_sign[k] * (values(ga) - values(gb));
            if (gap < worst) {
                worst = gap;
                worst_k = k;
            }
        }
        if (worst_k == pairs.size()) {
            Eigen::VectorXd out(d);
            for (Eigen::Index c = 0; c < d; ++c) out(c) = values(col_group[static_cast<std::size_t>(c)]);
            return out;
        }
        const auto& p = pairs[worst_k];
        const auto a = find(static_cast<std::size_t>(group_of[static_cast<std::size_t>(layout.column(p.first, p.predictor))]));
        const auto b = find(static_cast<std::size_t>(group_of[static_cast<std::size_t>(layout.column(p.second, p.predictor))]));
        parent[a] = b;
    }
    return std::nullopt;
}

} // namespace detail

/// Iterate carried between neighbouring lambdas.
struct AdmmState {
    Eigen::VectorXd slopes;
    Eigen::VectorXd z;  // split variable, approximates D * slopes
    Eigen::VectorXd u;  // scaled dual
    double lambda = 0.0;
};

struct SolveResult {
    Coefficients coefficients;
    AdmmState state;
    std::size_t iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    bool polished = false;
    std::vector<std::string> warnings;
};

/// ADMM for min 1/2 RSS + lambda ||D b||_1 with the split z = D b and fixed rho. The linear
/// system (H + rho D'D) is factored once, so one solver serves a whole lambda grid.
/// Each converged iterate is polished by an exact solve on its fusion structure, kept only if
/// it does not raise the objective.
class AdmmSolver {
public:
    AdmmSolver(const FusedProblem& problem, FitConfig config) : problem_(&problem), config_(config) {
        config_.validate();
        const Eigen::MatrixXd dense_d = Eigen::MatrixXd(problem.coupling().D);
        system_ = detail::PsdSolver(problem.gram() + config_.admm_rho * dense_d.transpose() * dense_d);
        gram_solver_ = detail::PsdSolver(problem.gram());
    }

    const FusedProblem& problem() const { return *problem_; }
    const FitConfig& config() const { return config_; }

    SolveResult solve(double lambda, const AdmmState* warm = nullptr) const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be finite and >= 0");
        const auto& prob = *problem_;
        const auto& D = prob.coupling().D;
        SolveResult result;

        if (lambda == 0.0 || D.rows() == 0) {
            Eigen::VectorXd b = gram_solver_.solve(prob.xty());
            if (!gram_solver_.full_rank()) result.warnings.push_back(rank_warning());
            result.state = {b, D * b, Eigen::VectorXd::Zero(D.rows()), lambda};
            result.coefficients = prob.with_intercepts(std::move(b));
            return result;
        }

        const double rho = config_.admm_rho;
        Eigen::VectorXd b, z, u;
        if (warm && warm->slopes.size() == static_cast<Eigen::Index>(prob.dim()) && warm->z.size() == D.rows()) {
            b = warm->slopes;
            z = warm->z;
            u = warm->u;
            if (warm->lambda > 0.0) u *= lambda / warm->lambda;
        } else {
            b = gram_solver_.solve(prob.xty());
            z = D * b;
            u = Eigen::VectorXd::Zero(D.rows());
        }

        const double sqrt_rows = std::sqrt(static_cast<double>(D.rows()));
        const double sqrt_dim = std::sqrt(static_cast<double>(prob.dim()));
        double r_norm = 0.0, s_norm = 0.0;
        std::size_t it = 0;
        bool converged = false;
        Eigen::VectorXd db;
        for (; it < config_.max_iter; ++it) {
            b = system_.solve(prob.xty() + rho * (D.transpose() * (z - u)));
            db = D * b;
            Eigen::VectorXd z_old = z;
            z = detail::soft_threshold(db + u, lambda / rho);
            u += db - z;
            r_norm = (db - z).norm();
            s_norm = rho * (D.transpose() * (z - z_old)).norm();
            const double eps_pri = sqrt_rows * config_.tol_abs + config_.tol_rel * std::max(db.norm(), z.norm());
            const double eps_dual = sqrt_dim * config_.tol_abs + config_.tol_rel * rho * (D.transpose() * u).norm();
            if (r_norm <= eps_pri && s_norm <= eps_dual) {
                ++it;
                converged = true;
                break;
            }
        }
        result.iterations = it;
        result.primal_residual = r_norm;
        result.dual_residual = s_norm;
        if (!converged) throw ConvergenceError(lambda, prob.with_intercepts(b), r_norm, s_norm, it);

        if (auto polished = detail::solve_on_structure(prob, b, lambda, config_.fuse_tol)) {
            const double before = prob.objective(b, lambda);
            const double after = prob.objective(*polished, lambda);
            if (after <= before + 1e-12 * std::max(1.0, std::abs(before))) {
                b = std::move(*polished);
                result.polished = true;
            }
        }
        result.state = {b, z, u, lambda};
        result.coefficients = prob.with_intercepts(std::move(b));
        return result;
    }

private:
    std::string rank_warning() const {
        std::string names;
        const auto& prob = *problem_;
        for (std::size_t m = 0; m < prob.num_classes(); ++m) {
            const auto p = static_cast<Eigen::Index>(prob.layout().predictors(m).size());
            if (p == 0) continue;
            const auto off = static_cast<Eigen::Index>(prob.layout().offset(m));
            detail::PsdSolver block(prob.gram().block(off, off, p, p));
            if (!block.full_rank()) names += (names.empty() ? "" : ", ") + prob.class_ids()[m];
        }
        return "rank-deficient design in class(es) " + names + "; minimum-norm least squares used";
    }

    const FusedProblem* problem_;
    FitConfig config_;
    detail::PsdSolver system_;
    detail::PsdSolver gram_solver_;
};

/// Single-lambda solve. Prefer AdmmSolver when solving several lambdas.
inline SolveResult solve_at(const FusedProblem& problem, double lambda, const FitConfig& config = {},
                            const AdmmState* warm = nullptr) {
    return AdmmSolver(problem, config).solve(lambda, warm);
}

// ---------------------------------------------------------------------------
// Least-squares endpoints

namespace detail {

/// Slopes shared within each (predictor) group, intercepts per class or shared, fitted as one
/// least-squares problem on a stacked design. `group_of` maps slope column -> group column.
inline Coefficients stacked_fit(const FusedProblem& problem, const std::vector<Eigen::Index>& group_of,
                                Eigen::Index num_groups, bool shared_intercept) {
    const auto& designs = problem.designs();
    const auto& layout = problem.layout();
    const Eigen::Index n = static_cast<Eigen::Index>(problem.n());
    std::vector<std::size_t> active;
    for (std::size_t m = 0; m < designs.size(); ++m)
        if (designs[m].n() > 0) active.push_back(m);
    const Eigen::Index num_icpt = shared_intercept ? 1 : static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, num_icpt + num_groups);
    Eigen::VectorXd y(n);
    Eigen::Index row = 0;
    for (std::size_t a = 0; a < active.size(); ++a) {
        const auto& d = designs[active[a]];
        const auto rows = static_cast<Eigen::Index>(d.n());
        x.block(row, shared_intercept ? 0 : static_cast<Eigen::Index>(a), rows, 1).setOnes();
        for (std::size_t k = 0; k < d.p(); ++k) {
            const auto col = layout.column(active[a], d.available[k]);
            x.block(row, num_icpt + group_of[static_cast<std::size_t>(col)], rows, 1) +=
                d.design.col(static_cast<Eigen::Index>(k + 1));
        }
        y.segment(row, rows) = d.response;
        row += rows;
    }
    const Eigen::VectorXd theta = x.completeOrthogonalDecomposition().solve(y);
    Coefficients c;
    c.intercepts = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(designs.size()), kMissing);
    for (std::size_t a = 0; a < active.size(); ++a)
        c.intercepts(static_cast<Eigen::Index>(active[a])) = theta(shared_intercept ? 0 : static_cast<Eigen::Index>(a));
    c.slopes.resize(static_cast<Eigen::Index>(layout.size()));
    for (std::size_t col = 0; col < layout.size(); ++col)
        c.slopes(static_cast<Eigen::Index>(col)) = theta(num_icpt + group_of[col]);
    return c;
}

} // namespace detail

/// Independent OLS per class (the lambda = 0 endpoint). Throws RankDeficientError naming the class.
inline Coefficients fit_separate(const FusedProblem& problem) {
    const auto& layout = problem.layout();
    Coefficients c;
    c.intercepts = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(problem.num_classes()), kMissing);
    c.slopes = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size()));
    for (const auto& d : problem.designs()) {
        if (d.n() == 0) continue;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.design);
        if (qr.rank() < d.design.cols())
            throw RankDeficientError(problem.class_ids()[d.class_index],
                                     "class '" + problem.class_ids()[d.class_index] + "' has a rank-deficient design");
        const Eigen::VectorXd beta = qr.solve(d.response);
        c.intercepts(static_cast<Eigen::Index>(d.class_index)) = beta(0);
        c.slopes.segment(static_cast<Eigen::Index>(layout.offset(d.class_index)), static_cast<Eigen::Index>(d.p())) =
            beta.tail(static_cast<Eigen::Index>(d.p()));
    }
    return c;
}

/// One slope per predictor over the classes carrying it; class intercepts unless `shared_intercept`.
inline Coefficients fit_new_pooled(const FusedProblem& problem, bool shared_intercept = false) {
    const auto& layout = problem.layout();
    std::vector<Eigen::Index> group_of(layout.size());
    std::vector<Eigen::Index> group_id(layout.num_predictors(), -1);
    Eigen::Index num_groups = 0;
    for (std::size_t m = 0; m < layout.num_classes(); ++m)
        for (auto j : layout.predictors(m)) {
            if (group_id[j] < 0) group_id[j] = num_groups++;
            group_of[static_cast<std::size_t>(layout.column(m, j))] = group_id[j];
        }
    return detail::stacked_fit(problem, group_of, num_groups, shared_intercept);
}

/// Single OLS on the stacked data with one intercept and only the predictors every class carries.
/// Slopes of the other predictors are zero.
inline Coefficients fit_classic_pooled(const FusedProblem& problem) {
    const auto& layout = problem.layout();
    std::vector<std::size_t> common;
    for (std::size_t j = 0; j < layout.num_predictors(); ++j) {
        bool everywhere = true;
        for (const auto& d : problem.designs())
            if (d.n() > 0) everywhere = everywhere && layout.column(d.class_index, j) >= 0;
        if (everywhere) common.push_back(j);
    }
    // group_of: position in `common`, or num_common for predictors left out
    std::vector<Eigen::Index> group_of(layout.size());
    const auto num_common = static_cast<Eigen::Index>(common.size());
    for (std::size_t m = 0; m < layout.num_classes(); ++m)
        for (auto j : layout.predictors(m)) {
            auto it = std::find(common.begin(), common.end(), j);
            group_of[static_cast<std::size_t>(layout.column(m, j))] =
                it == common.end() ? num_common : static_cast<Eigen::Index>(it - common.begin());
        }
    const auto& designs = problem.designs();
    const Eigen::Index n = static_cast<Eigen::Index>(problem.n());
    Eigen::MatrixXd x(n, 1 + num_common);
    Eigen::VectorXd y(n);
    Eigen::Index row = 0;
    for (const auto& d : designs) {
        if (d.n() == 0) continue;
        const auto rows = static_cast<Eigen::Index>(d.n());
        x.block(row, 0, rows, 1).setOnes();
        for (Eigen::Index k = 0; k < num_common; ++k) {
            const auto pos = std::find(d.available.begin(), d.available.end(), common[static_cast<std::size_t>(k)]) -
                             d.available.begin();
            x.block(row, 1 + k, rows, 1) = d.design.col(static_cast<Eigen::Index>(pos) + 1);
        }
        y.segment(row, rows) = d.response;
        row += rows;
    }
    const Eigen::VectorXd theta = x.completeOrthogonalDecomposition().solve(y);
    Coefficients c;
    c.intercepts = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(designs.size()), kMissing);
    for (const auto& d : designs)
        if (d.n() > 0) c.intercepts(static_cast<Eigen::Index>(d.class_index)) = theta(0);
    c.slopes = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size()));
    for (std::size_t col = 0; col < layout.size(); ++col)
        if (group_of[col] < num_common) c.slopes(static_cast<Eigen::Index>(col)) = theta(1 + group_of[col]);
    return c;
}

// ---------------------------------------------------------------------------
// lambda_max and the path

/// Smallest lambda (to 1% relative) at which every predictor is fused over the classes carrying it.
/// Starts from the least-squares dual certificate at the pooled solution, which is an upper bound,
/// halves until unfused and bisects geometrically.
inline double lambda_max(const FusedProblem& problem, const FitConfig& config = {}) {
    const auto& D = problem.coupling().D;
    if (D.rows() == 0) throw UsageError("nothing to fuse: no predictor is shared by two classes");
    const Eigen::VectorXd pooled = fit_new_pooled(problem).slopes;
    const Eigen::VectorXd grad = problem.xty() - problem.gram() * pooled;
    const Eigen::MatrixXd dt = Eigen::MatrixXd(D).transpose();
    const Eigen::VectorXd certificate = dt.completeOrthogonalDecomposition().solve(grad);
    const double scale = std::max(1.0, problem.xty().lpNorm<Eigen::Infinity>());
    double hi = certificate.lpNorm<Eigen::Infinity>();
    if (hi <= 1e-12 * scale) return hi;

    const AdmmSolver solver(problem, config);
    auto fused = [&](double lambda) {
        return fully_pooled(fusion_partition(problem.layout(), solver.solve(lambda).coefficients.slopes, config.fuse_tol));
    };
    for (int k = 0; k < 60 && !fused(hi); ++k) hi *= 2.0;
    double lo = hi / 2.0;
    for (int k = 0; k < 60 && fused(lo); ++k) {
        hi = lo;
        lo /= 2.0;
    }
    while (hi / lo > 1.01) {
        const double mid = std::sqrt(lo * hi);
        if (fused(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

struct PathPoint {
    double lambda = 0.0;
    Coefficients coefficients;
    double rss = 0.0;
    double penalty = 0.0;
    double objective = 0.0;
    std::size_t df = 0;
    FusionPartition partition;
    std::size_t iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    bool polished = false;
};

/// Grid points in ascending lambda, the first one exactly 0.
struct PathResult {
    double lambda_max = 0.0;
    std::vector<PathPoint> points;
    std::vector<std::string> warnings;

    std::vector<double> grid() const {
        std::vector<double> g;
        for (const auto& p : points) g.push_back(p.lambda);
        return g;
    }

    /// Grid index nearest to lambda.
    std::size_t nearest(double lambda) const {
        std::size_t best = 0;
        for (std::size_t k = 1; k < points.size(); ++k)
            if (std::abs(points[k].lambda - lambda) < std::abs(points[best].lambda - lambda)) best = k;
        return best;
    }
};

/// {0} plus `grid_size` log-spaced points from lambda_max * lambda_min_ratio to lambda_max, ascending.
inline std::vector<double> lambda_grid(double lambda_max, const FitConfig& config) {
    std::vector<double> grid{0.0};
    if (!(lambda_max > 0.0)) return grid;
    const std::size_t g = config.grid_size;
    if (g == 1) {
        grid.push_back(lambda_max);
        return grid;
    }
    const double lo = std::log(lambda_max * config.lambda_min_ratio), hi = std::log(lambda_max);
    for (std::size_t k = 0; k < g; ++k)
        grid.push_back(k + 1 == g ? lambda_max : std::exp(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(g - 1)));
    return grid;
}

inline PathPoint make_point(const FusedProblem& problem, const FitConfig& config, double lambda, const SolveResult& r) {
    PathPoint pt;
    pt.lambda = lambda;
    pt.coefficients = r.coefficients;
    pt.rss = problem.rss(r.coefficients.slopes);
    pt.penalty = problem.penalty(r.coefficients.slopes);
    pt.objective = 0.5 * pt.rss + lambda * pt.penalty;
    pt.partition = fusion_partition(problem.layout(), r.coefficients.slopes, config.fuse_tol);
    pt.df = degrees_of_freedom(pt.partition, problem.active_classes());
    pt.iterations = r.iterations;
    pt.primal_residual = r.primal_residual;
    pt.dual_residual = r.dual_residual;
    pt.polished = r.polished;
    return pt;
}

/// Solves a given ascending grid in descending order with warm starts.
inline PathResult solve_grid(const FusedProblem& problem, const std::vector<double>& grid, const FitConfig& config) {
    PathResult path;
    path.lambda_max = grid.empty() ? 0.0 : grid.back();
    path.points.resize(grid.size());
    const AdmmSolver solver(problem, config);
    std::optional<AdmmState> warm;
    for (std::size_t k = grid.size(); k-- > 0;) {
        const SolveResult r = solver.solve(grid[k], warm ? &*warm : nullptr);
        for (const auto& w : r.warnings)
            if (std::find(path.warnings.begin(), path.warnings.end(), w) == path.warnings.end()) path.warnings.push_back(w);
        path.points[k] = make_point(problem, config, grid[k], r);
        warm = r.state;
    }
    return path;
}

inline PathResult solve_path(const FusedProblem& problem, const FitConfig& config = {}) {
    config.validate();
    const double lmax = problem.coupling().rows() == 0 ? 0.0 : lambda_max(problem, config);
    auto path = solve_grid(problem, lambda_grid(lmax, config), config);
    path.lambda_max = lmax;
    return path;
}

// ---------------------------------------------------------------------------
// Prediction

/// Linear predictions on the standardized scale for every row of `standardized`.
/// Rows of classes without a fitted intercept get NaN.
inline Eigen::VectorXd predict(const CoefficientLayout& layout, const Coefficients& coef, const Dataset& standardized) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(standardized.n()));
    for (std::size_t i = 0; i < standardized.n(); ++i) {
        const auto m = standardized.row_class[i];
        double yhat = coef.intercepts(static_cast<Eigen::Index>(m));
        for (auto j : layout.predictors(m)) {
            const double x = standardized.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (is_missing(x))
                throw DataError("row " + std::to_string(i + 1) + " lacks predictor '" +
                                standardized.predictors[j].name + "' required by class '" + standardized.classes[m] + "'");
            yhat += coef.slopes(layout.column(m, j)) * x;
        }
        out(static_cast<Eigen::Index>(i)) = yhat;
    }
    return out;
}

/// Same as predict() for raw-scale observations, standardized with `stats` first.
inline Eigen::VectorXd predict(const CoefficientLayout& layout, const Coefficients& coef,
                               const StandardizationStats& stats, const Dataset& raw) {
    return predict(layout, coef, apply_standardization(raw, stats));
}

/// Coefficients on the raw predictor scale: slope / scale, intercept shifted by the means.
inline Coefficients to_raw_scale(const CoefficientLayout& layout, const Coefficients& coef,
                                 const StandardizationStats& stats) {
    Coefficients raw = coef;
    for (std::size_t m = 0; m < layout.num_classes(); ++m)
        for (auto j : layout.predictors(m)) {
            const auto col = layout.column(m, j);
            raw.slopes(col) = coef.slopes(col) / stats.scale[j];
            raw.intercepts(static_cast<Eigen::Index>(m)) -= raw.slopes(col) * stats.mean[j];
        }
    return raw;
}

} // namespace fusedpath
