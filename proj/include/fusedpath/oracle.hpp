#pragma once

// Reference solver for the fused least-squares problem, used to check AdmmSolver.
// It shares no numerical code with the ADMM path: intercepts are kept as explicit variables,
// the problem is solved through its box-constrained dual with accelerated projected gradient,
// and the candidate is made exact on its fusion structure and certified by a subgradient check.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/LU>

#include "fusedpath/data_model.hpp"
#include "fusedpath/error.hpp"
#include "fusedpath/fusion_graph.hpp"

namespace fusedpath {

inline constexpr std::size_t kOracleMaxDim = 30;

struct OracleResult {
    Eigen::VectorXd intercepts;
    Eigen::VectorXd slopes;  // CoefficientLayout order
    double objective = 0.0;
    bool verified = false;       // subgradient optimality certificate found
    double kkt_residual = 0.0;   // max |stationarity residual| of the certificate
    std::size_t iterations = 0;
};

namespace oracle_detail {

struct Setup {
    Eigen::MatrixXd h;         // blockdiag(Z_m' Z_m) with Z_m = [1 X_m]
    Eigen::VectorXd g;         // blockdiag(Z_m' y_m)
    Eigen::MatrixXd e;         // coupling rows over the full parameter vector
    std::vector<Eigen::Index> intercept_at;
    std::vector<Eigen::Index> slope_at;  // layout column -> parameter index
};

inline Setup setup(const std::vector<ClassDesign>& designs, const CoefficientLayout& layout, const CouplingMatrix& cm) {
    Setup s;
    Eigen::Index dim = 0;
    for (const auto& d : designs) dim += d.n() > 0 ? static_cast<Eigen::Index>(d.p() + 1) : 0;
    if (static_cast<std::size_t>(dim) > kOracleMaxDim)
        throw UsageError("qp_oracle: dimension " + std::to_string(dim) + " exceeds the cap of 30");
    s.h = Eigen::MatrixXd::Zero(dim, dim);
    s.g = Eigen::VectorXd::Zero(dim);
    s.intercept_at.assign(designs.size(), -1);
    s.slope_at.assign(layout.size(), -1);
    Eigen::Index at = 0;
    for (const auto& d : designs) {
        if (d.n() == 0) continue;
        const auto k = static_cast<Eigen::Index>(d.p() + 1);
        s.h.block(at, at, k, k) = d.design.transpose() * d.design;
        s.g.segment(at, k) = d.design.transpose() * d.response;
        s.intercept_at[d.class_index] = at;
        for (std::size_t q = 0; q < d.p(); ++q)
            s.slope_at[static_cast<std::size_t>(layout.column(d.class_index, d.available[q]))] = at + 1 + static_cast<Eigen::Index>(q);
        at += k;
    }
    s.e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cm.pairs.size()), dim);
    for (std::size_t r = 0; r < cm.pairs.size(); ++r) {
        const auto& p = cm.pairs[r];
        s.e(static_cast<Eigen::Index>(r), s.slope_at[static_cast<std::size_t>(layout.column(p.first, p.predictor))]) += p.weight;
        s.e(static_cast<Eigen::Index>(r), s.slope_at[static_cast<std::size_t>(layout.column(p.second, p.predictor))]) -= p.weight;
    }
    return s;
}

inline double primal_objective(const std::vector<ClassDesign>& designs, const Setup& s, const Eigen::VectorXd& theta,
                               double lambda) {
    double rss = 0.0;
    for (const auto& d : designs) {
        if (d.n() == 0) continue;
        const auto at = s.intercept_at[d.class_index];
        rss += (d.response - d.design * theta.segment(at, static_cast<Eigen::Index>(d.p() + 1))).squaredNorm();
    }
    return 0.5 * rss + lambda * (s.e * theta).lpNorm<1>();
}

inline Eigen::VectorXd clip(const Eigen::VectorXd& v, double bound) { return v.cwiseMax(-bound).cwiseMin(bound); }

} // namespace oracle_detail

/// Solves 1/2 sum_m ||y_m - a_m - X_m b_m||^2 + lambda ||D b||_1 for total dimension <= 30.
/// Requires every class design to have full column rank.
inline OracleResult qp_oracle(const std::vector<ClassDesign>& designs, const CoefficientLayout& layout,
                              const CouplingMatrix& cm, double lambda) {
    using namespace oracle_detail;
    if (!(lambda >= 0.0)) throw UsageError("qp_oracle: lambda must be >= 0");
    const Setup s = setup(designs, layout, cm);
    const Eigen::LLT<Eigen::MatrixXd> chol(s.h);
    if (chol.info() != Eigen::Success) throw UsageError("qp_oracle: class designs must have full column rank");
    const Eigen::MatrixXd h_inv = chol.solve(Eigen::MatrixXd::Identity(s.h.rows(), s.h.cols()));
    const Eigen::Index rows = s.e.rows();

    OracleResult out;
    auto finish = [&](const Eigen::VectorXd& theta) {
        out.intercepts = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(designs.size()), kMissing);
        for (std::size_t m = 0; m < designs.size(); ++m)
            if (s.intercept_at[m] >= 0) out.intercepts(static_cast<Eigen::Index>(m)) = theta(s.intercept_at[m]);
        out.slopes.resize(static_cast<Eigen::Index>(layout.size()));
        for (std::size_t c = 0; c < layout.size(); ++c) out.slopes(static_cast<Eigen::Index>(c)) = theta(s.slope_at[c]);
        out.objective = primal_objective(designs, s, theta, lambda);
        return out;
    };

    if (lambda == 0.0 || rows == 0) {
        out.verified = true;
        return finish(chol.solve(s.g));
    }

    // Dual: min_v 1/2 (g - E'v)' H^-1 (g - E'v) over |v_i| <= lambda; theta(v) = H^-1 (g - E'v).
    const Eigen::MatrixXd q = s.e * h_inv * s.e.transpose();
    const double lipschitz = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q).eigenvalues().maxCoeff();
    const Eigen::VectorXd eg = s.e * h_inv * s.g;
    auto dual = [&](const Eigen::VectorXd& v) { return 0.5 * v.dot(q * v) - v.dot(eg); };
    auto grad = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return q * v - eg; };

    Eigen::VectorXd v = Eigen::VectorXd::Zero(rows), y = v;
    double t = 1.0, f = dual(v), f_window = f;
    const std::size_t window = 1000, max_iter = 200'000;
    std::size_t it = 0;
    bool restarted = false;
    for (; it < max_iter; ++it) {
        if (it > 0 && it % window == 0) {
            if (f_window - f <= 1e-10 * std::max(1.0, std::abs(f))) break;
            f_window = f;
        }
        const Eigen::VectorXd v_next = clip(y - grad(y) / lipschitz, lambda);
        const double f_next = dual(v_next);
        if (f_next > f) {
            if (restarted) break;  // a plain projected step no longer descends
            t = 1.0;
            y = v;
            restarted = true;
            continue;
        }
        restarted = false;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = v_next + ((t - 1.0) / t_next) * (v_next - v);
        v = v_next;
        t = t_next;
        f = f_next;
    }
    out.iterations = it;
    Eigen::VectorXd theta = h_inv * (s.g - s.e.transpose() * v);

    // Exact solve on the detected structure: rows with a tiny difference are fused, the others
    // keep their sign and contribute a linear term.
    const double scale = std::max(1.0, theta.lpNorm<Eigen::Infinity>());
    const Eigen::VectorXd et = s.e * theta;
    std::vector<Eigen::Index> fused, free_rows;
    for (Eigen::Index r = 0; r < rows; ++r) (std::abs(et(r)) <= 1e-5 * scale ? fused : free_rows).push_back(r);
    Eigen::VectorXd sign = Eigen::VectorXd::Zero(rows);
    for (auto r : free_rows) sign(r) = et(r) > 0 ? 1.0 : -1.0;
    Eigen::MatrixXd e_fused(static_cast<Eigen::Index>(fused.size()), s.e.cols());
    for (std::size_t k = 0; k < fused.size(); ++k) e_fused.row(static_cast<Eigen::Index>(k)) = s.e.row(fused[k]);
    const Eigen::VectorXd rhs = s.g - lambda * s.e.transpose() * sign;
    Eigen::MatrixXd basis;
    if (fused.empty()) {
        basis = Eigen::MatrixXd::Identity(s.e.cols(), s.e.cols());
    } else {
        basis = Eigen::FullPivLU<Eigen::MatrixXd>(e_fused).kernel();
    }
    const Eigen::MatrixXd reduced = basis.transpose() * s.h * basis;
    const Eigen::VectorXd exact = basis * reduced.ldlt().solve(basis.transpose() * rhs);

    // Certificate: signs preserved on free rows, and |v_F| <= lambda with E_F' v_F = rhs - H theta.
    const Eigen::VectorXd e_exact = s.e * exact;
    bool signs_ok = true;
    for (auto r : free_rows) signs_ok = signs_ok && sign(r) * e_exact(r) >= -1e-9 * scale;
    const Eigen::VectorXd target = rhs - s.h * exact;
    Eigen::VectorXd vf(static_cast<Eigen::Index>(fused.size()));
    for (std::size_t k = 0; k < fused.size(); ++k) vf(static_cast<Eigen::Index>(k)) = v(fused[k]);
    double residual = target.lpNorm<Eigen::Infinity>();
    if (!fused.empty()) {
        const Eigen::MatrixXd eft = e_fused.transpose();
        const double step = 1.0 / std::max(1e-300, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e_fused * eft).eigenvalues().maxCoeff());
        for (int k = 0; k < 200000; ++k) {
            const Eigen::VectorXd res = eft * vf - target;
            residual = res.lpNorm<Eigen::Infinity>();
            if (residual <= 1e-9 * std::max(1.0, s.g.lpNorm<Eigen::Infinity>())) break;
            vf = clip(vf - step * (e_fused * res), lambda);
        }
        residual = (eft * vf - target).lpNorm<Eigen::Infinity>();
    }
    out.kkt_residual = residual;
    out.verified = signs_ok && residual <= 1e-7 * std::max(1.0, s.g.lpNorm<Eigen::Infinity>());
    if (out.verified && primal_objective(designs, s, exact, lambda) <= primal_objective(designs, s, theta, lambda) + 1e-9)
        theta = exact;
    else
        out.verified = false;
    return finish(theta);
}

} // namespace fusedpath
