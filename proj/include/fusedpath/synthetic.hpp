#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fusedpath/data_model.hpp"

namespace fusedpath::synthetic {

/// Generating model: y = intercept_m + sum_j slope_mj * x_j + N(0, noise_sd^2), with
/// x_j ~ N(center_j, spread_j^2). Cells of unavailable (class, predictor) pairs are NaN.
struct Spec {
    std::vector<std::size_t> class_sizes;
    std::vector<double> intercepts;                // per class
    std::vector<std::vector<double>> slopes;       // [class][predictor], raw scale
    std::vector<double> centers;                   // per predictor
    std::vector<double> spreads;                   // per predictor
    std::vector<std::vector<bool>> available;      // empty = all available
    double noise_sd = 1.0;
    std::uint64_t seed = 1;
};

inline std::string class_name(std::size_t m) {
    std::string s = "C";
    if (m + 1 < 10) s += '0';
    return s + std::to_string(m + 1);
}

/// A raw (unmasked, unstandardized) dataset drawn from `spec`. Class ids are C01, C02, ...
inline Dataset generate(const Spec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t num_classes = spec.class_sizes.size();
    const std::size_t p = spec.centers.size();
    Dataset ds;
    for (std::size_t m = 0; m < num_classes; ++m) ds.classes.push_back(class_name(m));
    for (std::size_t j = 0; j < p; ++j) {
        const std::string name = "x" + std::to_string(j + 1);
        ds.predictors.push_back({name, name, ""});
        ds.numeric_variables.push_back(name);
    }
    std::size_t n = 0;
    for (auto s : spec.class_sizes) n += s;
    ds.response.resize(static_cast<Eigen::Index>(n));
    ds.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    std::size_t i = 0;
    for (std::size_t m = 0; m < num_classes; ++m) {
        for (std::size_t r = 0; r < spec.class_sizes[m]; ++r, ++i) {
            double y = spec.intercepts[m];
            for (std::size_t j = 0; j < p; ++j) {
                const double x = spec.centers[j] + spec.spreads[j] * normal(rng);
                const bool avail = spec.available.empty() || spec.available[m][j];
                ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = avail ? x : kMissing;
                if (avail) y += spec.slopes[m][j] * x;
            }
            y += spec.noise_sd * normal(rng);
            ds.response(static_cast<Eigen::Index>(i)) = y;
            ds.row_class.push_back(m);
        }
    }
    ds.available.assign(num_classes, std::vector<bool>(p, true));
    ds.masked.assign(num_classes, {});
    return ds;
}

/// Unbalanced classes with common slopes and class-specific intercepts.
inline Spec shared_slope_benchmark(std::uint64_t seed, std::vector<std::size_t> sizes = {100, 10, 10},
                                   double noise_sd = 5.0) {
    Spec spec;
    spec.class_sizes = std::move(sizes);
    const std::vector<double> common{1.5, -0.8, 6.0};
    spec.centers = {14.0, 10.0, 3.0};
    spec.spreads = {6.0, 4.0, 1.0};
    for (std::size_t m = 0; m < spec.class_sizes.size(); ++m) {
        spec.intercepts.push_back(20.0 + 6.0 * static_cast<double>(m % 4));
        spec.slopes.push_back(common);
    }
    spec.noise_sd = noise_sd;
    spec.seed = seed;
    return spec;
}

/// Small random instance: M in {2,3,4}, p <= 3, n_m in [5, 30], random availability with at
/// least one predictor shared by two classes.
inline Spec random_instance(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Spec spec;
    const auto num_classes = static_cast<std::size_t>(uniform_int(2, 4));
    const auto p = static_cast<std::size_t>(uniform_int(1, 3));
    for (std::size_t j = 0; j < p; ++j) {
        spec.centers.push_back(10.0 * normal(rng));
        spec.spreads.push_back(0.5 + 4.0 * unit(rng));
    }
    std::vector<double> base(p);
    for (auto& b : base) b = 3.0 * normal(rng);
    for (std::size_t m = 0; m < num_classes; ++m) {
        spec.class_sizes.push_back(static_cast<std::size_t>(uniform_int(5, 30)));
        spec.intercepts.push_back(50.0 + 10.0 * normal(rng));
        std::vector<double> s(p);
        for (std::size_t j = 0; j < p; ++j) s[j] = base[j] + (unit(rng) < 0.5 ? 0.0 : 1.5 * normal(rng));
        spec.slopes.push_back(s);
    }
    for (;;) {
        spec.available.assign(num_classes, std::vector<bool>(p, true));
        for (auto& row : spec.available)
            for (std::size_t j = 0; j < p; ++j) row[j] = unit(rng) >= 0.25;
        bool shared = false;
        for (std::size_t j = 0; j < p; ++j) {
            int count = 0;
            for (const auto& row : spec.available) count += row[j] ? 1 : 0;
            shared = shared || count >= 2;
        }
        if (shared) break;
    }
    spec.noise_sd = 1.0 + 4.0 * unit(rng);
    spec.seed = seed * 7919 + 17;
    return spec;
}

} // namespace fusedpath::synthetic
