#pragma once

#include <sstream>
#include <string>

#include "fusedpath/fusedpath.hpp"

namespace fusedpath::testing {

inline Dataset from_csv(const std::string& csv, const std::string& schema_text = "", bool mask = true) {
    std::istringstream in(csv), sin(schema_text);
    Dataset ds = ingest(read_csv(in), parse_schema(sin));
    return mask ? apply_missingness_mask(std::move(ds)) : ds;
}

inline FusedProblem problem_of(const Dataset& raw) {
    return FusedProblem::from_dataset(standardize(raw).first);
}

inline double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

} // namespace fusedpath::testing
