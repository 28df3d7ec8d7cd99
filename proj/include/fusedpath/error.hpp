#pragma once

#include <stdexcept>
#include <string>

namespace fusedpath {

/// Malformed input: bad CSV, unknown columns, invalid schema or values.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration supplied by the caller.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A class design is rank deficient where a unique least-squares fit is required.
class RankDeficientError : public std::runtime_error {
public:
    RankDeficientError(std::string class_id, const std::string& what)
        : std::runtime_error(what), class_id_(std::move(class_id)) {}
    const std::string& class_id() const noexcept { return class_id_; }

private:
    std::string class_id_;
};

} // namespace fusedpath
