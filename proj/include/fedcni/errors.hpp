#pragma once

#include <stdexcept>
#include <string>

namespace fedcni {

// Bad user-supplied configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Tensor dimension mismatch between parameters and inputs.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite value encountered mid-computation (CLI exit code 3).
// Carries the id of the sample being processed when known (-1 otherwise).
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, long sample_id = -1)
        : std::runtime_error(what), sample_id_(sample_id) {}
    long sample_id() const { return sample_id_; }

private:
    long sample_id_;
};

// Dirichlet allocation could not give every client at least one sample.
class PartitionError : public std::runtime_error {
public:
    explicit PartitionError(const std::string& what) : std::runtime_error(what) {}
};

// Client model shapes disagree at aggregation time.
class AggregationError : public std::runtime_error {
public:
    explicit AggregationError(const std::string& what) : std::runtime_error(what) {}
};

// Too few points for a statistical fit.
class InsufficientDataError : public std::runtime_error {
public:
    explicit InsufficientDataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedcni
