#pragma once
// Exception types shared across the evaluation engine.

#include <stdexcept>
#include <string>

namespace sirst {

// Contract violation on an argument (dimension mismatch, empty input, bad range).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A metric has no defined value for the given input (zero positives, single class, ...).
class UndefinedMetric : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Object used out of sequence, e.g. a backward pass fed a foreign cache.
class InvalidState : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Scene generator could not satisfy its placement constraints.
class InfeasibleSpec : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sirst
