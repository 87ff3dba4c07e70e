#pragma once

#include <stdexcept>
#include <string>

namespace fractune {

// bad argument / violated precondition
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// input outside the operator's domain (unstable plant, improper TF, ...)
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// numerical evaluation failed, e.g. a pole sits on the grid
struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OptimizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SelectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fractune
