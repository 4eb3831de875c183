#pragma once

#include <stdexcept>
#include <string>

namespace bacoun {

// Matrix/vector dimension disagreement.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed external input (CSV cell, JSON value). Carries the offending
// location in the message.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally valid input that violates the expected schema (missing or
// unknown keys, wrong column names).
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operation called on an object in an unusable state (empty sample set,
// degenerate model).
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

// Runtime numerical failure (divergence, non-finite quantity mid-algorithm).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace bacoun
