#pragma once

#include <stdexcept>
#include <string>

namespace scl {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent experiment configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable or malformed input data (CLI exit code 3).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint/state mismatch while resuming a run (CLI exit code 4).
struct ResumeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An episode tried to read raw training data of a task other than its own.
struct DataIsolationError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace scl
