#pragma once

#include <stdexcept>
#include <string>

namespace hypergl {

// Error categories map one-to-one onto CLI exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

struct UsageError : Error {
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

struct NumericalError : Error {
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

// Configurations outside the model: b = 1/2, trivial ground space, bundle not well defined.
struct ModelGuardError : Error {
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

struct DimensionMismatchError : Error {
    using Error::Error;
    int exit_code() const noexcept override { return 5; }
};

}  // namespace hypergl
