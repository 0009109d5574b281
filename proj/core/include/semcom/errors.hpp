#pragma once

#include <stdexcept>
#include <string>

namespace semcom {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad inputs: violated preconditions, unparseable configs, out-of-range values.
// The CLI maps these to exit code 1.
struct ValidationError : Error {
    using Error::Error;
};

// A file exists but its bytes are not what the format demands
// (wrong magic, bad version string, inconsistent header counts).
struct FormatError : Error {
    using Error::Error;
};

// Filesystem-level failures: missing files, truncated reads, failed writes.
struct IoError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required; training divergence.
struct NumericError : Error {
    using Error::Error;
};

// An estimator was asked to do something outside its contract
// (e.g. discrete entropy of a continuous-valued encoder).
struct EstimatorError : Error {
    using Error::Error;
};

}  // namespace semcom
