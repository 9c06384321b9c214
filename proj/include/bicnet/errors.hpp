#pragma once

#include <stdexcept>
#include <string>

namespace bicnet {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or axis disagreement between tensors.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid model/run configuration (bad key, bad range, inconsistent dims).
struct ConfigError : Error {
    using Error::Error;
};

// Caller broke an API contract (non-scalar backward root, missing gradient, ...).
struct UsageError : Error {
    using Error::Error;
};

// Dataset files disagree with their manifest.
struct IngestError : Error {
    using Error::Error;
};

// Malformed binary container (bad magic, version, truncation).
struct FormatError : Error {
    using Error::Error;
};

// Sequence longer than a positional table allows.
struct CapacityError : Error {
    using Error::Error;
};

// A public operation produced or received a NaN/Inf.
struct NumericError : Error {
    using Error::Error;
};

// Filesystem failure.
struct IoError : Error {
    using Error::Error;
};

// Invariant violation inside the library itself.
struct InternalError : Error {
    using Error::Error;
};

} // namespace bicnet
