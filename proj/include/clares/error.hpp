#pragma once

#include <stdexcept>
#include <string>

namespace clares {

// Error taxonomy. The CLI maps these onto stable exit codes:
//   ConfigError/ArgumentError -> 2, DataError/FormatError -> 3, NumericError -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgumentError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct FormatError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace clares
