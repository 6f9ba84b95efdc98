#pragma once

#include <stdexcept>
#include <string>

namespace tpfl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input: bad magic numbers, unparseable documents.
class FormatError : public Error {
public:
    using Error::Error;
};

// Payload or element-count mismatches: truncated files, image/label count skew.
class LengthError : public Error {
public:
    using Error::Error;
};

// Dimension mismatches: unsupported image shapes, weight vectors of the wrong size.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A partition split pool ran dry while demand remained.
class ExhaustionError : public Error {
public:
    using Error::Error;
};

// Invalid configuration: unknown keys, out-of-range values.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace tpfl
