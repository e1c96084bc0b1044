#ifndef UMYOPS_CORE_ERRORS_HPP
#define UMYOPS_CORE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace umyops {

// Bad caller input: shapes, ranges, malformed specs.
class InvalidArgument : public std::invalid_argument {
public:
    explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

// Numerically unusable state: singular systems, non-finite values, NaN losses.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// File/format problems: missing files, schema mismatches, unsupported encodings.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace umyops

#endif
