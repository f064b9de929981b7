#pragma once

#include <stdexcept>
#include <string>

namespace mosumfm {

/// Bad inputs: malformed files, out-of-range parameters, dimension mismatches.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Data-dependent numerical failures: rank deficiency, non-positive variances.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mosumfm
