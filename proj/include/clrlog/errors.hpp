#pragma once

#include <stdexcept>
#include <string>

namespace clrlog {

/// Raised when a file cannot be read, written, or is structurally invalid.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when inputs violate an operation's preconditions (bad config,
/// mismatched artifacts, out-of-alphabet data with extension disabled, ...).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace clrlog
