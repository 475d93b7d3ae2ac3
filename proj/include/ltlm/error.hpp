#pragma once

#include <stdexcept>
#include <string>

namespace ltlm {

// Bad or unreadable input: missing files, malformed or mismatched data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A versioned file failed to parse: wrong header, wrong version, truncation.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

// Internal consistency was violated (negative counts, invalid tree state).
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace ltlm
