#pragma once

#include <stdexcept>
#include <string>

namespace synergy {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text (region codes, dates, numbers).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Invalid or incomplete configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input files that violate the dataset schema. Messages carry file and line.
class DataError : public Error {
public:
    using Error::Error;
};

/// A caller broke an operation's precondition (wrong shapes, wrong code depth).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Region code not covered by the active sub-region table.
class UnmappedRegionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values produced during forward/backward passes or optimization.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace synergy
