#pragma once

#include <stdexcept>
#include <string>

namespace longcl {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration value (ratios out of range, non-dividing widths, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Mismatched lengths, segment tables, or out-of-range indices.
class ShapeError : public Error {
public:
    using Error::Error;
};

// An operation was called outside its domain (e.g. alpha for the first task).
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent external data; the message names file and line.
class IngestionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace longcl
