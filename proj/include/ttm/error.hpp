#pragma once

#include <stdexcept>

namespace ttm {

// Error taxonomy for the whole library. The CLI maps these onto exit codes:
// IoError -> 1, usage/validation failures -> 2, StalenessError -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad magic bytes, unsupported container version, unparseable header.
class FormatError : public Error {
public:
    using Error::Error;
};

// Header and payload disagree: shape/byte-count mismatch, truncated data.
class CorruptionError : public Error {
public:
    using Error::Error;
};

// Values violate an invariant (non-finite entries, broken simplex).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Two parameter maps disagree on names or shapes.
class AlignmentError : public Error {
public:
    using Error::Error;
};

// Argument outside the documented domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// Cached artifact does not match the current configuration or dataset.
class StalenessError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace ttm
