#pragma once

#include <stdexcept>
#include <string>

namespace episurr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// N_j - D_j <= 0 for some age group, so the force of infection is undefined.
class DegeneratePopulationError : public Error {
public:
    using Error::Error;
};

class StepSizeUnderflowError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed text input. Carries the 1-based row and column when known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t row = 0, std::size_t col = 0)
        : Error(msg), row_(row), col_(col)
    {
    }
    std::size_t row() const { return row_; }
    std::size_t col() const { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class CorruptFileError : public Error {
public:
    using Error::Error;
};

class VersionMismatchError : public Error {
public:
    using Error::Error;
};

/// backward() called twice on the same recording.
class StaleTapeError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Checkpoint and data (or graph) disagree on shapes or encodings.
class EncodingMismatchError : public Error {
public:
    using Error::Error;
};

} // namespace episurr
