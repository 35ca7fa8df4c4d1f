#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace deid {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Operation is valid in general but not for the given value (e.g. a frame
/// outside every presence region).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Annotation pass gating forbids the write.
class StateError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Optimistic-concurrency rejection: the caller's revision is stale.
class ConflictError : public Error {
public:
    ConflictError(long expected, long actual)
        : Error("stale revision " + std::to_string(expected) + ", current is " +
                std::to_string(actual)),
          expected_(expected),
          actual_(actual) {}

    long expected() const { return expected_; }
    long actual() const { return actual_; }

private:
    long expected_;
    long actual_;
};

/// An external adapter broke its wire protocol.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed serialized document. `byte_offset` points at the first offending
/// byte for syntax errors, or at the end of input for schema errors.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : Error(what + " (at byte " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

}  // namespace deid
