#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cqp {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Allocation would exceed the configured qubit cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Lexical, syntax or resolution error with a source position.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line, int column)
        : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
          line_(line), column_(column), message_(msg) {}

    int line() const { return line_; }
    int column() const { return column_; }
    const std::string& message() const { return message_; }

private:
    int line_;
    int column_;
    std::string message_;
};

/// A qubit is reachable from two threads, or used after it left its owner.
/// Typed programs never raise this.
class OwnershipViolation : public Error {
public:
    using Error::Error;
};

/// Execution got stuck on something the term promised (unbound name, bad gate index).
class RuntimeError : public Error {
public:
    using Error::Error;
};

/// Bounded exploration hit its state cap.
class ExplorationLimit : public Error {
public:
    explicit ExplorationLimit(std::size_t cap)
        : Error("state-space exploration exceeded the cap of " + std::to_string(cap) + " states"),
          cap_(cap) {}
    std::size_t cap() const { return cap_; }

private:
    std::size_t cap_;
};

}  // namespace cqp
