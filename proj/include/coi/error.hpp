#pragma once

#include <stdexcept>
#include <string>

namespace coi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition or input-contract violation.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A model provider (embedding or generation) failed after its retry budget.
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, int attempts)
        : Error(what + " (after " + std::to_string(attempts) + " attempt" +
                (attempts == 1 ? "" : "s") + ")"),
          attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// An explanation produced no clauses, so adherence metrics are undefined for it.
class Unevaluable : public Error {
public:
    using Error::Error;
};

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace coi
