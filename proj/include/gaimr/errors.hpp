#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gaimr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed attribute schema or factor structure.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// An operation was asked to work over an empty set (no feasible outcome, empty catalog).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A factor whose local values cannot be normalized because it is locally constant.
class DegenerateFactorError : public Error {
public:
    using Error::Error;
};

/// Asserting a constraint would leave the utility polytope empty.
class InconsistentConstraintError : public Error {
public:
    using Error::Error;
};

/// A document failed validation; carries every violation with its field path.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out = "validation failed";
        for (const auto& item : items) {
            out += "\n  ";
            out += item;
        }
        return out;
    }

    std::vector<std::string> violations_;
};

/// Unparseable input file or body.
class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace gaimr
