#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace darnwalk {

/// Base class for all library errors. `kind()` is a stable machine-readable tag.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

/// An argument lies outside the set on which an operation is defined.
class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain"; }
};

/// A documented precondition on the inputs does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "precondition"; }
};

/// A value type was constructed with data violating its invariants.
class InvariantViolation : public Error {
public:
    InvariantViolation(std::string constraint, const std::string& message)
        : Error(constraint + ": " + message), constraint_(std::move(constraint)) {}
    const char* kind() const noexcept override { return "invariant"; }
    const std::string& constraint() const noexcept { return constraint_; }

private:
    std::string constraint_;
};

/// Weight targets handed to the allocator cannot be satisfied.
class ConstraintViolation : public Error {
public:
    ConstraintViolation(std::string node, const std::string& message)
        : Error("node " + node + ": " + message), node_(std::move(node)) {}
    const char* kind() const noexcept override { return "constraint"; }
    const std::string& node() const noexcept { return node_; }

private:
    std::string node_;
};

/// A walk exceeded its step budget. Never swallowed: dropping it would bias estimates.
class NonConvergence : public Error {
public:
    explicit NonConvergence(std::size_t steps)
        : Error("walk did not terminate within " + std::to_string(steps) + " steps"),
          steps_(steps) {}
    const char* kind() const noexcept override { return "non_convergence"; }
    std::size_t steps() const noexcept { return steps_; }

private:
    std::size_t steps_;
};

/// Tangent or intersecting boundary spheres in a compact description.
class UnsupportedGeometry : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "unsupported_geometry"; }
};

/// Malformed input document.
class ParseError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "parse"; }
};

/// A file could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io"; }
};

}  // namespace darnwalk
