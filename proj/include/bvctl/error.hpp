#pragma once

#include <stdexcept>
#include <string>

namespace bvctl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or configuration value violates its invariant. `field()` names
/// the offending key so callers can surface it to the operator.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A numerical routine failed to reach its target accuracy.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double achieved)
        : Error(what), achieved_(achieved) {}

    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

}  // namespace bvctl
