#pragma once

#include <stdexcept>
#include <string>

namespace vinesim {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A configuration document or value type violates one of its invariants.
// `invariant()` is a short stable identifier that clients can match on.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string invariant, const std::string& message)
        : std::runtime_error(message), invariant_(std::move(invariant)) {}

    const std::string& invariant() const noexcept { return invariant_; }

private:
    std::string invariant_;
};

// An operator command that cannot be applied; the simulation state is left untouched.
class CommandRejected : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Requested bend exceeds what the calibration curve can deliver.
class InfeasibleBend : public std::range_error {
public:
    using std::range_error::range_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace vinesim
