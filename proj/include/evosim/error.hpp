#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace evosim {

// Malformed input text (CSV rows, scenario files, weight files).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Well-formed input that breaks a domain invariant (e.g. high < low).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Per-asset series whose timestamp vectors differ.
class AlignmentError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Not enough history behind the requested bar to fill a feature window.
class WindowUnderflow : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// Order the exchange refuses (margin exceeds available cash, bad size).
class RejectedOrder : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Scenario configuration failing validation; carries the offending field.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& why)
        : std::invalid_argument(field + ": " + why), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Conservation identity broke beyond tolerance. Always a simulator bug.
class LedgerImbalance : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace evosim
