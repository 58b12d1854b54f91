#pragma once

#include <stdexcept>
#include <string>

namespace sigmacount {

// Base for everything thrown by this library on bad input or bad state.
// std::bad_alloc and friends pass through untouched.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed text input: CSV rows, query strings, JSON payloads.
// Message always names the offending token or line.
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid input that violates a precondition (unknown column,
// unknown label, empty intersection, bad probability, horizon exceeded).
struct ValidationError : Error {
    using Error::Error;
};

// Charge refused: granting it would push the ledger past the budget.
// Nothing is recorded when this is thrown.
struct BudgetExhaustedError : Error {
    using Error::Error;
};

// Query is not a union of atoms of the algebra it was posed against.
struct NotCoveredError : Error {
    using Error::Error;
};

// Candidate cell count of an induction exceeded the configured cap.
struct CellCapError : Error {
    using Error::Error;
};

}  // namespace sigmacount
