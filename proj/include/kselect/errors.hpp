#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kselect {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A column has zero variance and strict standardization was requested.
struct ConstantColumn : Error {
    explicit ConstantColumn(std::size_t column)
        : Error("column " + std::to_string(column) + " has zero variance"), column(column) {}
    std::size_t column;
};

struct KTooLarge : Error {
    KTooLarge(int k, std::size_t n)
        : Error("k = " + std::to_string(k) + " exceeds number of rows n = " + std::to_string(n)) {}
};

struct DegenerateData : Error {
    using Error::Error;
};

// Residual scale from the k' model is zero; the caller must reduce k'.
struct ZeroResidual : Error {
    using Error::Error;
};

struct LengthMismatch : Error {
    LengthMismatch(std::size_t a, std::size_t b)
        : Error("label vectors have lengths " + std::to_string(a) + " and " + std::to_string(b)) {}
};

struct NonpositiveIdeal : Error {
    using Error::Error;
};

struct RejectionFailure : Error {
    using Error::Error;
};

struct AllDegenerate : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// CSV/ingestion failure; row and column are 1-based positions in the file.
struct ParseError : Error {
    ParseError(std::size_t row, std::size_t col, const std::string& what)
        : Error("row " + std::to_string(row) + ", column " + std::to_string(col) + ": " + what),
          row(row),
          col(col) {}
    std::size_t row;
    std::size_t col;
};

}  // namespace kselect
