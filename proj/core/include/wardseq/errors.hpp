// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wardseq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not chain (matmul, layer widths, batch/mask agreement).
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A configuration value is outside its valid range.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input columns do not cover the feature schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A row of an input file could not be parsed.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A metric is undefined for the given labels (e.g. AUROC with one class).
class MetricError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite value.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace wardseq
