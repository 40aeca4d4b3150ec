#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace dwa {

enum class ErrorKind {
    // configuration
    InvalidConfig,
    InvalidDims,
    InvalidSpan,
    // data
    MissingFile,
    MalformedRow,
    DimensionMismatch,
    PortionOutOfRange,
    EmptySplit,
    EmptyGlobalSplit,
    EmptyPersonalSplit,
    EmptySet,
    EmptyBatch,
    EmptyInput,
    LengthMismatch,
    PoolTooSmall,
    FingerprintMismatch,
    MissingPool,
    UnlabeledSpan,
    IoError,
    // numerics
    NumericalFailure,
};

enum class ErrorCategory { Config, Data, Numerical };

constexpr ErrorCategory category_of(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::InvalidDims:
    case ErrorKind::InvalidSpan:
        return ErrorCategory::Config;
    case ErrorKind::NumericalFailure:
        return ErrorCategory::Numerical;
    default:
        return ErrorCategory::Data;
    }
}

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what)
        , kind_(kind)
    {
    }

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] ErrorCategory category() const noexcept { return category_of(kind_); }

private:
    ErrorKind kind_;
};

/// Raised by the CSV loaders; carries the offending file and 1-based line.
class MalformedRowError : public Error {
public:
    MalformedRowError(std::string file, std::size_t line, const std::string& detail)
        : Error(ErrorKind::MalformedRow, file + ":" + std::to_string(line) + ": " + detail)
        , file_(std::move(file))
        , line_(line)
    {
    }

    [[nodiscard]] const std::string& file() const noexcept { return file_; }
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

} // namespace dwa
