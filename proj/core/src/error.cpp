#include "dwa/error.hpp"

namespace dwa {

std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidDims: return "InvalidDims";
    case ErrorKind::InvalidSpan: return "InvalidSpan";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::PortionOutOfRange: return "PortionOutOfRange";
    case ErrorKind::EmptySplit: return "EmptySplit";
    case ErrorKind::EmptyGlobalSplit: return "EmptyGlobalSplit";
    case ErrorKind::EmptyPersonalSplit: return "EmptyPersonalSplit";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::PoolTooSmall: return "PoolTooSmall";
    case ErrorKind::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorKind::MissingPool: return "MissingPool";
    case ErrorKind::UnlabeledSpan: return "UnlabeledSpan";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    }
    return "Unknown";
}

} // namespace dwa
