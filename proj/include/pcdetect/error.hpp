#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pcdetect {

enum class ErrorCode {
    NonSquare,
    NonPositiveEntry,
    ReciprocityViolation,
    OrderTooSmall,
    ZeroWeight,
    NoConvergence,
    MissingRandomIndex,
    DimensionMismatch,
    PromotedEqualsReference,
    InvalidArgument,
    DegeneratePerturbation,
    EmptySplit,
    FormatVersionMismatch,
    CorruptSample,
    DigestMismatch,
    ShapeMismatch,
    NonFinite,
    DivergedLoss,
    EmptySet,
    ChecksumMismatch,
    SpecMismatch,
    Io,
};

inline std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::NonPositiveEntry: return "NonPositiveEntry";
    case ErrorCode::ReciprocityViolation: return "ReciprocityViolation";
    case ErrorCode::OrderTooSmall: return "OrderTooSmall";
    case ErrorCode::ZeroWeight: return "ZeroWeight";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::MissingRandomIndex: return "MissingRandomIndex";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::PromotedEqualsReference: return "PromotedEqualsReference";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegeneratePerturbation: return "DegeneratePerturbation";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::CorruptSample: return "CorruptSample";
    case ErrorCode::DigestMismatch: return "DigestMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::SpecMismatch: return "SpecMismatch";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure in the library is reported through this type. `location()`
/// carries the offending (row, column) pair, line number or index when the
/// error has one.
class Error : public std::runtime_error {
public:
    struct Location {
        std::size_t first = 0;
        std::size_t second = 0;
    };

    Error(ErrorCode code, const std::string& message, std::optional<Location> where = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + message)
        , code_(code)
        , where_(where)
    {
    }

    ErrorCode code() const noexcept { return code_; }
    const std::optional<Location>& location() const noexcept { return where_; }

private:
    ErrorCode code_;
    std::optional<Location> where_;
};

} // namespace pcdetect
