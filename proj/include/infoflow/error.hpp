#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace infoflow {

enum class ErrorCode {
    InvalidArgument,
    NonRectangular,
    NaNsPresent,
    ConstantSeries,
    TooShort,
    DuplicateNames,
    KTooLarge,
    SameIndex,
    SingularCovariance,
    DegenerateBudget,
    NotHurwitz,
    NonFiniteState,
    BadMatrixSpec,
    Malformed,
    EmptyFile,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NonRectangular: return "NonRectangular";
        case ErrorCode::NaNsPresent: return "NaNsPresent";
        case ErrorCode::ConstantSeries: return "ConstantSeries";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::DuplicateNames: return "DuplicateNames";
        case ErrorCode::KTooLarge: return "KTooLarge";
        case ErrorCode::SameIndex: return "SameIndex";
        case ErrorCode::SingularCovariance: return "SingularCovariance";
        case ErrorCode::DegenerateBudget: return "DegenerateBudget";
        case ErrorCode::NotHurwitz: return "NotHurwitz";
        case ErrorCode::NonFiniteState: return "NonFiniteState";
        case ErrorCode::BadMatrixSpec: return "BadMatrixSpec";
        case ErrorCode::Malformed: return "Malformed";
        case ErrorCode::EmptyFile: return "EmptyFile";
    }
    return "Unknown";
}

/// True for failures caused by the numbers themselves (collinearity,
/// instability) rather than by malformed input.
[[nodiscard]] constexpr bool is_numerical(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::SingularCovariance:
        case ErrorCode::DegenerateBudget:
        case ErrorCode::NotHurwitz:
        case ErrorCode::NonFiniteState:
            return true;
        default:
            return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace infoflow
