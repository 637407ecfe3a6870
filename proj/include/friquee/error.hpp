#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace friquee {

/// Machine-readable failure categories. The CLI maps these onto exit codes.
enum class ErrorKind {
    DegenerateSample,
    OneSidedSample,
    TooSmall,
    VersionError,
    LayoutMismatch,
    DecodeError,
    ManifestError,
    DuplicateRow,
    NotAvailable,
    CacheError,
    InvalidArgument,
    IoError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::DegenerateSample: return "DegenerateSample";
        case ErrorKind::OneSidedSample: return "OneSidedSample";
        case ErrorKind::TooSmall: return "TooSmall";
        case ErrorKind::VersionError: return "VersionError";
        case ErrorKind::LayoutMismatch: return "LayoutMismatch";
        case ErrorKind::DecodeError: return "DecodeError";
        case ErrorKind::ManifestError: return "ManifestError";
        case ErrorKind::DuplicateRow: return "DuplicateRow";
        case ErrorKind::NotAvailable: return "NotAvailable";
        case ErrorKind::CacheError: return "CacheError";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind), detail_(detail) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    /// The message without the category prefix.
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

}  // namespace friquee
