#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace livseg {

enum class Errc {
    BadMagic,
    UnsupportedDatatype,
    TruncatedFile,
    NonFinite,
    BadHeader,
    IoError,
    MissingColumn,
    UnknownColumn,
    UnparsableCell,
    KindMismatch,
    ShapeMismatch,
    EmptyMask,
    TooFewSamples,
    OutOfRange,
    EmptyRegion,
    DimMismatch,
    NonFiniteGradient,
    InvalidArgument,
    InfeasibleSpec,
    BadFormat,
};

std::string_view errc_name(Errc code) noexcept;

/// Every recoverable failure in the library is reported as an Error carrying
/// a machine-checkable code; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace livseg
