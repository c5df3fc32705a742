#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ial {

enum class ErrorCode {
    // inertial-io
    MissingFile,
    MalformedRow,
    NonMonotoneTimestamps,
    UnknownLabel,
    InvertedInterval,
    OverlappingEvents,
    InfeasiblePacking,
    InvalidConfig,
    // signal-pipeline
    NonFiniteInput,
    LengthNotDivisible,
    OutOfRange,
    StreamTooShort,
    // neuralnet
    ShapeMismatch,
    InputTooSmall,
    BatchTooSmall,
    InvalidRate,
    EmptyDataset,
    LabelOutOfRange,
    CheckpointMismatch,
    // detector / evaluation
    ModelFeatureMismatch,
    IntervalOutsideStream,
    UnsortedInput,
    // cli
    ConfigConflict,
    MissingCheckpoint,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error kind.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by ingest_stream; carries the 1-based data row that failed.
class MalformedRowError : public Error {
public:
    MalformedRowError(std::size_t line_no, const std::string& detail)
        : Error(ErrorCode::MalformedRow, "row " + std::to_string(line_no) + ": " + detail),
          line_no_(line_no) {}

    std::size_t line_no() const noexcept { return line_no_; }

private:
    std::size_t line_no_;
};

}  // namespace ial
