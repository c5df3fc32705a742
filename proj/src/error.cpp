#include "ial/error.hpp"

namespace ial {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::NonMonotoneTimestamps: return "NonMonotoneTimestamps";
        case ErrorCode::UnknownLabel: return "UnknownLabel";
        case ErrorCode::InvertedInterval: return "InvertedInterval";
        case ErrorCode::OverlappingEvents: return "OverlappingEvents";
        case ErrorCode::InfeasiblePacking: return "InfeasiblePacking";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::LengthNotDivisible: return "LengthNotDivisible";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::StreamTooShort: return "StreamTooShort";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::InputTooSmall: return "InputTooSmall";
        case ErrorCode::BatchTooSmall: return "BatchTooSmall";
        case ErrorCode::InvalidRate: return "InvalidRate";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
        case ErrorCode::ModelFeatureMismatch: return "ModelFeatureMismatch";
        case ErrorCode::IntervalOutsideStream: return "IntervalOutsideStream";
        case ErrorCode::UnsortedInput: return "UnsortedInput";
        case ErrorCode::ConfigConflict: return "ConfigConflict";
        case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace ial
