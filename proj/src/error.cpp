#include "reorient/error.hpp"

namespace reorient {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::InvalidMesh: return "InvalidMesh";
    case ErrorCode::DofMismatch: return "DofMismatch";
    case ErrorCode::NoSolution: return "NoSolution";
    case ErrorCode::NoContact: return "NoContact";
    case ErrorCode::PlacementFailure: return "PlacementFailure";
    case ErrorCode::NoHits: return "NoHits";
    case ErrorCode::NoVisibleSurface: return "NoVisibleSurface";
    case ErrorCode::NoFreePositions: return "NoFreePositions";
    case ErrorCode::InvalidStart: return "InvalidStart";
    case ErrorCode::InvalidGoal: return "InvalidGoal";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::AllCandidatesFailed: return "AllCandidatesFailed";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EpisodeFailure: return "EpisodeFailure";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace reorient
