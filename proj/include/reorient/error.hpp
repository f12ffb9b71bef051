#pragma once

#include <stdexcept>
#include <string>

namespace reorient {

enum class ErrorCode {
  ZeroVector,
  EmptyMesh,
  InvalidMesh,
  DofMismatch,
  NoSolution,
  NoContact,
  PlacementFailure,
  NoHits,
  NoVisibleSurface,
  NoFreePositions,
  InvalidStart,
  InvalidGoal,
  Timeout,
  AllCandidatesFailed,
  ShapeMismatch,
  EmptyDataset,
  EpisodeFailure,
  InvalidInput,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace reorient
