#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rgov {

enum class ErrorKind {
  kNumericalFailure,
  kNotHurwitz,
  kInfeasible,
  kNoFeasiblePoint,
  kSingularState,
  kPoseInObstacle,
  kPlanningFailed,
  kDiverged,
  kInvalidArgument,
  kConfig,
  kUnsafeStart,
};

std::string_view to_string(ErrorKind kind);

// Every failure surfaced by the library carries a kind so callers (the CLI
// in particular) can map it to an exit code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define RGOV_DEFINE_ERROR(Name, Kind)                         \
  class Name : public Error {                                 \
   public:                                                    \
    explicit Name(const std::string& what) : Error(Kind, what) {} \
  };

RGOV_DEFINE_ERROR(NumericalFailure, ErrorKind::kNumericalFailure)
RGOV_DEFINE_ERROR(NotHurwitz, ErrorKind::kNotHurwitz)
RGOV_DEFINE_ERROR(Infeasible, ErrorKind::kInfeasible)
RGOV_DEFINE_ERROR(NoFeasiblePoint, ErrorKind::kNoFeasiblePoint)
RGOV_DEFINE_ERROR(SingularState, ErrorKind::kSingularState)
RGOV_DEFINE_ERROR(PoseInObstacle, ErrorKind::kPoseInObstacle)
RGOV_DEFINE_ERROR(PlanningFailed, ErrorKind::kPlanningFailed)
RGOV_DEFINE_ERROR(Diverged, ErrorKind::kDiverged)
RGOV_DEFINE_ERROR(InvalidArgument, ErrorKind::kInvalidArgument)
RGOV_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
RGOV_DEFINE_ERROR(UnsafeStart, ErrorKind::kUnsafeStart)

#undef RGOV_DEFINE_ERROR

}  // namespace rgov
