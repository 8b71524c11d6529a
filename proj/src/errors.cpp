#include "rgov/errors.hpp"

namespace rgov {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNumericalFailure: return "NumericalFailure";
    case ErrorKind::kNotHurwitz: return "NotHurwitz";
    case ErrorKind::kInfeasible: return "Infeasible";
    case ErrorKind::kNoFeasiblePoint: return "NoFeasiblePoint";
    case ErrorKind::kSingularState: return "SingularState";
    case ErrorKind::kPoseInObstacle: return "PoseInObstacle";
    case ErrorKind::kPlanningFailed: return "PlanningFailed";
    case ErrorKind::kDiverged: return "Diverged";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kConfig: return "ConfigError";
    case ErrorKind::kUnsafeStart: return "UnsafeStart";
  }
  return "Unknown";
}

}  // namespace rgov
