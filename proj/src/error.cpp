#include "hyperme/error.hpp"

namespace hyperme {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kNonConvergence: return "non-convergence";
    case ErrorKind::kBoundary: return "boundary";
    case ErrorKind::kNumericalFailure: return "numerical-failure";
    case ErrorKind::kResource: return "resource";
    case ErrorKind::kSingularity: return "singularity";
  }
  return "unknown";
}

}  // namespace hyperme
