#include "hfss/error.hpp"

namespace hfss {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidResolution: return "invalid-resolution";
    case ErrorKind::MeshConsistency: return "mesh-consistency";
    case ErrorKind::MeshMismatch: return "mesh-mismatch";
    case ErrorKind::ConstraintViolation: return "constraint-violation";
    case ErrorKind::InvalidTest: return "invalid-test";
    case ErrorKind::StepSize: return "step-size";
    case ErrorKind::Instability: return "instability";
    case ErrorKind::Config: return "config";
    case ErrorKind::NotWeaklyHarmonic: return "not-weakly-harmonic";
    case ErrorKind::IndexRange: return "index-range";
    case ErrorKind::Concatenation: return "concatenation";
    case ErrorKind::Storage: return "storage";
    case ErrorKind::InvalidRate: return "invalid-rate";
    case ErrorKind::EmptySolutionSet: return "empty-solution-set";
    case ErrorKind::Io: return "io";
    case ErrorKind::CorruptArchive: return "corrupt-archive";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConstraintViolation:
    case ErrorKind::StepSize:
    case ErrorKind::Instability:
    case ErrorKind::NotWeaklyHarmonic:
    case ErrorKind::EmptySolutionSet:
      return 3;
    case ErrorKind::Io:
    case ErrorKind::CorruptArchive:
      return 4;
    default:
      return 2;
  }
}

}  // namespace hfss
