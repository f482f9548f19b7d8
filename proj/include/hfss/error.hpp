#pragma once

#include <stdexcept>
#include <string>

namespace hfss {

enum class ErrorKind {
  InvalidResolution,
  MeshConsistency,
  MeshMismatch,
  ConstraintViolation,
  InvalidTest,
  StepSize,
  Instability,
  Config,
  NotWeaklyHarmonic,
  IndexRange,
  Concatenation,
  Storage,
  InvalidRate,
  EmptySolutionSet,
  Io,
  CorruptArchive,
};

const char* to_string(ErrorKind kind);

// Process exit code for a failure of the given kind: 2 validation, 3 numerical, 4 IO.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hfss
