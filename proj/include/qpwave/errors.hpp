#pragma once

#include <stdexcept>
#include <string>

namespace qpwave {

// Domain failures: the inputs are well formed but the mathematics rejects
// them (resonance, non-convergence, ...). The CLI maps these to exit code 2.
class DomainError : public std::runtime_error {
 public:
  DomainError(std::string reason, const std::string& what)
      : std::runtime_error(what), reason_(std::move(reason)) {}

  // Short machine-readable tag, e.g. "singular_operator".
  const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SingularOperator : public DomainError {
 public:
  explicit SingularOperator(const std::string& what)
      : DomainError("singular_operator", what) {}
};

class InsufficientData : public DomainError {
 public:
  explicit InsufficientData(const std::string& what)
      : DomainError("insufficient_data", what) {}
};

class MixedDegenerateIndex : public DomainError {
 public:
  explicit MixedDegenerateIndex(const std::string& what)
      : DomainError("mixed_degenerate_index", what) {}
};

class NotConverged : public DomainError {
 public:
  explicit NotConverged(const std::string& what)
      : DomainError("not_converged", what) {}
};

class DivergedIncrement : public DomainError {
 public:
  explicit DivergedIncrement(const std::string& what)
      : DomainError("diverged_increment", what) {}
};

class StepUnstable : public DomainError {
 public:
  explicit StepUnstable(const std::string& what)
      : DomainError("step_unstable", what) {}
};

class SchemaVersionMismatch : public DomainError {
 public:
  SchemaVersionMismatch(int found, int expected)
      : DomainError("schema_version_mismatch",
                    "schema version " + std::to_string(found) +
                        " found, expected " + std::to_string(expected)),
        found_(found) {}
  int found() const { return found_; }

 private:
  int found_;
};

class CorruptFile : public DomainError {
 public:
  explicit CorruptFile(const std::string& what)
      : DomainError("corrupt_file", what) {}
};

}  // namespace qpwave
