#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ctsnet {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kValidation = 2,
  kNonConvergence = 3,
  kControlDivergence = 4,
};

class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Invalid input: parameter domain, file schema, index ranges.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(what, ExitCode::kValidation) {}
};

class DegenerateGeometryError : public Error {
 public:
  DegenerateGeometryError(const std::string& what, int member)
      : Error(what, ExitCode::kNonConvergence), member_(member) {}
  int member() const noexcept { return member_; }

 private:
  int member_;
};

// A taut-mode cable cluster carries negative tension.
class CompressionError : public Error {
 public:
  CompressionError(const std::string& what, int cluster)
      : Error(what, ExitCode::kNonConvergence), cluster_(cluster) {}
  int cluster() const noexcept { return cluster_; }

 private:
  int cluster_;
};

class SingularStiffnessError : public Error {
 public:
  SingularStiffnessError(const std::string& what, int null_dim)
      : Error(what, ExitCode::kNonConvergence), null_dim_(null_dim) {}
  int null_dim() const noexcept { return null_dim_; }

 private:
  int null_dim_;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> history)
      : Error(what, ExitCode::kNonConvergence), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const noexcept {
    return history_;
  }

 private:
  std::vector<double> history_;
};

class UnstableStructureError : public Error {
 public:
  UnstableStructureError(const std::string& what, int negative_count)
      : Error(what, ExitCode::kNonConvergence),
        negative_count_(negative_count) {}
  int negative_count() const noexcept { return negative_count_; }

 private:
  int negative_count_;
};

class PrestressError : public Error {
 public:
  explicit PrestressError(const std::string& what)
      : Error(what, ExitCode::kNonConvergence) {}
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, std::size_t step)
      : Error(what, ExitCode::kNonConvergence), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Feedback loop could not be closed: zero sensitivity or growing oscillation.
class ControlError : public Error {
 public:
  explicit ControlError(const std::string& what)
      : Error(what, ExitCode::kControlDivergence) {}
};

}  // namespace ctsnet
