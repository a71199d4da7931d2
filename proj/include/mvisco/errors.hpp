#pragma once

#include <stdexcept>
#include <string>

namespace mvisco {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MVISCO_DEFINE_ERROR(Name)          \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  };

MVISCO_DEFINE_ERROR(InvalidSpec)
MVISCO_DEFINE_ERROR(InvalidArgument)
MVISCO_DEFINE_ERROR(EvalAtSingularity)
MVISCO_DEFINE_ERROR(NotIntegrable)
MVISCO_DEFINE_ERROR(SizeMismatch)
MVISCO_DEFINE_ERROR(PlanMismatch)
MVISCO_DEFINE_ERROR(SingularDerivative)
MVISCO_DEFINE_ERROR(SolverFailure)
MVISCO_DEFINE_ERROR(CflViolation)
MVISCO_DEFINE_ERROR(ModeMismatch)
MVISCO_DEFINE_ERROR(InvalidTestFunction)
MVISCO_DEFINE_ERROR(ParseError)
MVISCO_DEFINE_ERROR(IoError)

#undef MVISCO_DEFINE_ERROR

/// Raised when a configuration value violates a model constraint.
class ValidationError : public Error {
 public:
  ValidationError(std::string parameter, std::string constraint)
      : Error(parameter + ": " + constraint),
        parameter_(std::move(parameter)),
        constraint_(std::move(constraint)) {}

  const std::string& parameter() const noexcept { return parameter_; }
  const std::string& constraint() const noexcept { return constraint_; }

 private:
  std::string parameter_;
  std::string constraint_;
};

}  // namespace mvisco
