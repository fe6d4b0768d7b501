// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace theta_milstein {

/// Base of every error the library throws. `code()` is stable and is what the
/// C API hands back to callers.
class Error : public std::runtime_error {
 public:
  enum class Code {
    kContractViolation = 1,
    kDomain,
    kNonConvergence,
    kDivergence,
    kGuardViolation,
    kReferenceFailure,
    kMissingConstant,
    kSingularity,
    kIo,
  };

  Error(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what) : Error(Code::kContractViolation, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(Code::kDomain, what) {}
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double best_residual)
      : Error(Code::kNonConvergence, what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

/// Non-finite or runaway state. `step` is the index of the step that produced it.
class Divergence : public Error {
 public:
  Divergence(const std::string& what, std::size_t step) : Error(Code::kDivergence, what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class GuardViolation : public Error {
 public:
  explicit GuardViolation(const std::string& what) : Error(Code::kGuardViolation, what) {}
};

class ReferenceFailure : public Error {
 public:
  explicit ReferenceFailure(const std::string& what) : Error(Code::kReferenceFailure, what) {}
};

class MissingConstant : public Error {
 public:
  explicit MissingConstant(const std::string& what) : Error(Code::kMissingConstant, what) {}
};

class SingularityError : public Error {
 public:
  explicit SingularityError(const std::string& what) : Error(Code::kSingularity, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Code::kIo, what) {}
};

}  // namespace theta_milstein
