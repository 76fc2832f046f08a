// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace eqsw {

/// Base class for all numerical and usage errors raised by the toolkit.
/// The leading token of what() names the error kind, so CLI output and
/// logs stay greppable.
class Error : public std::runtime_error {
 public:
  Error(const std::string& kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(kind) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

struct SingularMatrix : Error {
  explicit SingularMatrix(const std::string& msg) : Error("SingularMatrix", msg) {}
};

struct NotSymmetric : Error {
  explicit NotSymmetric(const std::string& msg) : Error("NotSymmetric", msg) {}
};

struct NonFiniteEvaluation : Error {
  explicit NonFiniteEvaluation(const std::string& msg) : Error("NonFiniteEvaluation", msg) {}
};

struct NoConvergence : Error {
  explicit NoConvergence(const std::string& msg) : Error("NoConvergence", msg) {}
};

struct SingularJacobian : Error {
  explicit SingularJacobian(const std::string& msg) : Error("SingularJacobian", msg) {}
};

struct Separation : Error {
  explicit Separation(const std::string& msg) : Error("Separation", msg) {}
};

struct Positivity : Error {
  explicit Positivity(const std::string& msg) : Error("Positivity", msg) {}
};

struct UnorderedRecords : Error {
  explicit UnorderedRecords(const std::string& msg) : Error("UnorderedRecords", msg) {}
};

struct TooManyFailures : Error {
  explicit TooManyFailures(const std::string& msg) : Error("TooManyFailures", msg) {}
};

/// Config/schema/usage problems; the CLI maps these to exit code 2,
/// everything above to exit code 1.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("ConfigError", msg) {}
};

}  // namespace eqsw
