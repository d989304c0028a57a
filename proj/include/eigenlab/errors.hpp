// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace eigenlab {

/// Base class for every error raised by the library. `code()` is the stable
/// identifier used on the wire (session protocol, CLI messages).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message) : Error("ValidationError", message) {}
};

class SingularMatrix : public Error {
 public:
  explicit SingularMatrix(const std::string& message) : Error("SingularMatrix", message) {}
};

class NoConvergence : public Error {
 public:
  explicit NoConvergence(const std::string& message) : Error("NoConvergence", message) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& message) : Error("DimensionMismatch", message) {}
};

class UnknownSession : public Error {
 public:
  explicit UnknownSession(const std::string& id) : Error("UnknownSession", "unknown session: " + id) {}
};

class IndexOutOfRange : public Error {
 public:
  explicit IndexOutOfRange(const std::string& message) : Error("IndexOutOfRange", message) {}
};

}  // namespace eigenlab
