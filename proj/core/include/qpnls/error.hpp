#pragma once

#include <stdexcept>
#include <string>

namespace qpnls {

// Failure classes map one-to-one onto the CLI exit codes.
enum class ErrorKind {
  kValidation,  // bad input or configuration (exit 2)
  kNumerical,   // excision failure, blow-up, non-convergence (exit 3)
  kResource,    // a size cap was exceeded (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::kValidation, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::kNumerical, what) {}
};

class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& what) : Error(ErrorKind::kResource, what) {}
};

}  // namespace qpnls
