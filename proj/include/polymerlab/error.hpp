#pragma once

#include <stdexcept>
#include <string>

namespace polymerlab {

/// Error categories. The CLI maps each one to its own exit code.
enum class ErrorCategory {
  invalid_parameter,
  domain,
  capacity,
  invalid_endpoint,
  incomplete_input,
  io,
  version_mismatch,
};

const char* category_name(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory c, const std::string& what)
      : std::runtime_error(what), category_(c) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class InvalidParameter : public Error {
 public:
  explicit InvalidParameter(const std::string& w)
      : Error(ErrorCategory::invalid_parameter, w) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& w) : Error(ErrorCategory::domain, w) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& w)
      : Error(ErrorCategory::capacity, w) {}
};

class InvalidEndpoint : public Error {
 public:
  explicit InvalidEndpoint(const std::string& w)
      : Error(ErrorCategory::invalid_endpoint, w) {}
};

class IncompleteInput : public Error {
 public:
  explicit IncompleteInput(const std::string& w)
      : Error(ErrorCategory::incomplete_input, w) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& w) : Error(ErrorCategory::io, w) {}
};

class VersionMismatch : public Error {
 public:
  explicit VersionMismatch(const std::string& w)
      : Error(ErrorCategory::version_mismatch, w) {}
};

}  // namespace polymerlab
