#pragma once

#include <stdexcept>
#include <string>

namespace cdvi {

/// Base class for every error raised by the library. `module()` names the
/// subsystem that raised it so front ends can print "masks: ..." style
/// diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Invalid configuration value or unsatisfiable parameter combination.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Frame or pixel index out of range, overlapping, or malformed.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A request exceeds the K-frame budget of a denoiser or scheme.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a failed factorization.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A sampling scheme failed validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace cdvi
