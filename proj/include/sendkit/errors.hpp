#pragma once

#include <stdexcept>
#include <string>

namespace sendkit {

/// Coarse failure classes; the CLI maps each one to its own exit code.
enum class ErrorKind {
  invalid_argument,
  dimension,
  insufficient_samples,
  symmetry,
  convergence,
  degenerate_spectrum,
  divergence,
  io,
  format,
  manifest,
  schema,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgumentError : public Error {
 public:
  explicit InvalidArgumentError(const std::string& what) : Error(ErrorKind::invalid_argument, what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(ErrorKind::dimension, what) {}
};

class InsufficientSamplesError : public Error {
 public:
  explicit InsufficientSamplesError(const std::string& what)
      : Error(ErrorKind::insufficient_samples, what) {}
};

class SymmetryError : public Error {
 public:
  explicit SymmetryError(const std::string& what) : Error(ErrorKind::symmetry, what) {}
};

/// Raised when an iterative method hits its iteration cap. Carries the last iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_value)
      : Error(ErrorKind::convergence, what), last_value_(last_value) {}
  double last_value() const noexcept { return last_value_; }

 private:
  double last_value_;
};

class DegenerateSpectrumError : public Error {
 public:
  explicit DegenerateSpectrumError(const std::string& what)
      : Error(ErrorKind::degenerate_spectrum, what) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(ErrorKind::divergence, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

/// Snapshot parse failures. The subclasses let callers tell the causes apart.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

class BadMagicError : public FormatError {
 public:
  explicit BadMagicError(const std::string& what) : FormatError(what) {}
};

class TruncatedError : public FormatError {
 public:
  explicit TruncatedError(const std::string& what) : FormatError(what) {}
};

class VersionMismatchError : public FormatError {
 public:
  explicit VersionMismatchError(const std::string& what) : FormatError(what) {}
};

class ManifestError : public Error {
 public:
  explicit ManifestError(const std::string& what) : Error(ErrorKind::manifest, what) {}
};

/// Config document violations; `what()` starts with the offending JSON field path.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error(ErrorKind::schema, what) {}
};

}  // namespace sendkit
