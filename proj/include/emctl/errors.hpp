#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace emctl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An iterative kernel failed to converge.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int iterations)
      : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}
  explicit NumericError(const std::string& what) : Error(what), iterations_(0) {}
  int iterations() const { return iterations_; }

 private:
  int iterations_;
};

class DefinitenessError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class ModelMismatchError : public Error {
 public:
  ModelMismatchError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Raised when a law is used without a passing condition report.
class RefusalError : public Error {
 public:
  RefusalError(const std::string& what, std::vector<std::string> failed)
      : Error(what), failed_(std::move(failed)) {}
  const std::vector<std::string>& failed_conditions() const { return failed_; }

 private:
  std::vector<std::string> failed_;
};

class StiffnessError : public Error {
 public:
  StiffnessError(const std::string& what, double time)
      : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, int line)
      : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

void log_warning(const std::string& message);

}  // namespace emctl
