#pragma once

#include <stdexcept>
#include <string>

namespace phdc {

/// Base of every error the library raises for expected failure modes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Division guard tripped (v_dc or |v_ac| below its floor).
class SingularityError : public Error {
 public:
  using Error::Error;
};

class GridCollapseError : public SingularityError {
 public:
  using SingularityError::SingularityError;
};

class ScenarioError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double t) : Error(what), time_(t) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ComparisonError : public Error {
 public:
  using Error::Error;
};

}  // namespace phdc
