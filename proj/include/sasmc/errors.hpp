#pragma once

#include <stdexcept>
#include <string>

namespace sasmc {

// Bad user-supplied configuration (maps to CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// A factorization or other numerical step failed its conditioning check.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Point estimation could not produce the requested quantity.
class EstimationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace sasmc
