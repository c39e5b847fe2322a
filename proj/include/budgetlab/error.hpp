#pragma once

#include <stdexcept>
#include <string>

namespace budgetlab {

// Argument outside the mathematical domain of an operation (negative spend,
// eta outside (0,1), non-finite input).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Data cannot pin down the requested parameters.
class NonIdentifiableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConcaveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid experiment configuration. `field()` is the dotted JSON path of the
// offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace budgetlab
