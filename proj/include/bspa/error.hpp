#pragma once

#include <stdexcept>
#include <string>

namespace bspa {

/// Bad input, configuration or precondition. Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A generator or filter endpoint failed. Retryable; maps to CLI exit code 2.
class EndpointError : public std::runtime_error {
 public:
  EndpointError(const std::string& what, int attempts = 1)
      : std::runtime_error(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

/// Non-finite value encountered in a loss, logit or gradient.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bspa
