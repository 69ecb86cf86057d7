#pragma once

#include <stdexcept>
#include <string>

namespace cwsoc {

/// Input rejected by a validation rule (malformed spec, violated invariant).
class validation_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to reach its tolerance.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation requested outside the domain of a function.
class domain_fault : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace cwsoc
