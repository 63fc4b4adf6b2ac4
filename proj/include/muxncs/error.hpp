#pragma once

#include <stdexcept>
#include <string>

namespace muxncs {

/// Malformed plant/config data (dimension mismatch, unreadable files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter outside its admissible range (probabilities, discount, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Solver or eigenvalue failure. Not a statement about feasibility.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed serialized document; the message names the offending field.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace muxncs
