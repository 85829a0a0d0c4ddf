#pragma once

#include <stdexcept>
#include <string>

namespace pooltest {

// Input outside a function's mathematical domain (nonpositive load, v50 >= v95, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent planner/session/simulation configuration.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An operation called in a state that does not allow it (e.g. next on a terminal planner).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Outcomes that do not answer the issued queries: unknown ids, duplicates, missing answers.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Persisted document could not be loaded: bad schema, version mismatch, replay divergence.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pooltest
