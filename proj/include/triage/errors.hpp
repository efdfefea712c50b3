#pragma once

#include <stdexcept>
#include <string>

namespace triage {

// Invalid configuration (corpus, model or training settings).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A call received arguments outside its contract.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An operation was invoked on an object in the wrong state,
// e.g. merging adapters into a model that has none.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed persisted data (corpus lines, tokenizer or checkpoint files).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace triage
