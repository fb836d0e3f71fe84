#pragma once

#include <stdexcept>
#include <string>

namespace loadshift {

// Base for every error the library raises. The CLI maps these to exit codes:
// InputError -> 2, InvariantError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class CatalogError : public InputError {
 public:
  using InputError::InputError;
};

class TraceError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class PipelineError : public Error {
 public:
  using Error::Error;
};

// A runtime check of a conservation or ordering invariant failed.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace loadshift
