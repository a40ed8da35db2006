#pragma once

#include <stdexcept>
#include <string>

namespace flowmap {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or degenerate geometry handed to a geometric primitive.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed user input (files, config, arguments).
class InputError : public Error {
 public:
  using Error::Error;
};

// A routing/matching backend could not be reached. Retryable.
class BackendError : public Error {
 public:
  using Error::Error;
};

// Internal invariant violated; indicates a bug rather than bad input.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace flowmap
