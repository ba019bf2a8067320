#pragma once

#include <stdexcept>
#include <string>

namespace sledge {

// Malformed or inconsistent user input (CLI exit code 1).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A structural invariant of a scene or graph does not hold (CLI exit code 2).
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sledge
