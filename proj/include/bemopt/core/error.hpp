#pragma once

#include <stdexcept>
#include <string>

namespace bemopt {

// Base of every error raised by the library. The CLI maps the subclasses to
// exit codes (usage 2, input 3, numerical 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace bemopt
