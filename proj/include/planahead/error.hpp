#pragma once

#include <stdexcept>
#include <string>

namespace planahead {

// Root of every exception the harness throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input, bad configuration or a violated precondition. The CLI maps it to
// exit code 2; every other Error maps to 3.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace planahead
