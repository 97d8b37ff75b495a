#pragma once

#include <stdexcept>
#include <string>

namespace mplnet {

/// Base class for all library errors.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent user input (files, flags, dimensions).
class input_error : public error {
 public:
  using error::error;
};

/// Invalid model parameters (non-PD precision, off-simplex proportions, ...).
class parameter_error : public error {
 public:
  using error::error;
};

/// A numerical routine failed to converge or produced non-finite values.
class numerical_error : public error {
 public:
  using error::error;
};

/// A mixture component lost all responsibility mass.
class degenerate_error : public error {
 public:
  using error::error;
};

/// Operation requested outside its supported domain (e.g. oracle with p > 2).
class unsupported_error : public error {
 public:
  using error::error;
};

/// Warning sink. Defaults to stderr; tests may silence or capture it.
using warning_handler = void (*)(const std::string&);
void set_warning_handler(warning_handler h);
void warn(const std::string& msg);

}  // namespace mplnet
