#pragma once

#include <stdexcept>
#include <string>

namespace advs {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not satisfy an operation's precondition.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument or configuration value is outside its valid domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file was readable but its contents are malformed.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace advs
