#pragma once

#include <stdexcept>
#include <string>

namespace adsm {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Layer or network sizes that do not chain to positive integers.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Tensor / channel / vector dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// Value outside the representable range of a codec or container.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function (e.g. zero disparity).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace adsm
