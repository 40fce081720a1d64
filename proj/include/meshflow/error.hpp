#pragma once

#include <stdexcept>
#include <string>

namespace meshflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible matrix shapes or mismatched sizes between collaborating objects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Node, edge or row index outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data: bad files, inconsistent graphs, invalid configuration.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared in a loss, gradient or prediction.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace meshflow
