#pragma once

#include <stdexcept>
#include <string>

namespace fuse2d {

// Base of every error raised by the library. Invalid arguments to pure
// functions (a zero repetition factor, a negative stride) use
// std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data violates a format or consistency rule.
class DataError : public Error {
 public:
  using Error::Error;
};

// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

// A model file has the wrong magic, version, or is truncated.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace fuse2d
