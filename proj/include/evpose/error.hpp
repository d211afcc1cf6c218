// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evpose {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// exit codes: DataError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problems with input data: malformed files, bad ranges, missing samples.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class BoundsError : public DataError {
 public:
  using DataError::DataError;
};

class RotationError : public DataError {
 public:
  using DataError::DataError;
};

class OrderingError : public DataError {
 public:
  using DataError::DataError;
};

/// Not enough groundtruth poses or windows to proceed.
class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class RangeError : public DataError {
 public:
  using DataError::DataError;
};

class ConfigError : public DataError {
 public:
  using DataError::DataError;
};

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

/// Tensor shape or rank mismatch. Always a programming or config error.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, degenerate network outputs.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace evpose
