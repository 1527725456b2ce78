// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ela {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Hyperparameters that are invalid for the requested channel count.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operation called in the wrong state (missing cache, uninitialized BN stats).
class StateError : public Error {
 public:
  using Error::Error;
};

// Loss or activations became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ela
