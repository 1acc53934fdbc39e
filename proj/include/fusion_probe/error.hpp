#pragma once

#include <stdexcept>
#include <string>

namespace fusion_probe {

/// Malformed or inconsistent input data (files, matrices, datasets).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated an operation precondition (bad sizes, bad parameters).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace fusion_probe
