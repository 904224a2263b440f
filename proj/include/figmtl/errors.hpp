// Copyright 2026 The figmtl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace figmtl {

/// Base class for every error raised by the library. The subclasses map onto
/// the process exit codes used by the command-line tool.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// A caller violated an operation's precondition (wrong regime, empty batch...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes do not line up.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Token id outside the embedding table.
class VocabularyError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite values, divergence, degenerate distributions.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace figmtl
