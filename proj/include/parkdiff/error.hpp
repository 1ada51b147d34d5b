/* Copyright 2026 The parkdiff Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace parkdiff {

// Base for every error raised by the library. Subclasses name the failure
// class so callers (and the CLI exit-code mapping) can tell them apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (non-scalar loss, bad index...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values (schedule ranges, kernel sizes, lot geometry).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf appeared in a forward value or a rollout diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed scene file, checkpoint or config. Carries the 1-based line number
// when one is meaningful (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace parkdiff
