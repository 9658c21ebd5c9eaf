/* Copyright 2026 The eicue Authors. All Rights Reserved.

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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eicue {

enum class ErrorKind {
  kInvalidInput,
  kInvalidState,
  kNumericalFailure,
  kFormat,
  kConfig,
  kData,
  kDegenerateGraph,
  kDegenerateInput,
  kDegenerateContrast,
  kSkipTerm,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct InvalidInput : Error {
  explicit InvalidInput(const std::string& w) : Error(ErrorKind::kInvalidInput, w) {}
};

struct InvalidState : Error {
  explicit InvalidState(const std::string& w) : Error(ErrorKind::kInvalidState, w) {}
};

struct NumericalFailure : Error {
  explicit NumericalFailure(const std::string& w)
      : Error(ErrorKind::kNumericalFailure, w) {}
};

// Malformed tensor or checkpoint file. `offset` is the byte position at which
// parsing gave up.
class FormatError : public Error {
 public:
  FormatError(std::size_t offset, const std::string& w)
      : Error(ErrorKind::kFormat, "byte " + std::to_string(offset) + ": " + w),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Config text that does not parse or validate. `line` is 1-based, 0 when the
// problem is not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, const std::string& w)
      : Error(ErrorKind::kConfig,
              line ? "line " + std::to_string(line) + ": " + w : w),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::kData, w) {}
};

class DegenerateGraph : public Error {
 public:
  DegenerateGraph(std::size_t patch, const std::string& w)
      : Error(ErrorKind::kDegenerateGraph, w), patch_(patch) {}
  std::size_t patch() const noexcept { return patch_; }

 private:
  std::size_t patch_;
};

struct DegenerateInput : Error {
  explicit DegenerateInput(const std::string& w)
      : Error(ErrorKind::kDegenerateInput, w) {}
};

struct DegenerateContrast : Error {
  explicit DegenerateContrast(const std::string& w)
      : Error(ErrorKind::kDegenerateContrast, w) {}
};

struct SkipTerm : Error {
  explicit SkipTerm(const std::string& w) : Error(ErrorKind::kSkipTerm, w) {}
};

}  // namespace eicue
