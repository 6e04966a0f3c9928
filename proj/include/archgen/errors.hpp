// Copyright 2026 The archgen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace archgen {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data errors: bad inputs, malformed files, inconsistent architectures.
class DataError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public DataError {
 public:
  using DataError::DataError;
};

class UnknownLayerError : public DataError {
 public:
  using DataError::DataError;
};

class VocabError : public DataError {
 public:
  using DataError::DataError;
};

class GraphError : public DataError {
 public:
  using DataError::DataError;
};

class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class ReportError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public DataError {
 public:
  explicit ShapeError(const std::string& what,
                      std::optional<std::size_t> index = std::nullopt)
      : DataError(index ? what + " (at index " + std::to_string(*index) + ")"
                        : what),
        index_(index) {}

  std::optional<std::size_t> index() const { return index_; }

 private:
  std::optional<std::size_t> index_;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  enum class Code { kGeneric, kNotInTable, kUnknownKind, kProtocol, kTimeout, kWorkerCrash };

  EvalError(Code code, const std::string& what) : Error(what), code_(code) {}
  explicit EvalError(const std::string& what) : EvalError(Code::kGeneric, what) {}

  Code code() const { return code_; }

 private:
  Code code_;
};

// Fatal protocol mismatch with an external worker (version gate).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace archgen
