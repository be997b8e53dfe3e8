// Copyright 2026 The StrSum Authors.
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

#ifndef STRSUM_ERRORS_HPP
#define STRSUM_ERRORS_HPP

#include "strsum/numkit/matrix.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>

namespace strsum {

/// Malformed or unusable input data. Maps to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A JSON Lines record could not be used; carries the 1-based line number.
class MalformedRecord : public InputError {
 public:
  MalformedRecord(std::string path, std::size_t line, const std::string& what)
      : InputError(path + ":" + std::to_string(line) + ": " + what), path_(std::move(path)), line_(line) {}
  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

class EmptyDocument : public InputError {
 public:
  EmptyDocument() : InputError("document has no sentences") {}
};

/// Checkpoint and vocabulary disagree. Maps to exit code 2.
class VocabMismatch : public InputError {
 public:
  using InputError::InputError;
};

/// Training produced a NaN/Inf loss. Maps to exit code 3.
class NonFiniteLoss : public numkit::NumericError {
 public:
  NonFiniteLoss(std::string doc_id, const std::string& detail)
      : numkit::NumericError("non-finite loss on document '" + doc_id + "': " + detail),
        doc_id_(std::move(doc_id)) {}
  const std::string& doc_id() const { return doc_id_; }

 private:
  std::string doc_id_;
};

}  // namespace strsum

#endif  // STRSUM_ERRORS_HPP
