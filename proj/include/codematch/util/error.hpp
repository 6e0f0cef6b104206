// Copyright 2026 The codematch Authors.
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

#include <stdexcept>
#include <string>

namespace codematch {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (JSON, SBT strings, snippet source).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Binary file with a bad magic, version, hash or truncated payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Tensor shape mismatch, out-of-range id, or a numeric precondition.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required (training divergence,
// debug-mode forward checks).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace codematch
