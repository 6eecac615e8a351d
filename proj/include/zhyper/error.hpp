// Copyright 2026 The Zhyper Authors.
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

namespace zhyper {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not agree (matmul inner dims, rank mismatch, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition of an operation (negative std, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Lookup of an unknown injection site, context id or table row.
class KeyError : public Error {
 public:
  using Error::Error;
};

/// Bad caller-supplied data (token id out of vocabulary, oversize sequence).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed or corrupted file payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (empty dataset, missing split, duplicate id).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace zhyper
