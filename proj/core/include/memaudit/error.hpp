// Copyright 2026 The memaudit Authors
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

namespace memaudit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what, bool retriable = false,
                        std::optional<std::size_t> seed_index = std::nullopt)
      : Error(what), retriable_(retriable), seed_index_(seed_index) {}

  bool retriable() const noexcept { return retriable_; }
  // Index of the noise sample that was being evaluated, when known.
  std::optional<std::size_t> seed_index() const noexcept { return seed_index_; }

 private:
  bool retriable_;
  std::optional<std::size_t> seed_index_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Input that parses but breaks a record invariant (e.g. accept without source).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

}  // namespace memaudit
