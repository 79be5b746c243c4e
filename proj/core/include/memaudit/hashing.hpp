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

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>

namespace memaudit {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = kFnvOffset) noexcept;
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = kFnvOffset) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Mixes a base seed with an ordered list of discriminators (chain id, prompt
// id hash, image index, ...). Order matters.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) noexcept;

std::string to_hex(std::uint64_t value);

// 128-bit content identifier rendered as 32 lowercase hex digits.
std::string content_id(std::span<const std::uint8_t> bytes);
std::string content_id(std::string_view text);

}  // namespace memaudit
