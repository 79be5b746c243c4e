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
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace memaudit::cli {

// Scalar or flat array value of the config document.
struct ConfigValue {
  enum class Kind { boolean, integer, floating, string, array };

  Kind kind = Kind::string;
  bool b = false;
  std::int64_t i = 0;
  double d = 0.0;
  std::string s;
  std::vector<ConfigValue> items;

  static ConfigValue of(bool v);
  static ConfigValue of(std::int64_t v);
  static ConfigValue of(double v);
  static ConfigValue of(std::string v);
  static ConfigValue of(std::vector<std::string> v);

  std::string to_toml() const;
  friend bool operator==(const ConfigValue&, const ConfigValue&) = default;
};

// Parses one value: "string", 'literal', integer, float, true/false, or a
// single-line [array] of those. Throws ConfigError.
ConfigValue parse_config_value(std::string_view text);

// Grammar (a TOML subset):
//   document := line*
//   line     := ws (comment | table | pair)? ws comment? newline
//   table    := "[" name "]"          name := [A-Za-z0-9_-]+
//   pair     := name ws "=" ws value
//   value    := string | integer | float | bool | array
//   array    := "[" (value ("," value)* ","?)? "]"   (one line, no nesting)
// Keys are addressed as "table.key"; keys before the first table have no
// prefix. Redefining a key is an error.
class Config {
 public:
  static Config parse(std::string_view text, std::string_view source = "<config>");
  static Config load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }
  // "table.key=value"; a value that does not parse is taken as a bare string.
  void apply_override(std::string_view assignment);
  // Copies every key of other over this one.
  void merge(const Config& other);

  std::string get_string(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  const std::map<std::string, ConfigValue>& values() const noexcept { return values_; }

  // Canonical text: top-level keys, then tables in name order, keys sorted.
  // parse(dump()) == *this.
  std::string dump() const;

  friend bool operator==(const Config&, const Config&) = default;

 private:
  const ConfigValue& at(const std::string& key) const;
  std::map<std::string, ConfigValue> values_;
};

// Every key the tool understands, with its default.
Config default_config();

// Throws ConfigError naming the first key that default_config() lacks, or a
// value whose kind differs from the default's.
void check_known_keys(const Config& cfg);

}  // namespace memaudit::cli
