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

#include "memaudit_cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "memaudit/error.hpp"

namespace memaudit::cli {

ConfigValue ConfigValue::of(bool v) {
  ConfigValue c;
  c.kind = Kind::boolean;
  c.b = v;
  return c;
}

ConfigValue ConfigValue::of(std::int64_t v) {
  ConfigValue c;
  c.kind = Kind::integer;
  c.i = v;
  return c;
}

ConfigValue ConfigValue::of(double v) {
  ConfigValue c;
  c.kind = Kind::floating;
  c.d = v;
  return c;
}

ConfigValue ConfigValue::of(std::string v) {
  ConfigValue c;
  c.kind = Kind::string;
  c.s = std::move(v);
  return c;
}

ConfigValue ConfigValue::of(std::vector<std::string> v) {
  ConfigValue c;
  c.kind = Kind::array;
  for (auto& s : v) c.items.push_back(of(std::move(s)));
  return c;
}

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += ch;
    }
  }
  return out + "\"";
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  // Shortest text that reads back to the same double.
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  std::string s = buf;
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

class ValueParser {
 public:
  explicit ValueParser(std::string_view text) : text_(text) {}

  ConfigValue parse_all() {
    ConfigValue v = parse_value(true);
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected text after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError(why + " in value '" + std::string(text_) + "'");
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  ConfigValue parse_value(bool allow_array) {
    skip_ws();
    if (pos_ >= text_.size()) fail("missing value");
    const char c = text_[pos_];
    if (c == '"') return ConfigValue::of(parse_basic_string());
    if (c == '\'') return ConfigValue::of(parse_literal_string());
    if (c == '[') {
      if (!allow_array) fail("nested arrays are not supported");
      return parse_array();
    }
    return parse_bare();
  }

  std::string parse_basic_string() {
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char ch = text_[pos_++];
      if (ch != '\\') {
        out += ch;
        continue;
      }
      if (pos_ >= text_.size()) fail("unterminated escape");
      switch (text_[pos_++]) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: fail("unknown escape");
      }
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::string parse_literal_string() {
    const auto end = text_.find('\'', pos_ + 1);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string out(text_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return out;
  }

  ConfigValue parse_array() {
    ++pos_;
    ConfigValue arr;
    arr.kind = ConfigValue::Kind::array;
    skip_ws();
    while (pos_ < text_.size() && text_[pos_] != ']') {
      arr.items.push_back(parse_value(false));
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        skip_ws();
        continue;
      }
      if (pos_ >= text_.size() || text_[pos_] != ']') fail("expected ',' or ']'");
    }
    if (pos_ >= text_.size()) fail("unterminated array");
    ++pos_;
    return arr;
  }

  ConfigValue parse_bare() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' && text_[pos_] != ' ' &&
           text_[pos_] != '\t')
      ++pos_;
    std::string token(text_.substr(start, pos_ - start));
    if (token == "true") return ConfigValue::of(true);
    if (token == "false") return ConfigValue::of(false);
    std::string digits;
    for (char ch : token)
      if (ch != '_') digits += ch;
    if (digits.empty()) fail("empty value");
    const char* first = digits.data();
    const char* last = first + digits.size();
    if (*first == '+') ++first;
    if (digits.find_first_of(".eE") == std::string::npos && digits != "inf" && digits != "nan") {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec == std::errc() && ptr == last) return ConfigValue::of(v);
      fail("not an integer");
    }
    double d = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, d);
    if (ec == std::errc() && ptr == last) return ConfigValue::of(d);
    fail("not a number, string, boolean or array");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

// Drops a trailing comment, honoring quotes.
std::string_view strip_comment(std::string_view line) {
  char quote_char = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote_char) {
      if (c == '\\' && quote_char == '"') ++i;
      else if (c == quote_char) quote_char = 0;
    } else if (c == '"' || c == '\'') {
      quote_char = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool valid_name(std::string_view s) { return !s.empty() && std::ranges::all_of(s, is_name_char); }

const char* kind_name(ConfigValue::Kind k) {
  switch (k) {
    case ConfigValue::Kind::boolean: return "boolean";
    case ConfigValue::Kind::integer: return "integer";
    case ConfigValue::Kind::floating: return "float";
    case ConfigValue::Kind::string: return "string";
    case ConfigValue::Kind::array: return "array";
  }
  return "value";
}

}  // namespace

std::string ConfigValue::to_toml() const {
  switch (kind) {
    case Kind::boolean: return b ? "true" : "false";
    case Kind::integer: return std::to_string(i);
    case Kind::floating: return format_double(d);
    case Kind::string: return quote(s);
    case Kind::array: {
      std::string out = "[";
      for (std::size_t k = 0; k < items.size(); ++k) out += (k ? ", " : "") + items[k].to_toml();
      return out + "]";
    }
  }
  return {};
}

ConfigValue parse_config_value(std::string_view text) { return ValueParser(trim(text)).parse_all(); }

Config Config::parse(std::string_view text, std::string_view source) {
  Config cfg;
  std::string table;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto where = [&] { return std::string(source) + ":" + std::to_string(line_no) + ": "; };
    std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where() + "malformed table header");
      std::string_view name = trim(line.substr(1, line.size() - 2));
      if (!valid_name(name)) throw ConfigError(where() + "bad table name '" + std::string(name) + "'");
      table = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where() + "expected key = value");
    std::string_view name = trim(line.substr(0, eq));
    if (!valid_name(name)) throw ConfigError(where() + "bad key '" + std::string(name) + "'");
    const std::string key = table.empty() ? std::string(name) : table + "." + std::string(name);
    if (cfg.values_.contains(key)) throw ConfigError(where() + "duplicate key '" + key + "'");
    try {
      cfg.values_[key] = parse_config_value(line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where() + e.what());
    }
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override must look like table.key=value, got '" +
                                                      std::string(assignment) + "'");
  const std::string key(trim(assignment.substr(0, eq)));
  if (key.empty()) throw ConfigError("override has an empty key");
  const std::string_view text = trim(assignment.substr(eq + 1));
  try {
    values_[key] = parse_config_value(text);
  } catch (const ConfigError&) {
    values_[key] = ConfigValue::of(std::string(text));
  }
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

const ConfigValue& Config::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string Config::get_string(const std::string& key) const {
  const auto& v = at(key);
  if (v.kind != ConfigValue::Kind::string) throw ConfigError("config key '" + key + "' must be a string");
  return v.s;
}

std::int64_t Config::get_int(const std::string& key) const {
  const auto& v = at(key);
  if (v.kind != ConfigValue::Kind::integer) throw ConfigError("config key '" + key + "' must be an integer");
  return v.i;
}

std::uint64_t Config::get_uint(const std::string& key) const {
  const auto v = get_int(key);
  if (v < 0) throw ConfigError("config key '" + key + "' must not be negative");
  return static_cast<std::uint64_t>(v);
}

double Config::get_double(const std::string& key) const {
  const auto& v = at(key);
  if (v.kind == ConfigValue::Kind::integer) return static_cast<double>(v.i);
  if (v.kind != ConfigValue::Kind::floating) throw ConfigError("config key '" + key + "' must be a number");
  return v.d;
}

bool Config::get_bool(const std::string& key) const {
  const auto& v = at(key);
  if (v.kind != ConfigValue::Kind::boolean) throw ConfigError("config key '" + key + "' must be true or false");
  return v.b;
}

std::vector<std::string> Config::get_strings(const std::string& key) const {
  const auto& v = at(key);
  if (v.kind != ConfigValue::Kind::array) throw ConfigError("config key '" + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& item : v.items) {
    if (item.kind != ConfigValue::Kind::string)
      throw ConfigError("config key '" + key + "' must be an array of strings");
    out.push_back(item.s);
  }
  return out;
}

std::string Config::dump() const {
  std::map<std::string, std::map<std::string, const ConfigValue*>> tables;
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    if (dot == std::string::npos)
      tables[""][key] = &value;
    else
      tables[key.substr(0, dot)][key.substr(dot + 1)] = &value;
  }
  std::string out;
  for (const auto& [table, entries] : tables) {
    if (!table.empty()) out += (out.empty() ? "" : "\n") + ("[" + table + "]\n");
    for (const auto& [name, value] : entries) out += name + " = " + value->to_toml() + "\n";
  }
  return out;
}

Config default_config() {
  Config c;
  auto set = [&](const char* key, auto v) {
    if constexpr (std::is_same_v<decltype(v), int>)
      c.set(key, ConfigValue::of(static_cast<std::int64_t>(v)));
    else if constexpr (std::is_same_v<decltype(v), const char*>)
      c.set(key, ConfigValue::of(std::string(v)));
    else
      c.set(key, ConfigValue::of(v));
  };
  set("model_id", "mock-planted");
  set("seed", 0);

  set("backend.kind", "planted");
  set("backend.words", std::vector<std::string>{"golden", "castle", "misty", "forest", "river", "portrait"});
  set("backend.planted", std::vector<std::string>{"misty", "golden", "castle"});
  set("backend.peak", 10.0);
  set("backend.max_tokens", 77);
  set("backend.runtime", "");

  set("energy.samples", 4);
  set("energy.seed_policy", "fixed_shared");

  set("sampler.iterations", 150);
  set("sampler.proposals", 10);
  set("sampler.temperature", 1.0);
  set("sampler.kappa", 1.0);
  set("sampler.max_outer", 10);
  set("sampler.length", 8);
  set("sampler.chains", 1);
  set("sampler.check_every_step", true);

  set("augment.pool_size", 100);
  set("augment.per_seed", 20);

  set("verify.generations", 100);
  set("verify.eps", 0.25);
  set("verify.min_nodes", 20);
  set("verify.representatives", 3);

  set("generator.triggers", std::vector<std::string>{});
  set("generator.memorization_rate", 1.0);
  set("generator.extra_word_decay", 0.5);
  set("generator.image_bytes", 64);
  set("generator.fail_every", 0);

  set("embedder.dim", 128);

  set("web.enabled", true);
  set("web.url_prefix", "https://images.example.org/");

  set("bench.images_per_prompt", 10);
  set("bench.guidance_scale", 7.5);
  set("bench.steps", 50);
  set("bench.threshold", 0.5);
  set("bench.clip", 0.3);
  set("bench.aesthetic", 5.0);
  set("bench.general_prompts", "");

  set("review.host", "127.0.0.1");
  set("review.port", 8765);
  set("review.token", "");
  set("review.origin", "*");
  return c;
}

void check_known_keys(const Config& cfg) {
  const Config defaults = default_config();
  for (const auto& [key, value] : cfg.values()) {
    auto it = defaults.values().find(key);
    if (it == defaults.values().end()) throw ConfigError("unknown config key '" + key + "'");
    const auto want = it->second.kind;
    const bool numeric_ok = want == ConfigValue::Kind::floating && value.kind == ConfigValue::Kind::integer;
    if (value.kind != want && !numeric_ok)
      throw ConfigError("config key '" + key + "' must be " + kind_name(want) + ", got " + kind_name(value.kind));
  }
}

}  // namespace memaudit::cli
