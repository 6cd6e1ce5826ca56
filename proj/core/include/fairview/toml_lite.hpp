// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace fairview {

// Reader for the TOML subset the experiment configs use: top-level and
// [section] tables, keys assigned strings, integers, floats, booleans, or
// flat arrays of those. Dates, inline tables, dotted keys, and multi-line
// strings are not part of the config schema and are rejected.
struct TomlValue {
  std::variant<bool, std::int64_t, double, std::string, std::vector<TomlValue>> v;

  bool is_array() const { return std::holds_alternative<std::vector<TomlValue>>(v); }
  bool as_bool() const;
  std::int64_t as_int() const;
  double as_double() const;  // accepts integer values too
  const std::string& as_string() const;
  const std::vector<TomlValue>& as_array() const;
};

class TomlTable {
 public:
  bool has(const std::string& section, const std::string& key) const;
  const TomlValue& get(const std::string& section, const std::string& key) const;

  bool get_bool(const std::string& s, const std::string& k, bool dflt) const;
  std::int64_t get_int(const std::string& s, const std::string& k, std::int64_t dflt) const;
  double get_double(const std::string& s, const std::string& k, double dflt) const;
  std::string get_string(const std::string& s, const std::string& k,
                         const std::string& dflt) const;
  std::vector<double> get_double_array(const std::string& s, const std::string& k,
                                       const std::vector<double>& dflt) const;
  std::vector<std::int64_t> get_int_array(const std::string& s, const std::string& k,
                                          const std::vector<std::int64_t>& dflt) const;

  void set(const std::string& section, const std::string& key, TomlValue value);
  std::vector<std::string> keys_in(const std::string& section) const;

 private:
  std::map<std::string, TomlValue> entries_;  // "section.key" or "key"
  static std::string path_of(const std::string& s, const std::string& k);
};

TomlTable parse_toml_string(const std::string& text, const std::string& origin = "<string>");
TomlTable parse_toml_file(const std::filesystem::path& path);

}  // namespace fairview
