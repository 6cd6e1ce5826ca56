// SPDX-License-Identifier: Apache-2.0
#include "fairview/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "fairview/common.hpp"

namespace fairview {

namespace {

[[noreturn]] void parse_fail(const std::string& origin, std::size_t line,
                             const std::string& what) {
  fail(Errc::config_invalid, origin + ":" + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Strips a trailing comment that is not inside a string literal.
std::string_view strip_comment(std::string_view s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

TomlValue parse_scalar(std::string_view tok, const std::string& origin, std::size_t line);

TomlValue parse_value(std::string_view tok, const std::string& origin, std::size_t line) {
  tok = trim(tok);
  if (tok.empty()) parse_fail(origin, line, "missing value");
  if (tok.front() == '[') {
    if (tok.back() != ']') parse_fail(origin, line, "unterminated array");
    std::vector<TomlValue> items;
    std::string_view body = tok.substr(1, tok.size() - 2);
    std::size_t depth = 0, start = 0;
    bool in_str = false;
    for (std::size_t i = 0; i <= body.size(); ++i) {
      const bool at_end = i == body.size();
      const char c = at_end ? ',' : body[i];
      if (!at_end && c == '"') in_str = !in_str;
      if (in_str) continue;
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == ',' && depth == 0) {
        auto piece = trim(body.substr(start, i - start));
        if (!piece.empty()) items.push_back(parse_value(piece, origin, line));
        start = i + 1;
      }
    }
    return TomlValue{std::move(items)};
  }
  return parse_scalar(tok, origin, line);
}

TomlValue parse_scalar(std::string_view tok, const std::string& origin, std::size_t line) {
  if (tok.front() == '"') {
    if (tok.size() < 2 || tok.back() != '"')
      parse_fail(origin, line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
      if (tok[i] == '\\' && i + 2 < tok.size()) {
        ++i;
        switch (tok[i]) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: parse_fail(origin, line, "unsupported escape");
        }
      } else {
        out.push_back(tok[i]);
      }
    }
    return TomlValue{std::move(out)};
  }
  if (tok == "true") return TomlValue{true};
  if (tok == "false") return TomlValue{false};

  const std::string s(tok);
  const bool looks_float = s.find_first_of(".eE") != std::string::npos &&
                           s.find_first_not_of("+-0123456789.eE_") == std::string::npos;
  if (!looks_float) {
    std::int64_t iv = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), iv);
    if (ec == std::errc() && p == s.data() + s.size()) return TomlValue{iv};
  }
  try {
    std::size_t used = 0;
    const double dv = std::stod(s, &used);
    if (used == s.size()) return TomlValue{dv};
  } catch (...) {
  }
  parse_fail(origin, line, "cannot parse value: " + s);
}

}  // namespace

bool TomlValue::as_bool() const {
  require(std::holds_alternative<bool>(v), Errc::config_invalid, "expected boolean");
  return std::get<bool>(v);
}

std::int64_t TomlValue::as_int() const {
  require(std::holds_alternative<std::int64_t>(v), Errc::config_invalid, "expected integer");
  return std::get<std::int64_t>(v);
}

double TomlValue::as_double() const {
  if (std::holds_alternative<std::int64_t>(v))
    return static_cast<double>(std::get<std::int64_t>(v));
  require(std::holds_alternative<double>(v), Errc::config_invalid, "expected number");
  return std::get<double>(v);
}

const std::string& TomlValue::as_string() const {
  require(std::holds_alternative<std::string>(v), Errc::config_invalid, "expected string");
  return std::get<std::string>(v);
}

const std::vector<TomlValue>& TomlValue::as_array() const {
  require(is_array(), Errc::config_invalid, "expected array");
  return std::get<std::vector<TomlValue>>(v);
}

std::string TomlTable::path_of(const std::string& s, const std::string& k) {
  return s.empty() ? k : s + "." + k;
}

bool TomlTable::has(const std::string& s, const std::string& k) const {
  return entries_.count(path_of(s, k)) > 0;
}

const TomlValue& TomlTable::get(const std::string& s, const std::string& k) const {
  auto it = entries_.find(path_of(s, k));
  require(it != entries_.end(), Errc::config_invalid, "missing config key: " + path_of(s, k));
  return it->second;
}

bool TomlTable::get_bool(const std::string& s, const std::string& k, bool dflt) const {
  return has(s, k) ? get(s, k).as_bool() : dflt;
}

std::int64_t TomlTable::get_int(const std::string& s, const std::string& k,
                                std::int64_t dflt) const {
  return has(s, k) ? get(s, k).as_int() : dflt;
}

double TomlTable::get_double(const std::string& s, const std::string& k, double dflt) const {
  return has(s, k) ? get(s, k).as_double() : dflt;
}

std::string TomlTable::get_string(const std::string& s, const std::string& k,
                                  const std::string& dflt) const {
  return has(s, k) ? get(s, k).as_string() : dflt;
}

std::vector<double> TomlTable::get_double_array(const std::string& s, const std::string& k,
                                                const std::vector<double>& dflt) const {
  if (!has(s, k)) return dflt;
  std::vector<double> out;
  for (const auto& item : get(s, k).as_array()) out.push_back(item.as_double());
  return out;
}

std::vector<std::int64_t> TomlTable::get_int_array(const std::string& s, const std::string& k,
                                                   const std::vector<std::int64_t>& dflt) const {
  if (!has(s, k)) return dflt;
  std::vector<std::int64_t> out;
  for (const auto& item : get(s, k).as_array()) out.push_back(item.as_int());
  return out;
}

void TomlTable::set(const std::string& s, const std::string& k, TomlValue value) {
  entries_[path_of(s, k)] = std::move(value);
}

std::vector<std::string> TomlTable::keys_in(const std::string& section) const {
  std::vector<std::string> out;
  const std::string prefix = section.empty() ? "" : section + ".";
  for (const auto& [path, _] : entries_) {
    if (path.rfind(prefix, 0) != 0) continue;
    const std::string rest = path.substr(prefix.size());
    if (rest.find('.') == std::string::npos &&
        (!section.empty() || path.find('.') == std::string::npos))
      out.push_back(rest);
  }
  return out;
}

TomlTable parse_toml_string(const std::string& text, const std::string& origin) {
  TomlTable table;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') parse_fail(origin, lineno, "unterminated section header");
      auto name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) parse_fail(origin, lineno, "empty section name");
      section = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) parse_fail(origin, lineno, "expected key = value");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) parse_fail(origin, lineno, "empty key");
    table.set(section, std::string(key), parse_value(line.substr(eq + 1), origin, lineno));
  }
  return table;
}

TomlTable parse_toml_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::config_invalid, "cannot open config: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_toml_string(buf.str(), path.string());
}

}  // namespace fairview
