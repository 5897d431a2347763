#pragma once

// Reader and canonical writer for the configuration text format: a TOML subset
// with tables, arrays of tables, dotted keys, strings, numbers, booleans,
// (multi-line) arrays and inline tables. Dates and multi-line strings are not supported.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phs/error.hpp"

namespace phs::toml {

using json = nlohmann::json;

namespace detail {

class Reader {
 public:
  explicit Reader(const std::string& text) : s_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    std::string table_name;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        const bool array = s_.compare(i_, 2, "[[") == 0;
        i_ += array ? 2 : 1;
        skip_space();
        const auto path = key_path();
        skip_space();
        if (!consume(array ? "]]" : "]")) fail(array ? "expected ']]'" : "expected ']'");
        end_of_line();
        table = &open_table(root, path, array);
        table_name = join(path);
        continue;
      }
      const int start = line_;
      const auto path = key_path();
      skip_space();
      if (!consume("=")) fail("expected '=' after key");
      skip_space();
      json v = value();
      end_of_line();
      json* target = table;
      for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        json& next = (*target)[path[k]];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) fail("key '" + path[k] + "' is not a table");
        target = &next;
      }
      if (target->contains(path.back()))
        fail("duplicate key '" + (table_name.empty() ? "" : table_name + ".") + join(path) + "'", start);
      (*target)[path.back()] = std::move(v);
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg, int line = 0) const {
    throw ConfigError(msg, "line " + std::to_string(line ? line : line_));
  }

  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[i_]; }
  bool consume(const char* lit) {
    const std::size_t n = std::char_traits<char>::length(lit);
    if (s_.compare(i_, n, lit) != 0) return false;
    i_ += n;
    return true;
  }
  void skip_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
  }
  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++i_;
  }
  void newline() {
    if (peek() == '\r') ++i_;
    if (peek() == '\n') {
      ++i_;
      ++line_;
    }
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_space();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        newline();
      } else {
        break;
      }
    }
  }
  // whitespace, comments and newlines inside arrays and inline tables
  void skip_layout() {
    while (!eof()) {
      skip_space();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        newline();
      } else {
        return;
      }
    }
  }
  void end_of_line() {
    skip_space();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n' && peek() != '\r') fail(std::string("unexpected '") + peek() + "' after value");
    newline();
  }

  static std::string join(const std::vector<std::string>& p) {
    std::string s;
    for (std::size_t k = 0; k < p.size(); ++k) s += (k ? "." : "") + p[k];
    return s;
  }

  std::string bare_or_quoted_key() {
    if (peek() == '"') return string_value();
    std::string k;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) k += s_[i_++];
    if (k.empty()) fail("expected a key");
    return k;
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> p{bare_or_quoted_key()};
    while (true) {
      skip_space();
      if (peek() != '.') break;
      ++i_;
      skip_space();
      p.push_back(bare_or_quoted_key());
    }
    return p;
  }

  json& open_table(json& root, const std::vector<std::string>& path, bool array) {
    json* t = &root;
    for (std::size_t k = 0; k < path.size(); ++k) {
      json& next = (*t)[path[k]];
      const bool last = k + 1 == path.size();
      if (last && array) {
        if (next.is_null()) next = json::array();
        if (!next.is_array()) fail("'" + join(path) + "' is already a plain value");
        next.push_back(json::object());
        return next.back();
      }
      if (next.is_null()) next = json::object();
      if (next.is_array() && !next.empty() && next.back().is_object()) {
        t = &next.back();
      } else if (next.is_object()) {
        t = &next;
      } else {
        fail("'" + join(path) + "' is not a table");
      }
    }
    return *t;
  }

  std::string string_value() {
    ++i_;  // opening quote
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = s_[i_++];
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated escape");
      c = s_[i_++];
      switch (c) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(std::string("unsupported escape \\") + c);
      }
    }
    return out;
  }

  json number() {
    const std::size_t start = i_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_'))
      ++i_;
    std::string tok = s_.substr(start, i_ - start);
    std::erase(tok, '_');
    if (tok.empty()) fail("expected a value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" || tok == "nan" ||
                          tok == "+inf" || tok == "-inf";
    if (!is_float) {
      long long v = 0;
      const char* b = tok.data() + (tok[0] == '+' ? 1 : 0);
      auto [p, ec] = std::from_chars(b, tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size()) fail("malformed number '" + tok + "'");
      return v;
    }
    if (tok == "inf" || tok == "+inf" || tok == "-inf" || tok == "nan") fail("non-finite number '" + tok + "'");
    double v = 0.0;
    const char* b = tok.data() + (tok[0] == '+' ? 1 : 0);
    auto [p, ec] = std::from_chars(b, tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) fail("malformed number '" + tok + "'");
    return v;
  }

  json value() {
    const char c = peek();
    if (c == '"') return string_value();
    if (c == '[') {
      const int start = line_;
      ++i_;
      json arr = json::array();
      while (true) {
        skip_layout();
        if (eof()) fail("unterminated array", start);
        if (peek() == ']') {
          ++i_;
          return arr;
        }
        arr.push_back(value());
        skip_layout();
        if (eof()) fail("unterminated array", start);
        if (peek() == ',') {
          ++i_;
        } else if (peek() != ']') {
          fail("expected ',' or ']' in array");
        }
      }
    }
    if (c == '{') {
      ++i_;
      json obj = json::object();
      skip_space();
      if (peek() == '}') {
        ++i_;
        return obj;
      }
      while (true) {
        skip_space();
        const auto path = key_path();
        skip_space();
        if (!consume("=")) fail("expected '=' in inline table");
        skip_space();
        json* t = &obj;
        for (std::size_t k = 0; k + 1 < path.size(); ++k) {
          json& next = (*t)[path[k]];
          if (next.is_null()) next = json::object();
          t = &next;
        }
        (*t)[path.back()] = value();
        skip_space();
        if (consume("}")) return obj;
        if (!consume(",")) fail("expected ',' or '}' in inline table");
      }
    }
    if (consume("true")) return true;
    if (consume("false")) return false;
    return number();
  }

  const std::string& s_;
  std::size_t i_ = 0;
  int line_ = 1;
};

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

inline std::string key(const std::string& k) {
  const bool bare = !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
  return bare ? k : quote(k);
}

inline std::string scalar(const json& v) {
  if (v.is_string()) return quote(v.get<std::string>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }
  if (v.is_array()) {
    std::string s = "[";
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + scalar(v[k]);
    return s + "]";
  }
  if (v.is_object()) {
    std::string s = "{";
    bool first = true;
    for (auto it = v.begin(); it != v.end(); ++it) {
      s += (first ? "" : ", ") + key(it.key()) + " = " + scalar(it.value());
      first = false;
    }
    return s + "}";
  }
  throw ConfigError("null values cannot be written", "");
}

inline bool is_table_array(const json& v) {
  return v.is_array() && !v.empty() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_object(); });
}

inline void write_table(std::ostringstream& out, const json& t, const std::string& prefix) {
  for (auto it = t.begin(); it != t.end(); ++it)
    if (!it.value().is_object() && !is_table_array(it.value())) out << key(it.key()) << " = " << scalar(it.value()) << '\n';
  for (auto it = t.begin(); it != t.end(); ++it) {
    const std::string name = prefix.empty() ? key(it.key()) : prefix + "." + key(it.key());
    if (it.value().is_object()) {
      out << "\n[" << name << "]\n";
      write_table(out, it.value(), name);
    } else if (is_table_array(it.value())) {
      for (const auto& e : it.value()) {
        out << "\n[[" << name << "]]\n";
        write_table(out, e, name);
      }
    }
  }
}

}  // namespace detail

/// Parses configuration text; errors carry the line number.
inline json parse(const std::string& text) { return detail::Reader(text).parse(); }

/// Canonical text: plain keys first in sorted order, then sub-tables and arrays of tables.
inline std::string dump(const json& root) {
  if (!root.is_object()) throw ConfigError("top level must be a table", "");
  std::ostringstream out;
  detail::write_table(out, root, "");
  std::string s = out.str();
  if (!s.empty() && s.front() == '\n') s.erase(0, 1);
  return s;
}

}  // namespace phs::toml
