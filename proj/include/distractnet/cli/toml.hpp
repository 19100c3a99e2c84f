#pragma once

// Reader for the TOML subset used by run configs: [table] and [a.b] headers,
// `key = value` pairs with basic strings, integers, floats, booleans and
// single-line arrays of those, and # comments. Produces nested JSON.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <string_view>

#include "distractnet/error.hpp"

namespace distractnet::toml {

namespace detail {

class LineParser {
 public:
  LineParser(std::string_view s, std::size_t line) : s_(s), line_(line) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end_or_comment() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string key() {
    skip_ws();
    if (peek() == '"') return string();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == '-'))
      ++pos_;
    if (start == pos_) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{key()};
    skip_ws();
    while (peek() == '.') {
      ++pos_;
      parts.push_back(key());
      skip_ws();
    }
    return parts;
  }

  nlohmann::json value() {
    skip_ws();
    const char c = peek();
    if (c == '"') return string();
    if (c == '[') return array();
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return number();
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw InputError("config line " + std::to_string(line_) + ": " + what);
  }

 private:
  std::string string() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  nlohmann::json array() {
    ++pos_;
    nlohmann::json arr = nlohmann::json::array();
    skip_ws();
    if (peek() == ']') {
      ++pos_;
      return arr;
    }
    while (true) {
      arr.push_back(value());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        skip_ws();
        if (peek() == ']') {
          ++pos_;
          return arr;
        }
        continue;
      }
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      fail("expected ',' or ']' in array");
    }
  }

  nlohmann::json number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                s_[pos_] == '+' || s_[pos_] == '-' || s_[pos_] == '_'))
      ++pos_;
    std::string tok(s_.substr(start, pos_ - start));
    std::erase(tok, '_');
    if (tok.empty()) fail("expected a value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos && tok.find("0x") == std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(tok, &used);
        if (used == tok.size()) return v;
      } else {
        const long long v = std::stoll(tok, &used, 10);
        if (used == tok.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("invalid value '" + tok + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

inline nlohmann::json& descend(nlohmann::json& root, const std::vector<std::string>& path, LineParser& p) {
  nlohmann::json* node = &root;
  for (const auto& part : path) {
    if (!node->contains(part)) (*node)[part] = nlohmann::json::object();
    node = &(*node)[part];
    if (!node->is_object()) p.fail("'" + part + "' is not a table");
  }
  return *node;
}

}  // namespace detail

inline nlohmann::json parse(std::string_view text) {
  nlohmann::json root = nlohmann::json::object();
  std::vector<std::string> table;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    start = end + 1;
    detail::LineParser p(line, line_no);
    if (p.at_end_or_comment()) continue;
    if (p.peek() == '[') {
      p.expect('[');
      table = p.dotted_key();
      p.expect(']');
      detail::descend(root, table, p);
    } else {
      auto key = p.dotted_key();
      p.expect('=');
      nlohmann::json v = p.value();
      auto& parent = detail::descend(root, std::vector<std::string>(table.begin(), table.end()), p);
      std::vector<std::string> head(key.begin(), key.end() - 1);
      auto& target = detail::descend(parent, head, p);
      if (target.contains(key.back())) p.fail("duplicate key '" + key.back() + "'");
      target[key.back()] = std::move(v);
    }
    if (!p.at_end_or_comment()) p.fail("unexpected trailing characters");
    if (end == text.size()) break;
  }
  return root;
}

inline nlohmann::json parse_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

}  // namespace distractnet::toml
