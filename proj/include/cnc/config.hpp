#pragma once

// Plain-text configuration documents.
//
// Two kinds of lines, '#' starts a comment:
//
//   key = value            scalar setting (value may contain spaces)
//   node name=a0 kind=network access=1 x=0 y=0 delay=0.2
//                          record: a type word followed by key=value fields
//
// Scalars are unique; records keep document order.

#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cnc/common.hpp"

namespace cnc {

struct ConfigRecord {
  std::string type;
  std::map<std::string, std::string> fields;
  int line = 0;

  bool has(const std::string& key) const { return fields.contains(key); }

  const std::string& get(const std::string& key) const {
    auto it = fields.find(key);
    if (it == fields.end())
      throw ConfigError("line " + std::to_string(line) + ": " + type + " record missing '" + key + "'");
    return it->second;
  }
  double get_double(const std::string& key) const { return parse_double(get(key), where(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }
  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = get(key);
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError(where(key) + ": expected a boolean, got '" + v + "'");
  }

 private:
  std::string where(const std::string& key) const {
    return "line " + std::to_string(line) + " " + type + "." + key;
  }
};

class ConfigDocument {
 public:
  static ConfigDocument parse(std::string_view text) {
    ConfigDocument doc;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      auto tokens = split_ws(raw);
      if (tokens.empty()) continue;

      if (tokens.size() >= 2 && tokens[1] == "=") {
        std::string value;
        for (std::size_t i = 2; i < tokens.size(); ++i) {
          if (i > 2) value += ' ';
          value += tokens[i];
        }
        if (doc.scalars_.contains(tokens[0]))
          throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + tokens[0] + "'");
        doc.scalars_.emplace(tokens[0], value);
        continue;
      }

      ConfigRecord rec;
      rec.type = tokens[0];
      rec.line = line_no;
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        auto eq = tokens[i].find('=');
        if (eq == std::string::npos || eq == 0)
          throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" + tokens[i] + "'");
        auto key = tokens[i].substr(0, eq);
        if (!rec.fields.emplace(key, tokens[i].substr(eq + 1)).second)
          throw ConfigError("line " + std::to_string(line_no) + ": duplicate field '" + key + "'");
      }
      doc.records_.push_back(std::move(rec));
    }
    return doc;
  }

  static ConfigDocument load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return scalars_.contains(key); }

  std::optional<std::string> find(const std::string& key) const {
    auto it = scalars_.find(key);
    if (it == scalars_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
  }
  double get_double(const std::string& key, double fallback) const {
    auto v = find(key);
    return v ? parse_double(*v, key) : fallback;
  }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto v = find(key);
    return v ? parse_int(*v, key) : fallback;
  }

  // "lo hi" pair; a single value means a degenerate range.
  std::pair<double, double> get_range(const std::string& key, std::pair<double, double> fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    auto parts = split_ws(*v);
    if (parts.size() == 1) {
      double x = parse_double(parts[0], key);
      return {x, x};
    }
    if (parts.size() != 2) throw ConfigError(key + ": expected 'min max', got '" + *v + "'");
    return {parse_double(parts[0], key), parse_double(parts[1], key)};
  }

  std::vector<double> get_list(const std::string& key) const {
    std::vector<double> out;
    if (auto v = find(key))
      for (const auto& p : split_ws(*v)) out.push_back(parse_double(p, key));
    return out;
  }

  std::vector<const ConfigRecord*> records(std::string_view type) const {
    std::vector<const ConfigRecord*> out;
    for (const auto& r : records_)
      if (r.type == type) out.push_back(&r);
    return out;
  }

  const std::map<std::string, std::string>& scalars() const { return scalars_; }
  const std::vector<ConfigRecord>& all_records() const { return records_; }

  static std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      std::size_t j = i;
      while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j > i) out.emplace_back(s.substr(i, j - i));
      i = j;
    }
    return out;
  }

 private:
  std::map<std::string, std::string> scalars_;
  std::vector<ConfigRecord> records_;
};

}  // namespace cnc
