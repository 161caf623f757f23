#pragma once

#include <cctype>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mvsde {

/// Minimal TOML subset for scenario configs: [sections], scalar keys
/// (string, bool, integer, float) and flat arrays of numbers or strings.
/// Keys are flattened to "section.key". Errors carry line numbers.
class TomlValue {
 public:
  using Variant = std::variant<bool, std::int64_t, double, std::string, std::vector<double>,
                               std::vector<std::string>>;
  TomlValue() = default;
  explicit TomlValue(Variant v) : v_(std::move(v)) {}

  bool as_bool() const { return get<bool>("bool"); }
  std::int64_t as_int() const { return get<std::int64_t>("integer"); }
  double as_double() const {
    if (std::holds_alternative<std::int64_t>(v_)) return double(std::get<std::int64_t>(v_));
    return get<double>("float");
  }
  const std::string& as_string() const { return get<std::string>("string"); }
  std::vector<double> as_double_array() const {
    if (std::holds_alternative<std::vector<double>>(v_)) return std::get<std::vector<double>>(v_);
    return {as_double()};  // scalars promote to one-element arrays
  }
  const Variant& raw() const { return v_; }

  std::string serialize() const {
    std::ostringstream os;
    os.precision(17);
    if (std::holds_alternative<bool>(v_)) {
      os << (std::get<bool>(v_) ? "true" : "false");
    } else if (std::holds_alternative<std::int64_t>(v_)) {
      os << std::get<std::int64_t>(v_);
    } else if (std::holds_alternative<double>(v_)) {
      const double d = std::get<double>(v_);
      os << d;
      if (os.str().find_first_of(".eE") == std::string::npos) os << ".0";
    } else if (std::holds_alternative<std::string>(v_)) {
      os << '"' << std::get<std::string>(v_) << '"';
    } else if (std::holds_alternative<std::vector<double>>(v_)) {
      os << '[';
      const auto& a = std::get<std::vector<double>>(v_);
      for (std::size_t i = 0; i < a.size(); ++i) os << (i ? ", " : "") << a[i];
      os << ']';
    } else {
      os << '[';
      const auto& a = std::get<std::vector<std::string>>(v_);
      for (std::size_t i = 0; i < a.size(); ++i) os << (i ? ", " : "") << '"' << a[i] << '"';
      os << ']';
    }
    return os.str();
  }

 private:
  template <class T>
  const T& get(const char* name) const {
    if (!std::holds_alternative<T>(v_)) throw std::runtime_error(std::string("expected ") + name);
    return std::get<T>(v_);
  }
  Variant v_;
};

class TomlTable {
 public:
  bool contains(const std::string& key) const { return entries_.count(key) > 0; }

  const TomlValue& at(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw std::runtime_error("config: missing key '" + key + "'");
    return it->second;
  }

  void set(const std::string& key, TomlValue::Variant v) { entries_[key] = TomlValue(std::move(v)); }

  double get_double(const std::string& key, double fallback) {
    if (!contains(key)) set(key, fallback);
    return at(key).as_double();
  }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) {
    if (!contains(key)) set(key, fallback);
    return at(key).as_int();
  }
  bool get_bool(const std::string& key, bool fallback) {
    if (!contains(key)) set(key, fallback);
    return at(key).as_bool();
  }
  std::string get_string(const std::string& key, const std::string& fallback) {
    if (!contains(key)) set(key, fallback);
    return at(key).as_string();
  }
  std::vector<double> get_double_array(const std::string& key, std::vector<double> fallback) {
    if (!contains(key)) set(key, std::move(fallback));
    return at(key).as_double_array();
  }

  /// Canonical text form: sections sorted, keys sorted. Re-parsing it yields
  /// the same table, which is the config round-trip contract.
  std::string serialize() const {
    std::map<std::string, std::map<std::string, const TomlValue*>> sections;
    for (const auto& [k, v] : entries_) {
      const auto dot = k.find('.');
      sections[k.substr(0, dot)][k.substr(dot + 1)] = &v;
    }
    std::ostringstream os;
    bool first = true;
    for (const auto& [sec, keys] : sections) {
      if (!first) os << "\n";
      first = false;
      os << "[" << sec << "]\n";
      for (const auto& [key, val] : keys) os << key << " = " << val->serialize() << "\n";
    }
    return os.str();
  }

  const std::map<std::string, TomlValue>& entries() const { return entries_; }

 private:
  std::map<std::string, TomlValue> entries_;
};

namespace toml_detail {

inline std::string strip(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline TomlValue::Variant parse_scalar(const std::string& tok, int line) {
  if (tok.empty()) throw std::runtime_error("config line " + std::to_string(line) + ": empty value");
  if (tok == "true") return true;
  if (tok == "false") return false;
  if (tok.front() == '"') {
    if (tok.size() < 2 || tok.back() != '"')
      throw std::runtime_error("config line " + std::to_string(line) + ": unterminated string");
    return tok.substr(1, tok.size() - 2);
  }
  try {
    std::size_t used = 0;
    if (tok.find_first_of(".eEinfa") == std::string::npos) {
      const std::int64_t i = std::stoll(tok, &used);
      if (used == tok.size()) return i;
    }
    const double d = std::stod(tok, &used);
    if (used == tok.size()) return d;
  } catch (const std::exception&) {
  }
  throw std::runtime_error("config line " + std::to_string(line) + ": cannot parse value '" + tok + "'");
}

}  // namespace toml_detail

inline TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_string = !in_string;
      if (line[i] == '#' && !in_string) {
        line = line.substr(0, i);
        break;
      }
    }
    line = toml_detail::strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) + ": malformed section");
      section = toml_detail::strip(line.substr(1, line.size() - 2));
      if (section.empty())
        throw std::runtime_error("config line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = toml_detail::strip(line.substr(0, eq));
    const std::string value = toml_detail::strip(line.substr(eq + 1));
    if (key.empty() || section.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) + ": key outside a section");

    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) + ": unterminated array");
      std::vector<double> nums;
      std::vector<std::string> strs;
      std::stringstream ss(value.substr(1, value.size() - 2));
      std::string cell;
      bool is_string = false;
      while (std::getline(ss, cell, ',')) {
        cell = toml_detail::strip(cell);
        if (cell.empty()) continue;
        const auto v = toml_detail::parse_scalar(cell, lineno);
        if (std::holds_alternative<std::string>(v)) {
          is_string = true;
          strs.push_back(std::get<std::string>(v));
        } else if (std::holds_alternative<double>(v)) {
          nums.push_back(std::get<double>(v));
        } else if (std::holds_alternative<std::int64_t>(v)) {
          nums.push_back(double(std::get<std::int64_t>(v)));
        } else {
          throw std::runtime_error("config line " + std::to_string(lineno) + ": bad array element");
        }
      }
      if (is_string)
        table.set(section + "." + key, strs);
      else
        table.set(section + "." + key, nums);
      continue;
    }
    table.set(section + "." + key, toml_detail::parse_scalar(value, lineno));
  }
  return table;
}

}  // namespace mvsde
