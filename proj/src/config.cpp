#include "tdrl/config.hpp"

#include <sstream>

#include "tdrl/tensor_io.hpp"

namespace tdrl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    c.kv_[key] = value;
  }
  return c;
}

Config Config::load(const std::string& path) { return parse(read_text_file(path)); }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  consumed_.insert(key);
  auto it = kv_.find(key);
  const std::string v = it == kv_.end() ? fallback : it->second;
  effective_[key] = v;
  return v;
}

std::string Config::require_string(const std::string& key) const {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("missing required config field: " + key);
  effective_[key] = it->second;
  return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  if (!has(key)) {
    consumed_.insert(key);
    effective_[key] = std::to_string(fallback);
    return fallback;
  }
  return require_double(key);
}

double Config::require_double(const std::string& key) const {
  const std::string s = require_string(key);
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field " + key + ": expected a number, got '" + s + "'");
  }
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
  if (!has(key)) {
    consumed_.insert(key);
    effective_[key] = std::to_string(fallback);
    return fallback;
  }
  return require_int(key);
}

int64_t Config::require_int(const std::string& key) const {
  const std::string s = require_string(key);
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field " + key + ": expected an integer, got '" + s + "'");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) {
    consumed_.insert(key);
    effective_[key] = fallback ? "true" : "false";
    return fallback;
  }
  const std::string s = require_string(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("config field " + key + ": expected a boolean, got '" + s + "'");
}

std::vector<double> Config::get_double_list(const std::string& key,
                                            const std::vector<double>& fallback) const {
  if (!has(key)) {
    consumed_.insert(key);
    std::string repr;
    for (size_t i = 0; i < fallback.size(); ++i) repr += (i ? "," : "") + std::to_string(fallback[i]);
    effective_[key] = repr;
    return fallback;
  }
  const std::string s = require_string(key);
  std::vector<double> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("config field " + key + ": expected comma-separated numbers, got '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("config field " + key + ": empty list");
  return out;
}

std::vector<std::string> Config::unknown_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : kv_)
    if (consumed_.count(k) == 0) out.push_back(k);
  return out;
}

void Config::check_no_unknown_keys(const std::string& context) const {
  const auto unknown = unknown_keys();
  if (unknown.empty()) return;
  std::string msg = context + ": unknown config field(s):";
  for (const auto& k : unknown) msg += " " + k;
  throw ConfigError(msg);
}

std::string Config::materialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : effective_) os << k << " = " << v << "\n";
  return os.str();
}

}  // namespace tdrl
