#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tdrl/common.hpp"

namespace tdrl {

// One human-readable key=value document per run. '#' starts a comment.
// get_* getters record which keys were consumed so unknown keys can be
// rejected, and materialize() snapshots every key with defaults filled in.
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  int64_t require_int(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  // Keys present in the document but never consumed by a getter.
  std::vector<std::string> unknown_keys() const;
  void check_no_unknown_keys(const std::string& context) const;

  // Full snapshot: every consumed key with its effective value (defaulted or
  // explicit), in sorted order, as a key=value document.
  std::string materialize() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
  mutable std::map<std::string, std::string> effective_;
  mutable std::set<std::string> consumed_;
};

}  // namespace tdrl
