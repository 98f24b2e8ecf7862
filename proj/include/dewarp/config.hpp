#pragma once

#include <map>
#include <string>

namespace dewarp {

// Flat key=value config file. One pair per line, '#' starts a comment.
// Keys are dotted paths ("model.scale", "objective.lambda").
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);  // DataError if unreadable

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set_double(const std::string& key, double v);
  void set_int(const std::string& key, long long v);
  void set_bool(const std::string& key, bool v);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  // merge overrides into *this
  void merge(const KeyValueConfig& overrides);

  std::string serialize() const;  // sorted keys, one per line
  void save(const std::string& path) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace dewarp
