#pragma once

#include <map>
#include <string>

namespace cfisac {

// Minimal INI-style configuration: [section] headers, key = value pairs,
// comments starting with '#' or ';', blank lines ignored. Keys are looked up
// as "section.key"; keys before any section header live in the "" section.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const;

  std::string get_str(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value);

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Decibel helpers.
double db_to_linear(double db);       // 10^(db/10)
double dbm_to_watt(double dbm);       // 10^((dbm-30)/10)
double dbsm_to_sqm(double dbsm);      // radar cross sections
double linear_to_db(double linear);

}  // namespace cfisac
