#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nfsense {

/// Minimal TOML-style configuration: `[section]` headers, `key = value` with
/// strings, numbers, booleans and flat numeric arrays, `#` comments. Keys
/// inside a section are stored as "section.key".
class Config {
 public:
  using Value = std::variant<bool, double, std::string, std::vector<double>>;

  static Config parse(std::string const& text);
  static Config load(std::filesystem::path const& path);

  bool has(std::string const& key) const { return values_.count(key) != 0; }
  std::vector<std::string> keys() const;
  Value const* find(std::string const& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }

  std::optional<std::string> get_string(std::string const& key) const;
  std::optional<double> get_number(std::string const& key) const;
  std::optional<long long> get_integer(std::string const& key) const;
  std::optional<bool> get_bool(std::string const& key) const;
  std::optional<std::vector<double>> get_numbers(std::string const& key) const;

  void set(std::string const& key, Value value) { values_[key] = std::move(value); }

 private:
  std::map<std::string, Value> values_;
};

} // namespace nfsense
