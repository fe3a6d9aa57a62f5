#include "nfsense/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nfsense/error.hpp"

namespace nfsense {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(std::string const& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

[[noreturn]] void syntax(int line, std::string const& what) {
  fail(ErrorKind::InvalidArgument, "config line " + std::to_string(line) + ": " + what);
}

double parse_number(std::string const& text, int line) {
  std::string s;
  for (char c : text)
    if (c != '_') s.push_back(c);
  if (!s.empty() && s[0] == '+') s.erase(0, 1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) syntax(line, "invalid value '" + text + "'");
  return v;
}

Config::Value parse_value(std::string const& text, int line) {
  if (text.empty()) syntax(line, "missing value");
  if (text == "true") return true;
  if (text == "false") return false;
  if (text.front() == '"' || text.front() == '\'') {
    if (text.size() < 2 || text.back() != text.front()) syntax(line, "unterminated string");
    return text.substr(1, text.size() - 2);
  }
  if (text.front() == '[') {
    if (text.back() != ']') syntax(line, "unterminated array");
    std::vector<double> out;
    std::stringstream items(text.substr(1, text.size() - 2));
    std::string item;
    while (std::getline(items, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      out.push_back(parse_number(item, line));
    }
    return out;
  }
  return parse_number(text, line);
}

} // namespace

Config Config::parse(std::string const& text) {
  Config cfg;
  std::stringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string const s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') syntax(line, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) syntax(line, "empty section name");
      continue;
    }
    auto const eq = s.find('=');
    if (eq == std::string::npos) syntax(line, "expected key = value");
    std::string key = trim(s.substr(0, eq));
    if (key.empty()) syntax(line, "empty key");
    if (!section.empty()) key = section + "." + key;
    if (cfg.has(key)) syntax(line, "duplicate key '" + key + "'");
    cfg.values_[key] = parse_value(trim(s.substr(eq + 1)), line);
  }
  return cfg;
}

Config Config::load(std::filesystem::path const& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  for (auto const& [k, v] : values_) out.push_back(k);
  return out;
}

template <class T>
static std::optional<T> typed(std::map<std::string, Config::Value> const& values, std::string const& key,
                              char const* type) {
  auto it = values.find(key);
  if (it == values.end()) return std::nullopt;
  if (auto const* v = std::get_if<T>(&it->second)) return *v;
  fail(ErrorKind::InvalidArgument, "config key '" + key + "' must be a " + type);
}

std::optional<std::string> Config::get_string(std::string const& key) const {
  return typed<std::string>(values_, key, "string");
}
std::optional<double> Config::get_number(std::string const& key) const { return typed<double>(values_, key, "number"); }
std::optional<bool> Config::get_bool(std::string const& key) const { return typed<bool>(values_, key, "boolean"); }
std::optional<std::vector<double>> Config::get_numbers(std::string const& key) const {
  auto it = values_.find(key);
  if (it != values_.end())
    if (auto const* d = std::get_if<double>(&it->second)) return std::vector<double>{*d};
  return typed<std::vector<double>>(values_, key, "numeric array");
}

std::optional<long long> Config::get_integer(std::string const& key) const {
  auto v = get_number(key);
  if (!v) return std::nullopt;
  if (std::floor(*v) != *v) fail(ErrorKind::InvalidArgument, "config key '" + key + "' must be an integer");
  return static_cast<long long>(*v);
}

} // namespace nfsense
