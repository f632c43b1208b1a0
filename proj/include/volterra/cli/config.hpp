#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace volterra::cli {

inline constexpr const char* kVersion = "0.1.0";

// Any problem with the configuration itself; the CLI exits with status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sectioned key = value text. "[a.b]" prefixes the keys that follow it, so
//   [model.kernel]
//   H = 0.35
// sets "model.kernel.H". Lines starting with '#' or ';' are comments. Keys outside the
// schema are rejected, as are duplicates.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  // The one-argument forms throw ConfigError naming the key when it is absent.
  std::string str(const std::string& key) const;
  std::string str(const std::string& key, const std::string& def) const;
  double num(const std::string& key) const;
  double num(const std::string& key, double def) const;
  std::size_t count(const std::string& key, std::size_t def) const;
  std::uint64_t u64(const std::string& key, std::uint64_t def) const;
  bool flag(const std::string& key, bool def) const;
  std::vector<double> list(const std::string& key, const std::vector<double>& def) const;

  // Every key read so far, explicit or defaulted.
  const std::map<std::string, std::string>& resolved() const { return resolved_; }
  const std::map<std::string, std::string>& explicit_values() const { return values_; }
  // The resolved keys in the grammar above; parse(render()) reproduces them.
  std::string render() const;

 private:
  std::string raw(const std::string& key) const;
  std::string note(const std::string& key, std::string value) const;

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> resolved_;
};

bool known_key(const std::string& key);
std::vector<std::string> known_keys();

}  // namespace volterra::cli
