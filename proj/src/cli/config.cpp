#include "volterra/cli/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace volterra::cli {

namespace {

const std::set<std::string>& schema() {
  static const std::set<std::string> keys = {
      "model.preset", "model.kernel.kind", "model.kernel.H", "model.kernel.rate",
      "model.kernel.normalized", "model.weight.beta", "model.weight.decay", "model.x0",
      "model.coef.sigma", "model.coef.a", "model.coef.theta", "model.coef.s0", "model.coef.s1",
      "model.coef.rho", "model.coef.nu", "model.coef.kappa", "model.coef.v0",
      "grid.T", "grid.steps", "grid.space.first", "grid.space.ratio", "grid.space.step",
      "grid.space.x_max", "grid.lift.nodes", "grid.lift.x_max",
      "mc.paths", "mc.seed", "mc.antithetic", "mc.outer", "mc.inner", "mc.cap", "mc.closed_form",
      "task.command", "task.t", "task.delta", "task.deltas", "task.fd_steps", "task.payoff",
      "task.payoff.kind", "task.payoff.coord", "task.payoff.g", "task.strike", "task.y",
      "task.direction", "task.direction.curve", "task.direction.column", "task.eps",
      "task.nodes", "task.force", "task.checkpoints", "task.q", "task.p", "task.family",
      "task.g", "task.shift", "task.coord", "task.fresh_seed", "task.gronwall.instance",
      "task.gronwall.draws", "task.weight.ts", "task.x", "task.L", "task.stride",
      "output.dir", "output.binary", "output.csv"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || errno != 0 || end != v.c_str() + v.size())
    throw ConfigError("key \"" + key + "\": \"" + v + "\" is not a number");
  return x;
}

std::string format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool known_key(const std::string& key) { return schema().count(key) != 0; }

std::vector<std::string> known_keys() { return {schema().begin(), schema().end()}; }

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::istringstream in(text);
  std::string line, section;
  std::set<std::string> seen;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const std::string t = trim(line);
    const std::string where = origin + ":" + std::to_string(no) + ": ";
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string k = trim(t.substr(0, eq));
    if (k.empty()) throw ConfigError(where + "empty key");
    const std::string key = section.empty() ? k : section + "." + k;
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key \"" + key + "\"");
    try {
      c.set(key, trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file \"" + path + "\"");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void Config::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw ConfigError("unknown key \"" + key + "\"");
  values_[key] = value;
}

std::string Config::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required key \"" + key + "\"");
  return it->second;
}

std::string Config::note(const std::string& key, std::string value) const {
  resolved_[key] = value;
  return value;
}

std::string Config::str(const std::string& key) const { return note(key, raw(key)); }

std::string Config::str(const std::string& key, const std::string& def) const {
  return note(key, has(key) ? raw(key) : def);
}

double Config::num(const std::string& key) const {
  const std::string v = raw(key);
  const double x = to_double(key, v);
  note(key, v);
  return x;
}

double Config::num(const std::string& key, double def) const {
  if (!has(key)) {
    note(key, format(def));
    return def;
  }
  return num(key);
}

std::size_t Config::count(const std::string& key, std::size_t def) const {
  return static_cast<std::size_t>(u64(key, def));
}

std::uint64_t Config::u64(const std::string& key, std::uint64_t def) const {
  if (!has(key)) {
    note(key, std::to_string(def));
    return def;
  }
  const std::string v = raw(key);
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || errno != 0 || end != v.c_str() + v.size())
    throw ConfigError("key \"" + key + "\": \"" + v + "\" is not a nonnegative integer");
  note(key, v);
  return x;
}

bool Config::flag(const std::string& key, bool def) const {
  if (!has(key)) {
    note(key, def ? "true" : "false");
    return def;
  }
  const std::string v = raw(key);
  bool out;
  if (v == "true" || v == "1" || v == "yes" || v == "on") out = true;
  else if (v == "false" || v == "0" || v == "no" || v == "off") out = false;
  else throw ConfigError("key \"" + key + "\": \"" + v + "\" is not a boolean");
  note(key, v);
  return out;
}

std::vector<double> Config::list(const std::string& key, const std::vector<double>& def) const {
  if (!has(key)) {
    std::string s;
    for (std::size_t i = 0; i < def.size(); ++i) s += (i ? "," : "") + format(def[i]);
    note(key, s);
    return def;
  }
  const std::string v = raw(key);
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ConfigError("key \"" + key + "\": empty list");
  note(key, v);
  return out;
}

std::string Config::render() const {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [key, value] : resolved_) {
    const auto dot = key.rfind('.');
    sections[key.substr(0, dot)].emplace_back(key.substr(dot + 1), value);
  }
  std::string out;
  for (const auto& [name, entries] : sections) {
    out += "[" + name + "]\n";
    for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
    out += "\n";
  }
  return out;
}

}  // namespace volterra::cli
