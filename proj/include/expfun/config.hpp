#ifndef EXPFUN_CONFIG_HPP
#define EXPFUN_CONFIG_HPP

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "expfun/error.hpp"
#include "expfun/estimate.hpp"
#include "expfun/steps.hpp"
#include "expfun/tilt.hpp"

namespace expfun {

// Flat experiment config: "group.key = value" per line, '#' comments.
// Every key must be declared below; anything else is a config error.

struct KeySpec {
  const char* key;
  const char* default_value;
  bool hashed;  // mc.workers and out.* do not change results, so they stay out of the hash
};

inline const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> keys = {
      {"step.family", "lattice", true},  // lattice | gaussian | two_point | pareto
      {"step.spacing", "1", true},
      {"step.offsets", "-1,1", true},
      {"step.probs", "0.5,0.5", true},
      {"step.mu", "0", true},
      {"step.sigma", "1", true},
      {"step.up", "1", true},
      {"step.down", "-1", true},
      {"step.p_up", "0.5", true},
      {"step.beta", "3", true},
      {"step.scale", "1", true},
      {"step.shift", "-2", true},
      {"f.K0", "1", true},
      {"f.theta", "1", true},
      {"f.c0", "1", true},
      {"mc.seed", "1", true},
      {"mc.nsim", "10000", true},
      {"mc.workers", "1", false},
      {"mc.batch_size", "4096", true},
      {"regime.n0", "64", true},
      {"regime.rungs", "4", true},
      {"regime.start", "0", true},
      {"regime.tau_method", "auto", true},  // auto | plain | mixture
      {"regime.lambda", "auto", true},      // tilt override for estimate / constants
      {"regime.k_max", "4095", true},       // series length (C1, C3)
      {"regime.jumps", "8", true},          // jump window: C4, C5, big-jump sums
      {"regime.const_nsim", "0", true},     // 0: mc.nsim
      {"regime.eps_up", "1e-6", true},
      {"regime.flavor", "descending", true},
      {"regime.x_max", "32", true},
      {"regime.points", "64", true},
      {"regime.chains", "20000", true},
      {"regime.cap", "1048576", true},
      {"out.dir", "", false},  // empty: CSV to stdout only
      {"out.stdout", "true", false},
  };
  return keys;
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

class Config {
 public:
  Config() {
    for (const auto& k : config_schema()) values_[k.key] = k.default_value;
  }

  static Config parse(std::istream& in, const std::string& origin = "<config>") {
    Config c;
    std::string line;
    for (std::size_t no = 1; std::getline(in, line); ++no) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      require(eq != std::string::npos, ErrorKind::Config,
              origin + ":" + std::to_string(no) + ": expected key = value");
      c.set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    }
    return c;
  }

  static Config from_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Config, "cannot read config file " + path);
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) {
    require(values_.count(key) == 1, ErrorKind::Config, "unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// "key=value"
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos, ErrorKind::Config, "override '" + kv + "' is not key=value");
    set(trim(std::string_view(kv).substr(0, eq)), trim(std::string_view(kv).substr(eq + 1)));
  }

  const std::string& str(const std::string& key) const {
    const auto it = values_.find(key);
    require(it != values_.end(), ErrorKind::Config, "unknown config key '" + key + "'");
    return it->second;
  }

  double num(const std::string& key) const {
    const std::string& s = str(key);
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    require(r.ec == std::errc{} && r.ptr == s.data() + s.size(), ErrorKind::Config,
            "config key '" + key + "' expects a number, got '" + s + "'");
    return v;
  }

  std::uint64_t count(const std::string& key) const {
    const std::string& s = str(key);
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    require(r.ec == std::errc{} && r.ptr == s.data() + s.size(), ErrorKind::Config,
            "config key '" + key + "' expects a non-negative integer, got '" + s + "'");
    return v;
  }

  bool flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail(ErrorKind::Config, "config key '" + key + "' expects true/false, got '" + s + "'");
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      double v = 0.0;
      const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
      require(!t.empty() && r.ec == std::errc{} && r.ptr == t.data() + t.size(), ErrorKind::Config,
              "config key '" + key + "' expects a comma-separated list of numbers");
      out.push_back(v);
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  /// FNV-1a over every result-relevant key in schema order, as 16 hex digits.
  std::string hash() const {
    std::uint64_t h = fnv1a("");
    for (const auto& k : config_schema()) {
      if (!k.hashed) continue;
      h = fnv1a(k.key, h);
      h = fnv1a("=", h);
      h = fnv1a(values_.at(k.key), h);
      h = fnv1a("\n", h);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

 private:
  std::map<std::string, std::string> values_;
};

inline StepModel model_from_config(const Config& c) {
  const std::string& fam = c.str("step.family");
  if (fam == "lattice") {
    std::vector<int> offs;
    for (double o : c.list("step.offsets")) {
      require(o == std::floor(o), ErrorKind::Config, "step.offsets must be integers");
      offs.push_back(static_cast<int>(o));
    }
    return StepModel::lattice(c.num("step.spacing"), offs, c.list("step.probs"));
  }
  if (fam == "gaussian") return StepModel::gaussian(c.num("step.mu"), c.num("step.sigma"));
  if (fam == "two_point") return StepModel::two_point(c.num("step.up"), c.num("step.down"), c.num("step.p_up"));
  if (fam == "pareto") return StepModel::shifted_pareto(c.num("step.beta"), c.num("step.scale"), c.num("step.shift"));
  fail(ErrorKind::Config, "step.family must be lattice, gaussian, two_point or pareto (got '" + fam + "')");
}

inline FSpec f_from_config(const Config& c) { return FSpec::make(c.num("f.K0"), c.num("f.theta"), c.num("f.c0")); }

inline McOptions mc_from_config(const Config& c) {
  McOptions o;
  o.seed = c.count("mc.seed");
  o.workers = static_cast<unsigned>(c.count("mc.workers"));
  o.batch_size = c.count("mc.batch_size");
  require(o.workers >= 1, ErrorKind::Config, "mc.workers must be >= 1");
  require(o.batch_size >= 1, ErrorKind::Config, "mc.batch_size must be >= 1");
  return o;
}

/// n0 * 2^j, j = 0..rungs-1
inline std::vector<std::size_t> ladder_from_config(const Config& c) {
  const auto n0 = c.count("regime.n0");
  const auto rungs = c.count("regime.rungs");
  require(n0 >= 1 && rungs >= 1 && rungs <= 40, ErrorKind::Config, "regime.n0 >= 1 and 1 <= regime.rungs <= 40");
  std::vector<std::size_t> out;
  for (std::uint64_t j = 0; j < rungs; ++j) out.push_back(static_cast<std::size_t>(n0 << j));
  return out;
}

}  // namespace expfun

#endif  // EXPFUN_CONFIG_HPP
