#pragma once

// Run configuration: a flat `key = value` text format with `[section]`
// headers, parsed without external dependencies, plus the typed RunConfig
// every subcommand consumes.  Diagnostics always cite the origin, line, and
// key; keys the loader does not recognize are an error, so typos cannot
// silently fall back to defaults.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shvi/fields.hpp"
#include "shvi/friction.hpp"
#include "shvi/mesh.hpp"

namespace shvi {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace config_detail

/// Parsed key/value store.  Keys are addressed as "section.key" ("key" alone
/// for entries before any section header).  Getters mark entries as consumed
/// so unknown keys can be rejected after loading.
class Config {
 public:
  void parse(std::istream& is, const std::string& origin) {
    origin_ = origin;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::string t = config_detail::trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header '" +
                            t + "'");
        section = config_detail::trim(t.substr(1, t.size() - 2));
        if (section.empty())
          throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
        continue;
      }
      std::size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected 'key = value', got '" + t + "'");
      std::string key = config_detail::trim(t.substr(0, eq));
      std::string value = config_detail::trim(t.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      std::string full = section.empty() ? key : section + "." + key;
      auto [it, fresh] = entries_.try_emplace(full, Entry{value, lineno});
      if (!fresh)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + full +
                          "' (first set at line " + std::to_string(it->second.line) + ")");
    }
  }

  static Config from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    Config c;
    c.parse(is, path);
    return c;
  }

  static Config from_string(const std::string& text, const std::string& origin = "<string>") {
    std::istringstream is(text);
    Config c;
    c.parse(is, origin);
    return c;
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get_string(const std::string& key) const {
    const Entry& e = lookup(key);
    e.used = true;
    return e.value;
  }
  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) const { return parse_double(key, get_string(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long get_long(const std::string& key) const {
    const std::string v = get_string(key);
    long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
      throw ConfigError(where(key) + ": '" + v + "' is not an integer");
    return out;
  }
  long get_long(const std::string& key, long fallback) const {
    return has(key) ? get_long(key) : fallback;
  }

  bool get_bool(const std::string& key) const {
    std::string v = get_string(key);
    for (char& c : v) c = char(std::tolower(static_cast<unsigned char>(c)));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(where(key) + ": '" + get_string(key) + "' is not a boolean");
  }
  bool get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
  }

  /// Whitespace-separated list of numbers; an absent key yields the fallback.
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback = {}) const {
    if (!has(key)) return fallback;
    std::istringstream is(get_string(key));
    std::vector<double> out;
    std::string tok;
    while (is >> tok) out.push_back(parse_double(key, tok));
    return out;
  }

  std::vector<long> get_longs(const std::string& key, const std::vector<long>& fallback = {}) const {
    if (!has(key)) return fallback;
    std::istringstream is(get_string(key));
    std::vector<long> out;
    std::string tok;
    while (is >> tok) {
      long v = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size())
        throw ConfigError(where(key) + ": '" + tok + "' is not an integer");
      out.push_back(v);
    }
    return out;
  }

  /// Keys never fetched by any getter, in file order of appearance.
  std::vector<std::string> unused_keys() const {
    std::vector<std::pair<int, std::string>> rows;
    for (const auto& [k, e] : entries_)
      if (!e.used) rows.emplace_back(e.line, k);
    std::sort(rows.begin(), rows.end());
    std::vector<std::string> out;
    for (auto& [line, k] : rows) out.push_back(k + " (line " + std::to_string(line) + ")");
    return out;
  }

  const std::string& origin() const { return origin_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };

  const Entry& lookup(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(origin_ + ": missing required key '" + key + "'");
    return it->second;
  }

  std::string where(const std::string& key) const {
    auto it = entries_.find(key);
    int line = it == entries_.end() ? 0 : it->second.line;
    return origin_ + ":" + std::to_string(line) + ": key '" + key + "'";
  }

  double parse_double(const std::string& key, const std::string& v) const {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
      throw ConfigError(where(key) + ": '" + v + "' is not a number");
    return out;
  }

  std::string origin_ = "<none>";
  std::map<std::string, Entry> entries_;
};

/// Friction-law registry resolving config selectors.  Names and parameters:
///   zero                       -> frictionless
///   quadratic kappa            -> psi = kappa/2 s^2
///   saturating kappa           -> psi = kappa/2 ln(1+s^2)
///   slip_weakening mu1 mu2 s0  -> threshold decaying mu1 -> mu2 over slip s0
inline FrictionLaw make_law(const std::string& name, const std::vector<double>& params) {
  auto want = [&](std::size_t n) {
    if (params.size() != n)
      throw std::invalid_argument("law '" + name + "' expects " + std::to_string(n) +
                                  " parameter(s), got " + std::to_string(params.size()));
  };
  if (name == "zero") {
    want(0);
    return zero_law();
  }
  if (name == "quadratic") {
    want(1);
    return quadratic_law(params[0]);
  }
  if (name == "saturating") {
    want(1);
    return saturating_law(params[0]);
  }
  if (name == "slip_weakening") {
    want(3);
    return slip_weakening_law(params[0], params[1], params[2]);
  }
  throw std::invalid_argument("unknown law '" + name +
                              "'; known: zero, quadratic, saturating, slip_weakening");
}

struct StudyConfig {
  std::string kind;  // convergence | lipschitz | energy; empty if unset
  std::vector<int> steps_list{8, 16, 32, 64, 128};  // energy family
  int halvings = 4;                                 // convergence
  double ratio_bound = 0.75;
  int n_pairs = 20;  // lipschitz perturbation pairs
  double spread_tol = 0.10;
  std::string u0b_name, fb_name;  // second dataset; empty = reuse primary
  std::vector<double> u0b_params, fb_params;
};

struct ValidateConfig {
  long n_samples = 100000;
  double radius = 10.0;
  // Optional claimed constants to certify instead of the law's own; lets the
  // validator act as a negative control (a too-small claimed alpha must fail).
  bool has_alpha_claim = false, has_c0_claim = false;
  double alpha_claim = 0.0, c0_claim = 0.0;
};

struct RunConfig {
  // geometry
  double lx = 1.0, ly = 1.0;
  int nx = 0, ny = 0;
  BoundarySpec boundary;
  // physics
  double mu = 0.0;
  std::string law_name;
  std::vector<double> law_params;
  std::string u0_name = "zero";
  std::vector<double> u0_params;
  std::string f_name = "zero";
  std::vector<double> f_params;
  // time
  double t_final = 0.0;
  int n_steps = 0;
  // solver
  double tol = 1e-10;
  long max_iter = 200;
  double relaxation = 1.0;
  std::uint64_t seed = 0;
  // outputs
  std::string out_dir = "out";
  int vtk_stride = 0;  // 0 = no field snapshots
  bool write_trajectory = true;
  bool write_stats = true;

  StudyConfig study;
  ValidateConfig validate;

  double k() const { return t_final / double(n_steps); }
  FrictionLaw law() const { return make_law(law_name, law_params); }
  SpaceTimeField u0_field() const { return make_field(u0_name, u0_params); }
  SpaceTimeField f_field() const { return make_field(f_name, f_params); }
};

namespace config_detail {

inline BoundaryTag parse_tag(const Config& c, const std::string& key, const std::string& fallback) {
  std::string v = c.get_string(key, fallback);
  if (v == "dirichlet") return BoundaryTag::dirichlet;
  if (v == "slip") return BoundaryTag::slip;
  throw ConfigError("key '" + key + "': '" + v + "' is not a boundary tag (dirichlet | slip)");
}

inline void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace config_detail

/// Typed, validated load.  Resolves every selector eagerly (unknown fields or
/// laws fail here, not mid-run) and rejects keys it does not recognize.
inline RunConfig load_run_config(const Config& c) {
  using config_detail::check;
  RunConfig r;

  r.lx = c.get_double("geometry.lx", 1.0);
  r.ly = c.get_double("geometry.ly", 1.0);
  r.nx = int(c.get_long("geometry.nx"));
  r.ny = int(c.get_long("geometry.ny"));
  r.boundary.left = config_detail::parse_tag(c, "geometry.left", "dirichlet");
  r.boundary.right = config_detail::parse_tag(c, "geometry.right", "dirichlet");
  r.boundary.bottom = config_detail::parse_tag(c, "geometry.bottom", "dirichlet");
  r.boundary.top = config_detail::parse_tag(c, "geometry.top", "slip");
  check(r.lx > 0.0 && r.ly > 0.0, "geometry.lx/ly must be positive");
  check(r.nx >= 1 && r.ny >= 1, "geometry.nx/ny must be >= 1");

  r.mu = c.get_double("physics.mu");
  check(r.mu > 0.0, "physics.mu must be positive");
  r.law_name = c.get_string("physics.law");
  r.law_params = c.get_doubles("physics.law_params");
  r.u0_name = c.get_string("physics.u0", "zero");
  r.u0_params = c.get_doubles("physics.u0_params");
  r.f_name = c.get_string("physics.f", "zero");
  r.f_params = c.get_doubles("physics.f_params");

  r.t_final = c.get_double("time.t_final");
  check(r.t_final > 0.0, "time.t_final must be positive");
  r.n_steps = int(c.get_long("time.n_steps"));
  check(r.n_steps >= 1, "time.n_steps must be >= 1");

  r.tol = c.get_double("solver.tol", 1e-10);
  check(r.tol > 0.0, "solver.tol must be positive");
  r.max_iter = c.get_long("solver.max_iter", 200);
  check(r.max_iter >= 1, "solver.max_iter must be >= 1");
  r.relaxation = c.get_double("solver.relaxation", 1.0);
  check(r.relaxation == 1.0,
        "solver.relaxation: only unit relaxation is supported (the condensed slip "
        "model is exact, so the outer fixed point needs no damping); the key is "
        "reserved");
  long seed = c.get_long("solver.seed", 0);
  check(seed >= 0, "solver.seed must be >= 0");
  r.seed = std::uint64_t(seed);

  r.out_dir = c.get_string("outputs.directory", "out");
  r.vtk_stride = int(c.get_long("outputs.vtk_stride", 0));
  check(r.vtk_stride >= 0, "outputs.vtk_stride must be >= 0");
  r.write_trajectory = c.get_bool("outputs.write_trajectory", true);
  r.write_stats = c.get_bool("outputs.write_stats", true);

  r.study.kind = c.get_string("study.kind", "");
  std::vector<long> steps =
      c.get_longs("study.steps_list", {8, 16, 32, 64, 128});
  r.study.steps_list.clear();
  for (long n : steps) {
    check(n >= 1, "study.steps_list entries must be >= 1");
    r.study.steps_list.push_back(int(n));
  }
  check(!r.study.steps_list.empty(), "study.steps_list must not be empty");
  r.study.halvings = int(c.get_long("study.halvings", 4));
  check(r.study.halvings >= 2, "study.halvings must be >= 2");
  r.study.ratio_bound = c.get_double("study.ratio_bound", 0.75);
  check(r.study.ratio_bound > 0.0, "study.ratio_bound must be positive");
  r.study.n_pairs = int(c.get_long("study.n_pairs", 20));
  check(r.study.n_pairs >= 0, "study.n_pairs must be >= 0");
  r.study.spread_tol = c.get_double("study.spread_tol", 0.10);
  check(r.study.spread_tol > 0.0, "study.spread_tol must be positive");
  r.study.u0b_name = c.get_string("study.u0_b", "");
  r.study.u0b_params = c.get_doubles("study.u0_b_params");
  r.study.fb_name = c.get_string("study.f_b", "");
  r.study.fb_params = c.get_doubles("study.f_b_params");

  r.validate.n_samples = c.get_long("validate.n_samples", 100000);
  check(r.validate.n_samples >= 1, "validate.n_samples must be >= 1");
  r.validate.radius = c.get_double("validate.radius", 10.0);
  check(r.validate.radius > 0.0, "validate.radius must be positive");
  r.validate.has_alpha_claim = c.has("validate.alpha_claim");
  r.validate.alpha_claim = c.get_double("validate.alpha_claim", 0.0);
  r.validate.has_c0_claim = c.has("validate.c0_claim");
  r.validate.c0_claim = c.get_double("validate.c0_claim", 0.0);

  // Selectors must resolve now, with the failing key named.
  auto resolve = [](const std::string& what, auto&& fn) {
    try {
      (void)fn();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("key '" + what + "': " + e.what());
    }
  };
  resolve("physics.law", [&] { return r.law(); });
  resolve("physics.u0", [&] { return r.u0_field(); });
  resolve("physics.f", [&] { return r.f_field(); });
  if (!r.study.u0b_name.empty())
    resolve("study.u0_b", [&] { return make_field(r.study.u0b_name, r.study.u0b_params); });
  if (!r.study.fb_name.empty())
    resolve("study.f_b", [&] { return make_field(r.study.fb_name, r.study.fb_params); });

  std::vector<std::string> stray = c.unused_keys();
  if (!stray.empty()) {
    std::string msg = c.origin() + ": unrecognized key(s):";
    for (const std::string& s : stray) msg += " " + s + ";";
    throw ConfigError(msg);
  }
  return r;
}

}  // namespace shvi
