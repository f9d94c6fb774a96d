#pragma once

// Flat key = value configuration. '#' and ';' start comments, [section]
// lines are accepted and ignored, vectors are comma separated. Every error
// names the offending key.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "latre/errors.hpp"
#include "latre/harness/csv.hpp"
#include "latre/identification.hpp"
#include "latre/simgen.hpp"

namespace latre::harness {

class Config {
 public:
  static Config parse(std::istream& is) {
    Config c;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      std::string_view s = line;
      if (auto pos = s.find_first_of("#;"); pos != std::string_view::npos) s = s.substr(0, pos);
      s = csv::detail::trim(s);
      if (s.empty() || (s.front() == '[' && s.back() == ']')) continue;
      const auto eq = s.find('=');
      if (eq == std::string_view::npos) {
        throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
      }
      const std::string key(csv::detail::trim(s.substr(0, eq)));
      const std::string value(csv::detail::trim(s.substr(eq + 1)));
      if (key.empty()) throw InputError("config line " + std::to_string(line_no) + ": empty key");
      c.values_[key] = value;
    }
    return c;
  }

  static Config from_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    return parse(in);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  void reject_unknown(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : values_) {
      if (!allowed.count(k)) throw InputError("config key '" + k + "': unknown key");
    }
  }

  std::string text(const std::string& key, const std::string& def) const {
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }

  double real(const std::string& key, double def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    double v = 0.0;
    if (!csv::detail::parse_real(it->second, v)) bad(key, "expected a real number");
    return v;
  }

  std::uint64_t count(const std::string& key, std::uint64_t def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::uint64_t v = 0;
    const auto& s = it->second;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) bad(key, "expected a non-negative integer");
    return v;
  }

  bool flag(const std::string& key, bool def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const auto& s = it->second;
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    bad(key, "expected a boolean");
  }

  std::vector<double> reals(const std::string& key, const std::vector<double>& def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::vector<double> out;
    for (auto cell : csv::detail::split(it->second)) {
      double v = 0.0;
      if (!csv::detail::parse_real(cell, v)) bad(key, "expected comma-separated reals");
      out.push_back(v);
    }
    return out;
  }

  std::vector<int> bits(const std::string& key, const std::vector<int>& def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::vector<int> out;
    for (auto cell : csv::detail::split(it->second)) {
      int v = 0;
      if (!csv::detail::parse_int(cell, v) || (v != 0 && v != 1)) bad(key, "expected comma-separated 0/1 values");
      out.push_back(v);
    }
    return out;
  }

  std::vector<std::string> words(const std::string& key, const std::vector<std::string>& def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::vector<std::string> out;
    for (auto cell : csv::detail::split(it->second)) out.emplace_back(csv::detail::trim(cell));
    return out;
  }

  [[noreturn]] static void bad(const std::string& key, const std::string& why) {
    throw InputError("config key '" + key + "': " + why);
  }

 private:
  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Typed settings

inline const std::set<std::string>& sim_keys() {
  static const std::set<std::string> k{"n",     "xi",    "e1",    "alpha1", "alpha2",      "beta1",
                                       "beta2", "delta", "gamma", "seed",   "emit_latents"};
  return k;
}

inline SimConfig sim_config_from(const Config& c) {
  SimConfig s;
  s.n = c.count("n", s.n);
  s.xi = c.reals("xi", s.xi);
  s.e1 = c.real("e1", s.e1);
  s.alpha1 = c.reals("alpha1", s.alpha1);
  s.alpha2 = c.reals("alpha2", s.alpha2);
  s.beta1 = c.real("beta1", s.beta1);
  s.beta2 = c.real("beta2", s.beta2);
  s.delta = c.real("delta", s.delta);
  s.gamma = c.real("gamma", s.gamma);
  s.seed = c.count("seed", s.seed);
  s.emit_latents = c.flag("emit_latents", s.emit_latents);
  try {
    s.check();
  } catch (const InputError& e) {
    // SimConfig::check prefixes the field name; restate it as a config key.
    std::string msg = e.what();
    const auto colon = msg.find(':');
    throw InputError("config key '" + msg.substr(0, colon) + "'" + msg.substr(colon));
  }
  return s;
}

enum class Method { latre, naive, noiv };

inline Method method_from(const std::string& s) {
  if (s == "latre") return Method::latre;
  if (s == "naive") return Method::naive;
  if (s == "noiv") return Method::noiv;
  throw InputError("config key 'method': unknown method '" + s + "' (latre, naive, noiv)");
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::latre: return "latre";
    case Method::naive: return "naive";
    case Method::noiv: return "noiv";
  }
  return "latre";
}

struct EstimateSettings {
  Method method = Method::latre;
  Regime regime_a{{1, 0}};
  Regime regime_b{{0, 1}};
  UtilityFunctional utility = UtilityFunctional::final_outcome();
  std::string propensity = "oracle";  // oracle | fitted
  std::string oracle = "sim-dgp";     // sim-dgp | constant
  std::vector<double> oracle_p;       // for the constant oracle
  double clip = kDefaultClip;
  EstimateOptions options;
  std::size_t bootstrap = 0;
  double level = 0.95;
  std::uint64_t bootstrap_seed = 1;
  std::size_t workers = 1;
  std::optional<std::size_t> stratum_column;
};

inline const std::set<std::string>& estimate_keys() {
  static const std::set<std::string> k{"method", "regime_a", "regime_b", "utility",        "propensity",
                                       "oracle", "oracle_p", "clip",     "p_min",          "normalize",
                                       "bootstrap", "level", "bootstrap_seed", "workers", "stratum_column"};
  return k;
}

inline EstimateSettings estimate_settings_from(const Config& c) {
  EstimateSettings s;
  s.method = method_from(c.text("method", "latre"));
  s.regime_a.assignments = c.bits("regime_a", s.regime_a.assignments);
  s.regime_b.assignments = c.bits("regime_b", s.regime_b.assignments);
  const auto u = c.text("utility", "final_outcome");
  if (u == "final_outcome") s.utility = UtilityFunctional::final_outcome();
  else if (u == "sum_of_outcomes") s.utility = UtilityFunctional::sum_of_outcomes();
  else Config::bad("utility", "expected final_outcome or sum_of_outcomes");
  s.propensity = c.text("propensity", s.propensity);
  if (s.propensity != "oracle" && s.propensity != "fitted") Config::bad("propensity", "expected oracle or fitted");
  s.oracle = c.text("oracle", s.oracle);
  if (s.oracle != "sim-dgp" && s.oracle != "constant") Config::bad("oracle", "expected sim-dgp or constant");
  s.oracle_p = c.reals("oracle_p", {});
  for (double p : s.oracle_p)
    if (!(p > 0.0 && p < 1.0)) Config::bad("oracle_p", "probabilities must lie strictly between 0 and 1");
  s.clip = c.real("clip", s.clip);
  if (!(s.clip > 0.0 && s.clip < 0.5)) Config::bad("clip", "must lie in (0, 0.5)");
  s.options.p_min = c.real("p_min", s.options.p_min);
  s.options.normalize = c.flag("normalize", s.options.normalize);
  s.bootstrap = c.count("bootstrap", 0);
  if (s.bootstrap != 0 && s.bootstrap < 100) Config::bad("bootstrap", "needs B >= 100 (or 0 to disable)");
  s.level = c.real("level", s.level);
  if (!(s.level > 0.0 && s.level < 1.0)) Config::bad("level", "must lie in (0, 1)");
  s.bootstrap_seed = c.count("bootstrap_seed", s.bootstrap_seed);
  s.workers = c.count("workers", 1);
  if (s.workers == 0) Config::bad("workers", "must be at least 1");
  if (c.has("stratum_column")) s.stratum_column = c.count("stratum_column", 0);
  return s;
}

struct ReplicateSettings {
  std::size_t replications = 500;
  std::vector<Method> methods{Method::latre, Method::naive, Method::noiv};
  std::uint64_t master_seed = 20170101;
  std::size_t workers = 1;
  std::string per_rep_csv;
};

inline const std::set<std::string>& replicate_keys() {
  static const std::set<std::string> k{"R", "methods", "master_seed", "workers", "per_rep_csv"};
  return k;
}

inline ReplicateSettings replicate_settings_from(const Config& c) {
  ReplicateSettings s;
  s.replications = c.count("R", s.replications);
  if (s.replications == 0) Config::bad("R", "must be at least 1");
  if (c.has("methods")) {
    s.methods.clear();
    for (const auto& w : c.words("methods", {})) s.methods.push_back(method_from(w));
  }
  s.master_seed = c.count("master_seed", s.master_seed);
  s.workers = c.count("workers", s.workers);
  if (s.workers == 0) Config::bad("workers", "must be at least 1");
  s.per_rep_csv = c.text("per_rep_csv", "");
  return s;
}

inline std::set<std::string> all_keys() {
  std::set<std::string> k = sim_keys();
  k.insert(estimate_keys().begin(), estimate_keys().end());
  k.insert(replicate_keys().begin(), replicate_keys().end());
  return k;
}

}  // namespace latre::harness
