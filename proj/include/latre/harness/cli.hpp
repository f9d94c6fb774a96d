#pragma once

// Subcommand bodies of the command-line tool. Each returns a process exit
// code: 0 ok, 2 input error, 3 degenerate estimate, 4 internal error.

#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

#include "latre/errors.hpp"
#include "latre/harness/config.hpp"
#include "latre/harness/csv.hpp"
#include "latre/harness/report.hpp"
#include "latre/harness/run.hpp"
#include "latre/model.hpp"
#include "latre/simgen.hpp"

namespace latre::harness {

enum ExitCode : int { kOk = 0, kInputError = 2, kDegenerate = 3, kInternal = 4 };

struct CliArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::string> method;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> bootstrap;
  std::optional<double> level;
  bool timing = false;
};

inline Config load_config(const CliArgs& a) {
  Config c = a.config.empty() ? Config{} : Config::from_file(a.config);
  c.reject_unknown(all_keys());
  return c;
}

// "run.csv" -> "run.latents.csv"
inline std::string latents_path_for(const std::string& out) {
  const auto dot = out.rfind('.');
  const auto slash = out.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return out + ".latents.csv";
  return out.substr(0, dot) + ".latents" + out.substr(dot);
}

inline void write_text_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open output file '" + path + "'");
  body(f);
  if (!f) throw InputError("failed writing '" + path + "'");
}

// Maps library exceptions onto exit codes. Degenerate estimates also print a
// structured error object on `out`.
inline int guarded(const std::function<int()>& body, std::ostream& out, std::ostream& err) {
  auto structured = [&](const std::string& kind, const std::string& msg) {
    out << Json{{"error", Json{{"kind", kind}, {"message", msg}}}}.dump(2) << '\n';
  };
  try {
    return body();
  } catch (const DegenerateDenominator& e) {
    structured("DegenerateDenominator", e.what());
    err << "error: " << e.what() << '\n';
    return kDegenerate;
  } catch (const EmptyRegimeCell& e) {
    structured("EmptyRegimeCell", e.what());
    err << "error: " << e.what() << '\n';
    return kDegenerate;
  } catch (const SeparationError& e) {
    structured("SeparationError", e.what());
    err << "error: " << e.what() << '\n';
    return kDegenerate;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

inline int cmd_simulate(const CliArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        Config c = load_config(a);
        if (a.seed) c.set("seed", std::to_string(*a.seed));
        const SimConfig sim = sim_config_from(c);
        const auto gen = generate(sim);
        if (a.out.empty()) {
          csv::write_dataset(out, gen.data);
        } else {
          write_text_file(a.out, [&](std::ostream& f) { csv::write_dataset(f, gen.data); });
        }
        if (gen.latents) {
          if (a.out.empty()) throw InputError("emit_latents needs --out to name the sibling file");
          write_text_file(latents_path_for(a.out), [&](std::ostream& f) { csv::write_latents(f, *gen.latents); });
        }
        return int{kOk};
      },
      out, err);
}

inline std::vector<std::string> describe_violations(const std::vector<Violation>& v, std::size_t limit = 20) {
  std::vector<std::string> lines;
  for (std::size_t k = 0; k < v.size() && k < limit; ++k) {
    std::string s;
    if (v[k].path) s += "row " + std::to_string(*v[k].path + 2) + " (path " + std::to_string(*v[k].path) + "): ";
    if (v[k].period) s += "period " + std::to_string(*v[k].period) + ": ";
    lines.push_back(s + v[k].rule);
  }
  if (v.size() > limit) lines.push_back("... " + std::to_string(v.size() - limit) + " more");
  return lines;
}

inline int cmd_validate(const CliArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        if (a.data.empty()) throw InputError("validate needs --data");
        const auto d = csv::read_dataset_file(a.data);
        const auto v = validate_dataset(d);
        Json j{{"n", d.size()}, {"horizon", d.horizon()}, {"violations", describe_violations(v, v.size())}};
        out << j.dump(2) << '\n';
        return v.empty() ? int{kOk} : int{kInputError};
      },
      out, err);
}

inline int cmd_estimate(const CliArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        if (a.data.empty()) throw InputError("estimate needs --data");
        Config c = load_config(a);
        if (a.method) c.set("method", *a.method);
        if (a.seed) c.set("bootstrap_seed", std::to_string(*a.seed));
        if (a.workers) c.set("workers", std::to_string(*a.workers));
        if (a.bootstrap) c.set("bootstrap", std::to_string(*a.bootstrap));
        if (a.level) c.set("level", csv::format_real(*a.level));
        const SimConfig sim = sim_config_from(c);
        const EstimateSettings s = estimate_settings_from(c);

        const auto d = csv::read_dataset_file(a.data);
        const auto v = validate_dataset(d);
        if (!v.empty()) {
          std::string msg = "data fails validation:";
          for (const auto& line : describe_violations(v)) msg += "\n  " + line;
          throw InputError(msg);
        }

        Json j;
        if (s.stratum_column && s.method == Method::latre) {
          const auto model = instrument_model_for(d, s, sim);
          j = Json{{"method", "latre"},
                   {"stratum_column", *s.stratum_column},
                   {"strata", to_json(conditional_latre_by_stratum(d, model, s.utility, s.regime_a, s.regime_b,
                                                                   *s.stratum_column, s.options))}};
        } else {
          j = to_json(estimate(d, s, sim));
        }
        const std::string text = j.dump(2) + "\n";
        if (a.out.empty()) out << text;
        else write_text_file(a.out, [&](std::ostream& f) { f << text; });
        return int{kOk};
      },
      out, err);
}

inline int cmd_replicate(const CliArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        Config c = load_config(a);
        if (a.seed) c.set("master_seed", std::to_string(*a.seed));
        if (a.workers) c.set("workers", std::to_string(*a.workers));
        if (a.method) c.set("methods", *a.method);
        const SimConfig sim = sim_config_from(c);
        const ReplicateSettings rs = replicate_settings_from(c);
        const EstimateSettings es = estimate_settings_from(c);
        const auto res = run_replication(sim, rs, es);
        const std::string text = to_json(res, a.timing).dump(2) + "\n";
        if (a.out.empty()) {
          out << text;
          err << format_table(res);
        } else {
          write_text_file(a.out, [&](std::ostream& f) { f << text; });
          out << format_table(res);
        }
        if (!rs.per_rep_csv.empty()) {
          write_text_file(rs.per_rep_csv, [&](std::ostream& f) { write_replication_csv(f, res); });
        }
        err << "replicate: " << rs.replications << " replications in " << res.wall_seconds << " s\n";
        return int{kOk};
      },
      out, err);
}

}  // namespace latre::harness
