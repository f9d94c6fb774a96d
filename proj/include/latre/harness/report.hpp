#pragma once

// JSON forms of estimate reports and replication results. Field order is
// fixed (ordered_json) so output is byte-stable for identical inputs.

#include <cmath>
#include <map>
#include <string>

#include <json.hpp>

#include "latre/harness/run.hpp"
#include "latre/identification.hpp"

namespace latre::harness {

using Json = nlohmann::ordered_json;

inline Json real_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const Regime& r) { return Json(r.assignments); }

inline Json to_json(const ComplianceType& c) {
  return Json{{"tc", c.tc}, {"tn0", c.tn0}, {"tn1", c.tn1}};
}

inline Json to_json(const EstimateReport& r) {
  Json j;
  j["method"] = r.method;
  j["effect"] = real_or_null(r.effect);
  j["numerator"] = real_or_null(r.numerator);
  j["complier_prob"] = real_or_null(r.complier_prob);
  j["complier_prob_in_unit_interval"] = r.complier_prob_in_unit_interval;
  j["regime_a"] = to_json(r.regime_a);
  j["regime_b"] = to_json(r.regime_b);
  j["ctype"] = to_json(r.ctype);
  j["n_used"] = r.n_used;
  if (r.kappa_diag.count > 0) {
    j["kappa_diag"] = Json{{"mean", r.kappa_diag.mean},
                           {"min", r.kappa_diag.min},
                           {"max", r.kappa_diag.max},
                           {"clipped", r.kappa_diag.clipped}};
  } else {
    j["kappa_diag"] = nullptr;
  }
  if (r.bootstrap) {
    j["bootstrap"] = Json{{"level", r.bootstrap->level},
                          {"lower", r.bootstrap->lower},
                          {"upper", r.bootstrap->upper},
                          {"B", r.bootstrap->resamples},
                          {"failed", r.bootstrap->failed}};
  } else {
    j["bootstrap"] = nullptr;
  }
  j["warnings"] = r.warnings;
  return j;
}

inline Json to_json(const std::map<double, StratumResult>& strata) {
  Json arr = Json::array();
  for (const auto& [value, s] : strata) {
    Json e;
    e["stratum"] = value;
    e["n"] = s.n;
    e["report"] = s.report ? to_json(*s.report) : Json(nullptr);
    e["error"] = s.error ? Json(*s.error) : Json(nullptr);
    arr.push_back(std::move(e));
  }
  return arr;
}

inline Json to_json(const SimConfig& c) {
  return Json{{"n", c.n},         {"xi", c.xi},       {"e1", c.e1},       {"alpha1", c.alpha1},
              {"alpha2", c.alpha2}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"delta", c.delta},
              {"gamma", c.gamma}};
}

inline Json to_json(const ErrorMetrics& e) {
  return Json{{"abs_mean_error", e.abs_mean_error},
              {"mean_abs_error", e.mean_abs_error},
              {"abs_median_error", e.abs_median_error},
              {"median_abs_error", e.median_abs_error}};
}

inline Json to_json(const ReplicationResult& r, bool include_timing = false) {
  Json j;
  j["tau"] = r.tau;
  j["R"] = r.settings.replications;
  j["master_seed"] = r.settings.master_seed;
  j["config"] = to_json(r.sim);
  Json methods;
  for (Method m : r.methods) {
    methods[method_name(m)] = Json{{"metrics", to_json(r.errors.at(m))}, {"estimates", r.estimates.at(m)}};
  }
  j["methods"] = std::move(methods);
  if (include_timing) j["wall_seconds"] = r.wall_seconds;
  return j;
}

}  // namespace latre::harness
