#pragma once

// Sample-analog estimators: potential-treatment moments, complier and
// compliance-type probabilities, type-specific expected utility, and
// regime contrasts for full compliers (pooled or within discrete strata).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "latre/errors.hpp"
#include "latre/model.hpp"
#include "latre/propensity.hpp"
#include "latre/rng.hpp"
#include "latre/stats.hpp"
#include "latre/weights.hpp"

namespace latre {

struct EstimateOptions {
  double p_min = 0.01;     // floor for probability denominators
  bool normalize = false;  // Hajek-style normalization within regime cells
};

struct BootstrapInterval {
  double level = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t resamples = 0;
  std::size_t failed = 0;  // resamples whose estimator threw
};

struct EstimateReport {
  std::string method;
  double effect = 0.0;
  double numerator = 0.0;
  double complier_prob = 0.0;
  bool complier_prob_in_unit_interval = true;
  Regime regime_a;
  Regime regime_b;
  ComplianceType ctype;
  std::size_t n_used = 0;
  KappaDiagnostics kappa_diag;
  std::optional<BootstrapInterval> bootstrap;
  std::vector<std::string> warnings;
};

namespace detail {

inline void check_values(std::span<const int> values, std::size_t T) {
  if (values.size() != T + 1) throw PreconditionError("value tuple must have T+1 entries");
  for (int v : values)
    if (v != 0 && v != 1) throw PreconditionError("value tuple entries must be 0 or 1");
}

inline void check_model(const PanelDataset& d, const PropensityModel& m) {
  if (m.periods() != d.horizon() + 1) {
    throw PreconditionError("propensity model covers " + std::to_string(m.periods()) +
                            " periods, dataset has " + std::to_string(d.horizon() + 1));
  }
}

// Joint instrument probability of the pattern Z = a over all periods.
inline double regime_joint(const PathMarginals& marg, const Regime& a) {
  double p = 1.0;
  for (std::size_t t = 0; t < a.assignments.size(); ++t)
    p *= marg.p[t][static_cast<std::size_t>(a.assignments[t])];
  return p;
}

// Alternating-signed complier block over `periods`:
// sum over tuples of prod (-1)^{1-i_j} 1{Z_j = i_j} / P(Z_j = i_j | .).
inline double complier_block(const PathView& p, std::span<const std::size_t> periods,
                             const PathMarginals& marg) {
  const std::size_t s = periods.size();
  double total = 0.0;
  for (std::uint64_t vals = 0; vals < (std::uint64_t{1} << s); ++vals) {
    double term = 1.0;
    for (std::size_t k = 0; k < s && term != 0.0; ++k) {
      const int i = static_cast<int>((vals >> k) & 1u);
      const std::size_t j = periods[k];
      if (p.z(j) != i) {
        term = 0.0;
        break;
      }
      term *= (i == 1 ? 1.0 : -1.0) / marg.p[j][static_cast<std::size_t>(i)];
    }
    total += term;
  }
  return total;
}

}  // namespace detail

// Sample mean of prod_j W_j * prod_j 1{Z_j = i_j} / P(Z_j = i_j | .);
// estimates E[prod_j W_j(i_j)].
inline double potential_treatment_moment(const PanelDataset& d, const PropensityModel& m,
                                         std::span<const int> values, ClipTally* tally = nullptr) {
  detail::check_model(d, m);
  detail::check_values(values, d.horizon());
  CompensatedSum sum;
  for (std::size_t r = 0; r < d.size(); ++r) {
    const PathView p = d.path(r);
    double term = 1.0;
    for (std::size_t j = 0; j <= d.horizon() && term != 0.0; ++j) {
      if (p.w(j) == 0 || p.z(j) != values[j]) term = 0.0;
    }
    if (term == 0.0) continue;
    for (std::size_t j = 0; j <= d.horizon(); ++j) term /= marginal_prob(m, p, j, values[j], tally);
    sum.add(term);
  }
  return sum.value() / static_cast<double>(d.size());
}

// P(W_j(1) > W_j(0) for all j): one sample mean of
// prod_j W_j * sum_{tuples} prod_j (-1)^{1-i_j} 1{Z_j = i_j} / P(Z_j = i_j | .).
inline double complier_probability(const PanelDataset& d, const PropensityModel& m,
                                   ClipTally* tally = nullptr) {
  detail::check_model(d, m);
  const auto periods = detail::all_periods(d.horizon());
  CompensatedSum sum;
  for (std::size_t r = 0; r < d.size(); ++r) {
    const PathView p = d.path(r);
    bool treated = true;
    for (std::size_t j = 0; j <= d.horizon(); ++j) treated = treated && p.w(j) == 1;
    if (!treated) continue;
    const detail::PathMarginals marg(m, p, tally);
    sum.add(detail::complier_block(p, periods, marg));
  }
  return sum.value() / static_cast<double>(d.size());
}

// Product over periods of per-period complier probabilities
// E[W_j 1{Z_j=1}/P(Z_j=1|.)] - E[W_j 1{Z_j=0}/P(Z_j=0|.)]. Relies on
// independence of compliance across periods; kept as a cross-check.
inline double complier_probability_product(const PanelDataset& d, const PropensityModel& m) {
  detail::check_model(d, m);
  double prod = 1.0;
  for (std::size_t j = 0; j <= d.horizon(); ++j) {
    CompensatedSum s;
    for (std::size_t r = 0; r < d.size(); ++r) {
      const PathView p = d.path(r);
      if (p.w(j) == 0) continue;
      const int z = p.z(j);
      s.add((z == 1 ? 1.0 : -1.0) / marginal_prob(m, p, j, z));
    }
    prod *= s.value() / static_cast<double>(d.size());
  }
  return prod;
}

// P(T_c, T_n^0, T_n^1): sample mean of
//   prod_{T_c u T_n^1} W_j prod_{T_n^0} (1 - W_j) * [complier block over T_c]
//   * prod_{T_n^0} 1{Z_j=1}/P(Z_j=1|.) * prod_{T_n^1} 1{Z_j=0}/P(Z_j=0|.).
inline double compliance_type_probability(const PanelDataset& d, const PropensityModel& m,
                                          const ComplianceType& ctype, ClipTally* tally = nullptr) {
  detail::check_model(d, m);
  if (!ctype.is_partition_of(d.horizon())) {
    throw PreconditionError("compliance type " + ctype.str() + " is not a partition of the periods");
  }
  CompensatedSum sum;
  for (std::size_t r = 0; r < d.size(); ++r) {
    const PathView p = d.path(r);
    bool live = true;
    for (std::size_t j : ctype.tc) live = live && p.w(j) == 1;
    for (std::size_t j : ctype.tn1) live = live && p.w(j) == 1 && p.z(j) == 0;
    for (std::size_t j : ctype.tn0) live = live && p.w(j) == 0 && p.z(j) == 1;
    if (!live) continue;
    const detail::PathMarginals marg(m, p, tally);
    double term = detail::complier_block(p, ctype.tc, marg);
    for (std::size_t j : ctype.tn0) term /= marg.p[j][1];
    for (std::size_t j : ctype.tn1) term /= marg.p[j][0];
    sum.add(term);
  }
  return sum.value() / static_cast<double>(d.size());
}

// E[u | compliance type] = mean(kappa_type * u) / P(type).
inline double expected_utility_by_type(const PanelDataset& d, const PropensityModel& m,
                                       const UtilityFunctional& u, const ComplianceType& ctype,
                                       const EstimateOptions& opt = {}) {
  const double prob = compliance_type_probability(d, m, ctype);
  if (!(prob > opt.p_min)) {
    throw DegenerateDenominator("compliance type probability " + std::to_string(prob) +
                                    " is at or below p_min for " + ctype.str(),
                                prob);
  }
  CompensatedSum sum;
  for (std::size_t r = 0; r < d.size(); ++r) {
    const PathView p = d.path(r);
    const double k = kappa_type(p, ctype, m);
    if (k != 0.0) sum.add(k * evaluate_utility(u, p));
  }
  return sum.value() / static_cast<double>(d.size()) / prob;
}

// Full-complier contrast between regimes a and b:
//   mean(kappa u (1{W=a}/P(Z=a|.) - 1{W=b}/P(Z=b|.))) / P(full complier).
// With opt.normalize each regime cell is instead divided by its own mean
// weight mean(kappa 1{W=a}/P(Z=a|.)), and the complier probability is only
// reported.
inline EstimateReport latre_contrast(const PanelDataset& d, const PropensityModel& m,
                                     const UtilityFunctional& u, const Regime& a, const Regime& b,
                                     const EstimateOptions& opt = {}) {
  detail::check_model(d, m);
  const std::size_t T = d.horizon();
  a.check(T);
  b.check(T);
  if (a == b) throw PreconditionError("regime contrast needs two different regimes");

  EstimateReport rep;
  rep.method = "latre";
  rep.regime_a = a;
  rep.regime_b = b;
  rep.ctype = ComplianceType::full(T);
  rep.n_used = d.size();

  const auto periods = detail::all_periods(T);
  ClipTally tally;
  CompensatedSum num, cp, ua, ub, wa, wb;
  std::size_t cell_a = 0, cell_b = 0;
  for (std::size_t r = 0; r < d.size(); ++r) {
    const PathView p = d.path(r);
    const detail::PathMarginals marg(m, p, &tally);
    const double kappa = detail::kappa_bracket(p, periods, marg);
    rep.kappa_diag.add(kappa);

    bool treated = true;
    for (std::size_t j = 0; j <= T; ++j) treated = treated && p.w(j) == 1;
    if (treated) cp.add(detail::complier_block(p, periods, marg));

    const bool in_a = a.followed_by(p);
    const bool in_b = b.followed_by(p);
    if (!in_a && !in_b) continue;
    const double util = evaluate_utility(u, p);
    if (in_a) {
      ++cell_a;
      const double wgt = kappa / detail::regime_joint(marg, a);
      num.add(wgt * util);
      ua.add(wgt * util);
      wa.add(wgt);
    }
    if (in_b) {
      ++cell_b;
      const double wgt = kappa / detail::regime_joint(marg, b);
      num.add(-wgt * util);
      ub.add(wgt * util);
      wb.add(wgt);
    }
  }
  rep.kappa_diag.clipped = tally.count;
  if (cell_a == 0) rep.warnings.push_back("EmptyRegimeCell: no path follows regime " + a.str());
  if (cell_b == 0) rep.warnings.push_back("EmptyRegimeCell: no path follows regime " + b.str());

  const double dn = static_cast<double>(d.size());
  rep.numerator = num.value() / dn;
  rep.complier_prob = cp.value() / dn;
  rep.complier_prob_in_unit_interval = rep.complier_prob >= 0.0 && rep.complier_prob <= 1.0;
  if (!rep.complier_prob_in_unit_interval) {
    rep.warnings.push_back("complier probability estimate outside [0,1]");
  }
  if (opt.normalize) {
    if (!(std::abs(wa.value()) > 0.0) || !(std::abs(wb.value()) > 0.0)) {
      throw DegenerateDenominator("normalized contrast has a zero weight total in a regime cell", 0.0);
    }
    rep.effect = ua.value() / wa.value() - ub.value() / wb.value();
  } else {
    if (!(rep.complier_prob > opt.p_min)) {
      throw DegenerateDenominator("complier probability " + std::to_string(rep.complier_prob) +
                                      " is at or below p_min",
                                  rep.complier_prob);
    }
    rep.effect = rep.numerator / rep.complier_prob;
  }
  return rep;
}

struct StratumResult {
  std::size_t n = 0;
  std::optional<EstimateReport> report;
  std::optional<std::string> error;  // DegenerateDenominator message
};

inline constexpr std::size_t kMaxStrata = 50;
inline constexpr std::size_t kMinStratumSize = 10;

// latre_contrast within each distinct value of X_0[column].
inline std::map<double, StratumResult> conditional_latre_by_stratum(
    const PanelDataset& d, const PropensityModel& m, const UtilityFunctional& u, const Regime& a,
    const Regime& b, std::size_t column, const EstimateOptions& opt = {}) {
  if (column >= d.dim(0)) throw PreconditionError("stratum column out of range for X_0");
  std::map<double, std::vector<std::size_t>> rows;
  for (std::size_t r = 0; r < d.size(); ++r) {
    rows[d.x(r, 0)[column]].push_back(r);
    if (rows.size() > kMaxStrata) {
      throw PreconditionError("stratum column has more than " + std::to_string(kMaxStrata) +
                              " distinct values");
    }
  }
  std::map<double, StratumResult> out;
  for (const auto& [value, idx] : rows) {
    StratumResult res;
    res.n = idx.size();
    if (idx.size() < kMinStratumSize) {
      res.error = "DegenerateDenominator: stratum has " + std::to_string(idx.size()) +
                  " observations (< " + std::to_string(kMinStratumSize) + ")";
    } else {
      try {
        res.report = latre_contrast(d.gather(idx), m, u, a, b, opt);
      } catch (const DegenerateDenominator& e) {
        res.error = std::string("DegenerateDenominator: ") + e.what();
      }
    }
    out.emplace(value, std::move(res));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap

using DatasetEstimator = std::function<double(const PanelDataset&)>;

// Percentile interval from B resamples of whole paths. Resample b draws its
// indices from stream b of `seed`, so results do not depend on `workers`.
inline BootstrapInterval bootstrap_interval(const DatasetEstimator& estimator, const PanelDataset& d,
                                            std::size_t B, double level, std::uint64_t seed,
                                            std::size_t workers = 1) {
  if (B < 100) throw PreconditionError("bootstrap needs B >= 100");
  if (!(level > 0.0 && level < 1.0)) throw PreconditionError("bootstrap level must lie in (0,1)");
  std::vector<std::optional<double>> est(B);
  auto run = [&](std::size_t first, std::size_t stride) {
    std::vector<std::size_t> idx(d.size());
    for (std::size_t b = first; b < B; b += stride) {
      CounterRng rng(seed, b);
      for (auto& i : idx) i = static_cast<std::size_t>(rng.below(d.size()));
      try {
        est[b] = estimator(d.gather(idx));
      } catch (const DegenerateDenominator&) {
        est[b] = std::nullopt;
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, B));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
  }
  BootstrapInterval out;
  out.level = level;
  out.resamples = B;
  std::vector<double> ok;
  for (const auto& e : est) {
    if (e) ok.push_back(*e);
    else ++out.failed;
  }
  if (ok.empty()) throw DegenerateDenominator("every bootstrap resample was degenerate", 0.0);
  const double alpha = 1.0 - level;
  out.lower = quantile_of(ok, alpha / 2.0);
  out.upper = quantile_of(ok, 1.0 - alpha / 2.0);
  return out;
}

}  // namespace latre
