#pragma once

// Comparison estimators that ignore the instruments.

#include <cstddef>
#include <string>

#include "latre/errors.hpp"
#include "latre/model.hpp"
#include "latre/propensity.hpp"
#include "latre/stats.hpp"

namespace latre {

// Difference of mean utility between paths whose treatments follow a and b.
inline double naive_contrast(const PanelDataset& d, const UtilityFunctional& u, const Regime& a,
                             const Regime& b) {
  a.check(d.horizon());
  b.check(d.horizon());
  MeanAccumulator ma, mb;
  for (std::size_t r = 0; r < d.size(); ++r) {
    const PathView p = d.path(r);
    if (a.followed_by(p)) ma.add(evaluate_utility(u, p));
    else if (b.followed_by(p)) mb.add(evaluate_utility(u, p));
  }
  if (ma.count() == 0) throw EmptyRegimeCell("no path follows regime " + a.str());
  if (mb.count() == 0) throw EmptyRegimeCell("no path follows regime " + b.str());
  return ma.mean() - mb.mean();
}

// Sequential IPW contrast that treats W as sequentially randomized given the
// observed history:
//   mean(u prod_j 1{W_j=a_j}/P(W_j=a_j|.)) - same for b.
// `treatment_model` supplies P(W_j = 1 | history) through the propensity
// interface.
inline double noiv_contrast(const PanelDataset& d, const PropensityModel& treatment_model,
                            const UtilityFunctional& u, const Regime& a, const Regime& b) {
  const std::size_t T = d.horizon();
  a.check(T);
  b.check(T);
  if (treatment_model.periods() != T + 1) {
    throw PreconditionError("treatment model must cover every period");
  }
  CompensatedSum sa, sb;
  std::size_t na = 0, nb = 0;
  for (std::size_t r = 0; r < d.size(); ++r) {
    const PathView p = d.path(r);
    const Regime* cell = a.followed_by(p) ? &a : b.followed_by(p) ? &b : nullptr;
    if (!cell) continue;
    double wgt = evaluate_utility(u, p);
    for (std::size_t j = 0; j <= T; ++j) wgt /= marginal_prob(treatment_model, p, j, cell->assignments[j]);
    if (cell == &a) {
      sa.add(wgt);
      ++na;
    } else {
      sb.add(wgt);
      ++nb;
    }
  }
  if (na == 0) throw EmptyRegimeCell("no path follows regime " + a.str());
  if (nb == 0) throw EmptyRegimeCell("no path follows regime " + b.str());
  const double dn = static_cast<double>(d.size());
  return sa.value() / dn - sb.value() / dn;
}

// Fits logistic treatment propensities (label W_j) and evaluates
// noiv_contrast with them.
inline double noiv_contrast(const PanelDataset& d, const UtilityFunctional& u, const Regime& a,
                            const Regime& b, const FeatureSpec& spec = {},
                            const LogisticOptions& opt = {}, double clip = kDefaultClip) {
  const auto model = fit_propensity_model(d, FitTarget::treatment, spec, opt, clip);
  return noiv_contrast(d, model, u, a, b);
}

}  // namespace latre
