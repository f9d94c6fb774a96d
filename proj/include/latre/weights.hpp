#pragma once

// Kappa weights. For a set of periods S the bracket
//
//   1 + sum_{tau=1}^{|S|} (-1)^tau sum_{i_1..i_tau} sum_{j_1<..<j_tau in S}
//         prod_t K_{j_t,i_t} / P(Z_{j_1}=i_1, .., Z_{j_tau}=i_tau | history)
//
// is enumerated term by term over period subsets and value tuples. Cost is
// 3^{|S|} per path, so this is meant for small horizons.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "latre/model.hpp"
#include "latre/propensity.hpp"

namespace latre {

// K_{t,0} = W_t (1 - Z_t), K_{t,1} = (1 - W_t) Z_t.
inline int k_term(const PathView& p, std::size_t t, int i) {
  return i == 0 ? p.w(t) * (1 - p.z(t)) : (1 - p.w(t)) * p.z(t);
}

struct KappaDiagnostics {
  double mean = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  std::size_t clipped = 0;

  void add(double k) {
    ++count;
    mean += (k - mean) / static_cast<double>(count);
    min = std::min(min, k);
    max = std::max(max, k);
  }
};

namespace detail {

// Marginals P(Z_t = 0 | .), P(Z_t = 1 | .) for every period of one path.
struct PathMarginals {
  std::vector<std::array<double, 2>> p;

  PathMarginals(const PropensityModel& m, const PathView& path, ClipTally* tally) {
    const std::size_t T = path.horizon();
    p.resize(T + 1);
    for (std::size_t t = 0; t <= T; ++t) {
      p[t][0] = marginal_prob(m, path, t, 0, tally);
      p[t][1] = marginal_prob(m, path, t, 1, tally);
    }
  }
};

// Visits every (period subset, value tuple) term of the alternating bracket
// over `periods`. The visitor receives the sign, the K product and the joint
// probability of the instrument pattern.
template <class Visitor>
void for_each_kappa_term(const PathView& path, std::span<const std::size_t> periods,
                         const PathMarginals& marg, Visitor&& visit) {
  const std::size_t s = periods.size();
  if (s >= 31) throw PreconditionError("kappa enumeration supports at most 30 periods");
  const std::uint32_t subsets = std::uint32_t{1} << s;
  std::size_t chosen[32];
  for (std::uint32_t mask = 1; mask < subsets; ++mask) {
    std::size_t tau = 0;
    for (std::size_t b = 0; b < s; ++b)
      if (mask & (std::uint32_t{1} << b)) chosen[tau++] = periods[b];
    const double sign = (tau % 2 == 0) ? 1.0 : -1.0;
    const std::uint32_t tuples = std::uint32_t{1} << tau;
    for (std::uint32_t vals = 0; vals < tuples; ++vals) {
      int num = 1;
      double joint = 1.0;
      for (std::size_t t = 0; t < tau; ++t) {
        const int i = static_cast<int>((vals >> t) & 1u);
        num *= k_term(path, chosen[t], i);
        joint *= marg.p[chosen[t]][static_cast<std::size_t>(i)];
      }
      visit(sign, num, joint);
    }
  }
}

inline double kappa_bracket(const PathView& path, std::span<const std::size_t> periods,
                            const PathMarginals& marg) {
  double kappa = 1.0;
  for_each_kappa_term(path, periods, marg, [&](double sign, int num, double joint) {
    if (num != 0) kappa += sign * num / joint;
  });
  return kappa;
}

inline std::vector<std::size_t> all_periods(std::size_t T) {
  std::vector<std::size_t> v(T + 1);
  for (std::size_t t = 0; t <= T; ++t) v[t] = t;
  return v;
}

}  // namespace detail

// Number of terms the full-complier bracket enumerates for horizon T.
// Must equal sum_{tau=1}^{T+1} 2^tau C(T+1, tau) = 3^{T+1} - 1.
inline std::size_t kappa_term_count(std::size_t T) {
  ObservationPath op;
  op.x.assign(T + 2, {});
  op.z.assign(T + 1, 0);
  op.w.assign(T + 1, 0);
  op.y.assign(T + 1, 0.0);
  const auto d = PanelDataset::from_paths(std::span<const ObservationPath>(&op, 1));
  const auto model = PropensityModel::constant(std::vector<double>(T + 1, 0.5));
  const detail::PathMarginals marg(model, d.path(0), nullptr);
  const auto periods = detail::all_periods(T);
  std::size_t count = 0;
  detail::for_each_kappa_term(d.path(0), periods, marg, [&](double, int, double) { ++count; });
  return count;
}

// Full-complier kappa over periods {0..T}.
inline double kappa_full(const PathView& path, const PropensityModel& m, ClipTally* tally = nullptr) {
  const detail::PathMarginals marg(m, path, tally);
  const auto periods = detail::all_periods(path.horizon());
  return detail::kappa_bracket(path, periods, marg);
}

// Kappa for a compliance type. Never-taker periods contribute
// K_{t,1} / P(Z_t = 1 | .) (untreated although instrumented), always-taker
// periods K_{t,0} / P(Z_t = 0 | .) (treated although not instrumented); the
// complier periods contribute the alternating bracket.
inline double kappa_type(const PathView& path, const ComplianceType& ctype, const PropensityModel& m,
                         ClipTally* tally = nullptr) {
  if (!ctype.is_partition_of(path.horizon())) {
    throw PreconditionError("compliance type " + ctype.str() + " is not a partition of the periods");
  }
  const detail::PathMarginals marg(m, path, tally);
  int num = 1;
  for (std::size_t t : ctype.tn0) num *= k_term(path, t, 1);
  for (std::size_t t : ctype.tn1) num *= k_term(path, t, 0);
  if (num == 0) return 0.0;
  double denom = 1.0;
  for (std::size_t t : ctype.tn0) denom *= marg.p[t][1];
  for (std::size_t t : ctype.tn1) denom *= marg.p[t][0];
  return num / denom * detail::kappa_bracket(path, ctype.tc, marg);
}

}  // namespace latre
