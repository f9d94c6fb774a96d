#pragma once

// Core domain types for multi-period instrumented panels: one binary
// instrument Z_j and one binary treatment W_j per period j = 0..T, outcomes
// Y_1..Y_{T+1}, covariates X_0..X_{T+1}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "latre/errors.hpp"

namespace latre {

// Owning record of one subject's trajectory. Used for construction and I/O;
// estimators read through PathView.
struct ObservationPath {
  std::vector<std::vector<double>> x;  // x[j], j = 0..T+1
  std::vector<int> z;                  // z[j], j = 0..T
  std::vector<int> w;                  // w[j], j = 0..T
  std::vector<double> y;               // y[j-1] holds Y_j, j = 1..T+1

  std::size_t horizon() const { return z.empty() ? 0 : z.size() - 1; }
};

class PanelDataset;

// Lightweight read-only handle on row `index` of a PanelDataset.
class PathView {
 public:
  PathView(const PanelDataset& data, std::size_t index) : data_(&data), index_(index) {}

  std::size_t index() const { return index_; }
  std::size_t horizon() const;
  int z(std::size_t j) const;
  int w(std::size_t j) const;
  // Outcome Y_j, j in 1..T+1.
  double y(std::size_t j) const;
  std::span<const double> x(std::size_t j) const;

 private:
  const PanelDataset* data_;
  std::size_t index_;
};

// Column-oriented panel of n paths with a common horizon T. Immutable once
// built except through the explicit column setters used by generators/readers.
class PanelDataset {
 public:
  PanelDataset() = default;

  // dims has T+2 entries: covariate dimension of X_0..X_{T+1}.
  PanelDataset(std::size_t horizon, std::vector<std::size_t> dims, std::size_t n)
      : horizon_(horizon), n_(n), dims_(std::move(dims)) {
    if (dims_.size() != horizon_ + 2) {
      throw InputError("covariate dimension list must have T+2 entries");
    }
    x_.resize(horizon_ + 2);
    for (std::size_t j = 0; j < x_.size(); ++j) x_[j].assign(n_ * dims_[j], 0.0);
    z_.assign(horizon_ + 1, std::vector<int>(n_, 0));
    w_.assign(horizon_ + 1, std::vector<int>(n_, 0));
    y_.assign(horizon_ + 1, std::vector<double>(n_, 0.0));
  }

  static PanelDataset from_paths(std::span<const ObservationPath> paths) {
    if (paths.empty()) throw InputError("dataset needs at least one path");
    const auto& first = paths.front();
    const std::size_t T = first.horizon();
    std::vector<std::size_t> dims;
    for (const auto& xj : first.x) dims.push_back(xj.size());
    PanelDataset d(T, dims, paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
      const auto& p = paths[i];
      if (p.z.size() != T + 1 || p.w.size() != T + 1 || p.y.size() != T + 1 ||
          p.x.size() != T + 2) {
        throw InputError("path " + std::to_string(i) + " has a different horizon");
      }
      for (std::size_t j = 0; j <= T + 1; ++j) {
        if (p.x[j].size() != dims[j]) {
          throw InputError("path " + std::to_string(i) + " covariate dimension mismatch at period " +
                           std::to_string(j));
        }
        std::copy(p.x[j].begin(), p.x[j].end(), d.x_[j].begin() + i * dims[j]);
      }
      for (std::size_t j = 0; j <= T; ++j) {
        d.z_[j][i] = p.z[j];
        d.w_[j][i] = p.w[j];
        d.y_[j][i] = p.y[j];
      }
    }
    return d;
  }

  std::size_t horizon() const { return horizon_; }
  std::size_t size() const { return n_; }
  std::size_t dim(std::size_t j) const { return dims_.at(j); }
  const std::vector<std::size_t>& dims() const { return dims_; }

  PathView path(std::size_t i) const { return PathView(*this, i); }

  int z(std::size_t i, std::size_t j) const { return z_[j][i]; }
  int w(std::size_t i, std::size_t j) const { return w_[j][i]; }
  double y(std::size_t i, std::size_t j) const { return y_[j - 1][i]; }
  std::span<const double> x(std::size_t i, std::size_t j) const {
    return {x_[j].data() + i * dims_[j], dims_[j]};
  }

  void set_z(std::size_t i, std::size_t j, int v) { z_[j][i] = v; }
  void set_w(std::size_t i, std::size_t j, int v) { w_[j][i] = v; }
  void set_y(std::size_t i, std::size_t j, double v) { y_[j - 1][i] = v; }
  std::span<double> x_mut(std::size_t i, std::size_t j) {
    return {x_[j].data() + i * dims_[j], dims_[j]};
  }

  ObservationPath extract(std::size_t i) const {
    ObservationPath p;
    for (std::size_t j = 0; j <= horizon_ + 1; ++j) {
      auto xs = x(i, j);
      p.x.emplace_back(xs.begin(), xs.end());
    }
    for (std::size_t j = 0; j <= horizon_; ++j) {
      p.z.push_back(z_[j][i]);
      p.w.push_back(w_[j][i]);
      p.y.push_back(y_[j][i]);
    }
    return p;
  }

  // Rows gathered in the given order; duplicates allowed (bootstrap).
  PanelDataset gather(std::span<const std::size_t> rows) const {
    PanelDataset d(horizon_, dims_, rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::size_t i = rows[k];
      for (std::size_t j = 0; j <= horizon_ + 1; ++j) {
        auto src = x(i, j);
        std::copy(src.begin(), src.end(), d.x_[j].begin() + k * dims_[j]);
      }
      for (std::size_t j = 0; j <= horizon_; ++j) {
        d.z_[j][k] = z_[j][i];
        d.w_[j][k] = w_[j][i];
        d.y_[j][k] = y_[j][i];
      }
    }
    return d;
  }

  // Multiply every outcome by c. Used by scale-equivariance checks.
  PanelDataset scaled_outcomes(double c) const {
    PanelDataset d = *this;
    for (auto& col : d.y_)
      for (auto& v : col) v *= c;
    return d;
  }

 private:
  std::size_t horizon_ = 0;
  std::size_t n_ = 0;
  std::vector<std::size_t> dims_;
  std::vector<std::vector<double>> x_;
  std::vector<std::vector<int>> z_;
  std::vector<std::vector<int>> w_;
  std::vector<std::vector<double>> y_;
};

inline std::size_t PathView::horizon() const { return data_->horizon(); }
inline int PathView::z(std::size_t j) const { return data_->z(index_, j); }
inline int PathView::w(std::size_t j) const { return data_->w(index_, j); }
inline double PathView::y(std::size_t j) const { return data_->y(index_, j); }
inline std::span<const double> PathView::x(std::size_t j) const { return data_->x(index_, j); }

// ---------------------------------------------------------------------------
// Regimes and compliance types

struct Regime {
  std::vector<int> assignments;  // d_j for j = 0..T

  std::size_t horizon() const { return assignments.empty() ? 0 : assignments.size() - 1; }

  void check(std::size_t T) const {
    if (assignments.size() != T + 1) {
      throw PreconditionError("regime length " + std::to_string(assignments.size()) +
                              " does not match T+1 = " + std::to_string(T + 1));
    }
    for (int a : assignments) {
      if (a != 0 && a != 1) throw PreconditionError("regime entries must be 0 or 1");
    }
  }

  // True when the realized treatments follow this regime in every period.
  bool followed_by(const PathView& p) const {
    for (std::size_t j = 0; j < assignments.size(); ++j)
      if (p.w(j) != assignments[j]) return false;
    return true;
  }

  std::string str() const {
    std::string s = "(";
    for (std::size_t j = 0; j < assignments.size(); ++j) {
      if (j) s += ",";
      s += std::to_string(assignments[j]);
    }
    return s + ")";
  }

  friend bool operator==(const Regime&, const Regime&) = default;
};

// Partition of periods {0..T} into complier (tc), never-taker (tn0) and
// always-taker (tn1) periods. Each list is kept sorted.
struct ComplianceType {
  std::vector<std::size_t> tc;
  std::vector<std::size_t> tn0;
  std::vector<std::size_t> tn1;

  static ComplianceType full(std::size_t T) {
    ComplianceType c;
    for (std::size_t j = 0; j <= T; ++j) c.tc.push_back(j);
    return c;
  }

  bool is_partition_of(std::size_t T) const {
    std::vector<int> seen(T + 1, 0);
    for (const auto* set : {&tc, &tn0, &tn1}) {
      for (std::size_t j : *set) {
        if (j > T || seen[j]) return false;
        seen[j] = 1;
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
  }

  bool is_full() const { return tn0.empty() && tn1.empty(); }

  std::string str() const {
    auto fmt = [](const std::vector<std::size_t>& v) {
      std::string s = "{";
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) s += ",";
        s += std::to_string(v[k]);
      }
      return s + "}";
    };
    return "c" + fmt(tc) + " n0" + fmt(tn0) + " n1" + fmt(tn1);
  }

  friend bool operator==(const ComplianceType&, const ComplianceType&) = default;
};

// All 3^{T+1} compliance types, base-3 counter order with period 0 varying
// fastest; the first entry is full compliance.
inline std::vector<ComplianceType> enumerate_compliance_types(std::size_t T) {
  const std::size_t periods = T + 1;
  std::size_t total = 1;
  for (std::size_t j = 0; j < periods; ++j) total *= 3;
  std::vector<ComplianceType> out;
  out.reserve(total);
  std::vector<int> digit(periods, 0);
  for (std::size_t k = 0; k < total; ++k) {
    ComplianceType c;
    for (std::size_t j = 0; j < periods; ++j) {
      (digit[j] == 0 ? c.tc : digit[j] == 1 ? c.tn0 : c.tn1).push_back(j);
    }
    out.push_back(std::move(c));
    for (std::size_t j = 0; j < periods; ++j) {
      if (++digit[j] < 3) break;
      digit[j] = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Utility functionals u(.) of a path

struct UtilityFunctional {
  enum class Kind { final_outcome, sum_of_outcomes, custom };

  Kind kind = Kind::final_outcome;
  std::function<double(const PathView&)> custom_fn;

  static UtilityFunctional final_outcome() { return {Kind::final_outcome, {}}; }
  static UtilityFunctional sum_of_outcomes() { return {Kind::sum_of_outcomes, {}}; }
  static UtilityFunctional custom(std::function<double(const PathView&)> f) {
    return {Kind::custom, std::move(f)};
  }

  std::string name() const {
    switch (kind) {
      case Kind::final_outcome: return "final_outcome";
      case Kind::sum_of_outcomes: return "sum_of_outcomes";
      case Kind::custom: return "custom";
    }
    return "custom";
  }
};

inline double evaluate_utility(const UtilityFunctional& u, const PathView& p) {
  const std::size_t T = p.horizon();
  switch (u.kind) {
    case UtilityFunctional::Kind::final_outcome:
      return p.y(T + 1);
    case UtilityFunctional::Kind::sum_of_outcomes: {
      double s = 0.0;
      for (std::size_t t = 1; t <= T + 1; ++t) s += p.y(t);
      return s;
    }
    case UtilityFunctional::Kind::custom:
      return u.custom_fn(p);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::optional<std::size_t> path;  // absent for dataset-level rules
  std::optional<std::size_t> period;
  std::string rule;

  std::string str() const {
    std::ostringstream os;
    if (path) os << "path " << *path << ": ";
    if (period) os << "period " << *period << ": ";
    os << rule;
    return os.str();
  }
};

// Checks binary domains, finiteness and the sample analog of instrument
// positivity (both Z_j values present for every j). Empty result means clean.
inline std::vector<Violation> validate_dataset(const PanelDataset& d) {
  std::vector<Violation> out;
  const std::size_t T = d.horizon();
  if (d.size() == 0) {
    out.push_back({std::nullopt, std::nullopt, "dataset is empty"});
    return out;
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j <= T; ++j) {
      const int z = d.z(i, j);
      const int w = d.w(i, j);
      if (z != 0 && z != 1) out.push_back({i, j, "z out of {0,1}"});
      if (w != 0 && w != 1) out.push_back({i, j, "w out of {0,1}"});
      if (!std::isfinite(d.y(i, j + 1))) out.push_back({i, j + 1, "y not finite"});
    }
    for (std::size_t j = 0; j <= T + 1; ++j) {
      for (double v : d.x(i, j)) {
        if (!std::isfinite(v)) {
          out.push_back({i, j, "x not finite"});
          break;
        }
      }
    }
  }
  for (std::size_t j = 0; j <= T; ++j) {
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < d.size() && !(has0 && has1); ++i) {
      has0 = has0 || d.z(i, j) == 0;
      has1 = has1 || d.z(i, j) == 1;
    }
    if (!has0 || !has1) {
      out.push_back({std::nullopt, j, "empirical positivity failed at period " + std::to_string(j)});
    }
  }
  return out;
}

}  // namespace latre
