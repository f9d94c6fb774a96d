#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace latre {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Mean plus standard error of a stream of per-path terms.
class MeanAccumulator {
 public:
  void add(double v) {
    sum_.add(v);
    sq_.add(v * v);
    ++n_;
  }
  std::size_t count() const { return n_; }
  double mean() const { return n_ ? sum_.value() / static_cast<double>(n_) : 0.0; }
  double std_error() const {
    if (n_ < 2) return 0.0;
    const double dn = static_cast<double>(n_);
    const double m = mean();
    const double var = std::max(0.0, (sq_.value() - dn * m * m) / (dn - 1.0));
    return std::sqrt(var / dn);
  }

 private:
  CompensatedSum sum_;
  CompensatedSum sq_;
  std::size_t n_ = 0;
};

inline double mean_of(std::span<const double> v) {
  CompensatedSum s;
  for (double x : v) s.add(x);
  return v.empty() ? 0.0 : s.value() / static_cast<double>(v.size());
}

// Median; even length returns the midpoint of the two central values.
inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty vector");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

// Linear-interpolation quantile (R type 7) of an unsorted sample.
inline double quantile_of(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty vector");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace latre
