#pragma once

// Instrument (and treatment) propensities P(Z_j = 1 | history): oracle
// closed forms or per-period logistic fits. Joint probabilities over several
// periods factor into sequential conditionals evaluated on the same path.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latre/errors.hpp"
#include "latre/model.hpp"

namespace latre {

inline constexpr double kDefaultClip = 1e-6;

// Counts propensity evaluations that hit the clipping bounds.
struct ClipTally {
  std::size_t count = 0;
};

inline double sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Feature maps for fitted propensities

// Conditioning history for period j. X_0 is always included; the other
// blocks cover periods 1..j (outcomes/covariates) and 0..j-1 (Z, W).
struct FeatureSpec {
  bool outcomes = true;
  bool covariates = true;
  bool instruments = true;
  bool treatments = false;
};

inline std::size_t feature_count(const PanelDataset& d, std::size_t j, const FeatureSpec& spec) {
  std::size_t p = d.dim(0);
  for (std::size_t t = 1; t <= j; ++t) {
    if (spec.outcomes) p += 1;
    if (spec.covariates) p += d.dim(t);
  }
  if (spec.instruments) p += j;
  if (spec.treatments) p += j;
  return p;
}

// Writes the raw (undeduplicated, no intercept) feature row for period j.
inline void write_features(const PathView& p, std::size_t j, const FeatureSpec& spec, double* out) {
  for (double v : p.x(0)) *out++ = v;
  for (std::size_t t = 1; t <= j; ++t) {
    if (spec.outcomes) *out++ = p.y(t);
    if (spec.covariates)
      for (double v : p.x(t)) *out++ = v;
  }
  if (spec.instruments)
    for (std::size_t t = 0; t < j; ++t) *out++ = p.z(t);
  if (spec.treatments)
    for (std::size_t t = 0; t < j; ++t) *out++ = p.w(t);
}

inline Eigen::MatrixXd build_features(const PanelDataset& d, std::size_t j, const FeatureSpec& spec) {
  const std::size_t p = feature_count(d, j, spec);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(d.size(), p);
  for (std::size_t i = 0; i < d.size(); ++i) write_features(d.path(i), j, spec, m.row(i).data());
  return m;
}

// Indices of columns that are neither constant nor an exact copy of an
// earlier column. Dropping them keeps the Newton system nonsingular.
inline std::vector<std::size_t> informative_columns(const Eigen::MatrixXd& x) {
  std::vector<std::size_t> kept;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const auto col = x.col(c);
    if (x.rows() > 0 && (col.array() == col(0)).all()) continue;
    bool dup = false;
    for (std::size_t k : kept) {
      if ((x.col(static_cast<Eigen::Index>(k)).array() == col.array()).all()) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(static_cast<std::size_t>(c));
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Logistic regression by damped Newton

struct LogisticOptions {
  double tol = 1e-8;  // on the sup-norm of the mean log-likelihood gradient
  std::size_t max_iter = 100;
  double ridge = 1e-10;
  double max_coef_norm = 1e3;
};

struct LogisticFit {
  Eigen::VectorXd coefficients;  // intercept first
  bool converged = false;
  std::size_t iterations = 0;
  double gradient_norm = std::numeric_limits<double>::infinity();

  double predict(std::span<const double> x) const {
    double eta = coefficients(0);
    for (std::size_t k = 0; k < x.size(); ++k) eta += coefficients(static_cast<Eigen::Index>(k) + 1) * x[k];
    return sigmoid(eta);
  }
};

// Mean binomial log-likelihood of P(y=1|x) = sigmoid(theta_0 + x theta).
inline double logistic_loglik(const Eigen::MatrixXd& x, std::span<const int> y,
                              const Eigen::VectorXd& theta) {
  const Eigen::VectorXd eta = (x * theta.tail(theta.size() - 1)).array() + theta(0);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta(i);
    // log(1 + exp(e)) without overflow
    const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += y[static_cast<std::size_t>(i)] * e - softplus;
  }
  return ll / static_cast<double>(eta.size());
}

inline Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& x, std::span<const int> y,
                                         const Eigen::VectorXd& theta) {
  const Eigen::Index n = x.rows();
  Eigen::VectorXd resid(n);
  const Eigen::VectorXd eta = (x * theta.tail(theta.size() - 1)).array() + theta(0);
  for (Eigen::Index i = 0; i < n; ++i) resid(i) = y[static_cast<std::size_t>(i)] - sigmoid(eta(i));
  Eigen::VectorXd g(theta.size());
  g(0) = resid.sum();
  g.tail(theta.size() - 1) = x.transpose() * resid;
  return g / static_cast<double>(n);
}

inline LogisticFit fit_logistic(const Eigen::MatrixXd& x, std::span<const int> labels,
                                const LogisticOptions& opt = {}) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (static_cast<std::size_t>(n) != labels.size()) throw InputError("label count does not match rows");
  if (n < p + 1) throw PreconditionError("logistic fit needs n >= p + 1 rows");
  std::size_t ones = 0;
  for (int v : labels) {
    if (v != 0 && v != 1) throw InputError("logistic labels must be 0 or 1");
    ones += static_cast<std::size_t>(v);
  }
  if (ones == 0 || ones == labels.size()) throw SingleClassError("logistic labels contain a single class");

  const double dn = static_cast<double>(n);
  auto objective = [&](const Eigen::VectorXd& th) {
    return logistic_loglik(x, labels, th) - 0.5 * opt.ridge * th.squaredNorm();
  };

  LogisticFit fit;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
  const double base_rate = static_cast<double>(ones) / dn;
  theta(0) = std::log(base_rate / (1.0 - base_rate));
  double obj = objective(theta);

  Eigen::VectorXd eta(n), wts(n), resid(n);
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    eta = (x * theta.tail(p)).array() + theta(0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = sigmoid(eta(i));
      resid(i) = labels[static_cast<std::size_t>(i)] - mu;
      wts(i) = mu * (1.0 - mu);
    }
    Eigen::VectorXd grad(p + 1);
    grad(0) = resid.sum() / dn;
    grad.tail(p) = x.transpose() * resid / dn;
    grad -= opt.ridge * theta;
    fit.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    fit.iterations = it;
    if (fit.gradient_norm <= opt.tol) {
      fit.converged = true;
      break;
    }

    Eigen::MatrixXd hess(p + 1, p + 1);
    const Eigen::MatrixXd wx = x.array().colwise() * wts.array();
    hess(0, 0) = wts.sum();
    hess.block(0, 1, 1, p) = wx.colwise().sum();
    hess.block(1, 0, p, 1) = hess.block(0, 1, 1, p).transpose();
    hess.block(1, 1, p, p) = x.transpose() * wx;
    hess /= dn;
    hess.diagonal().array() += opt.ridge;

    Eigen::VectorXd step = hess.ldlt().solve(grad);
    if (!step.allFinite()) throw SeparationError("logistic Newton system became singular");

    Eigen::VectorXd next = theta + step;
    // Near the optimum the predicted gain falls below the rounding noise of
    // the objective; take the Newton step without a line search.
    if (grad.dot(step) < 1e-12 * (1.0 + std::abs(obj))) {
      theta = next;
      obj = objective(theta);
      fit.iterations = it + 1;
      continue;
    }
    double scale = 1.0;
    double next_obj = objective(next);
    while (!(next_obj >= obj) && scale > 1e-10) {
      scale *= 0.5;
      next = theta + scale * step;
      next_obj = objective(next);
    }
    if (!(next_obj >= obj)) break;  // no ascent possible; leave unconverged
    theta = next;
    obj = next_obj;
    if (theta.norm() > opt.max_coef_norm) {
      throw SeparationError("logistic coefficients diverged (norm " + std::to_string(theta.norm()) +
                            "); labels look separable");
    }
    fit.iterations = it + 1;
  }
  // A fitted index that orders every 1 above every 0 separates the classes:
  // the likelihood has no finite maximizer even when the gradient is tiny.
  eta = (x * theta.tail(p)).array() + theta(0);
  double max0 = -std::numeric_limits<double>::infinity(), min1 = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] == 1) min1 = std::min(min1, eta(i));
    else max0 = std::max(max0, eta(i));
  }
  if (max0 < min1) {
    throw SeparationError("logistic labels are perfectly separated by the fitted index");
  }
  if (!fit.converged) {
    // Recompute the final gradient for reporting.
    fit.gradient_norm = (logistic_gradient(x, labels, theta) - opt.ridge * theta).lpNorm<Eigen::Infinity>();
    fit.converged = fit.gradient_norm <= opt.tol;
  }
  fit.coefficients = std::move(theta);
  return fit;
}

// ---------------------------------------------------------------------------
// Propensity model

class PropensityModel {
 public:
  // Raw P(Z_j = 1 | history) for one period, before clipping.
  using Score = std::function<double(const PathView&)>;
  enum class Mode { oracle, fitted };

  struct FittedPeriod {
    FeatureSpec spec;
    std::size_t raw_size = 0;       // length of the raw feature row
    std::vector<std::size_t> kept;  // raw feature indices fed to the fit
    LogisticFit fit;
  };

  static PropensityModel oracle(std::vector<Score> scores, double clip = kDefaultClip) {
    PropensityModel m;
    m.mode_ = Mode::oracle;
    m.scores_ = std::move(scores);
    m.clip_ = clip;
    return m;
  }

  // Instruments independent of history with P(Z_j = 1) = p[j].
  static PropensityModel constant(std::vector<double> p, double clip = kDefaultClip) {
    std::vector<Score> scores;
    for (double pj : p) scores.emplace_back([pj](const PathView&) { return pj; });
    return oracle(std::move(scores), clip);
  }

  static PropensityModel fitted(std::vector<FittedPeriod> periods, double clip = kDefaultClip) {
    PropensityModel m;
    m.mode_ = Mode::fitted;
    m.clip_ = clip;
    auto shared = std::make_shared<const std::vector<FittedPeriod>>(std::move(periods));
    m.fitted_ = shared;
    for (std::size_t j = 0; j < shared->size(); ++j) {
      m.scores_.emplace_back([shared, j](const PathView& p) {
        const auto& fp = (*shared)[j];
        thread_local std::vector<double> buf;
        buf.resize(fp.raw_size);
        write_features(p, j, fp.spec, buf.data());
        double eta = fp.fit.coefficients(0);
        for (std::size_t k = 0; k < fp.kept.size(); ++k)
          eta += fp.fit.coefficients(static_cast<Eigen::Index>(k) + 1) * buf[fp.kept[k]];
        return sigmoid(eta);
      });
    }
    return m;
  }

  Mode mode() const { return mode_; }
  std::size_t periods() const { return scores_.size(); }
  double clip() const { return clip_; }
  double score(const PathView& p, std::size_t j) const { return scores_.at(j)(p); }
  const std::vector<FittedPeriod>* fitted_periods() const { return fitted_.get(); }

 private:
  Mode mode_ = Mode::oracle;
  std::vector<Score> scores_;
  double clip_ = kDefaultClip;
  std::shared_ptr<const std::vector<FittedPeriod>> fitted_;
};

// Which per-period binary column a fitted model predicts.
enum class FitTarget { instrument, treatment };

// Fits one logistic model per period on the given feature map.
inline PropensityModel fit_propensity_model(const PanelDataset& d, FitTarget target,
                                            const FeatureSpec& spec = {},
                                            const LogisticOptions& opt = {},
                                            double clip = kDefaultClip) {
  std::vector<PropensityModel::FittedPeriod> periods;
  for (std::size_t j = 0; j <= d.horizon(); ++j) {
    const Eigen::MatrixXd raw = build_features(d, j, spec);
    auto kept = informative_columns(raw);
    Eigen::MatrixXd x(raw.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k)
      x.col(static_cast<Eigen::Index>(k)) = raw.col(static_cast<Eigen::Index>(kept[k]));
    std::vector<int> labels(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      labels[i] = target == FitTarget::instrument ? d.z(i, j) : d.w(i, j);
    LogisticFit fit;
    try {
      fit = fit_logistic(x, labels, opt);
    } catch (const SeparationError& e) {
      throw SeparationError(std::string(e.what()) + " (period " + std::to_string(j) + ")", j);
    } catch (const SingleClassError& e) {
      throw SingleClassError(std::string(e.what()) + " (period " + std::to_string(j) + ")");
    }
    periods.push_back({spec, static_cast<std::size_t>(raw.cols()), std::move(kept), std::move(fit)});
  }
  return PropensityModel::fitted(std::move(periods), clip);
}

// ---------------------------------------------------------------------------
// Marginal and joint probabilities

// P(Z_j = i | history), clipped to [clip, 1 - clip].
inline double marginal_prob(const PropensityModel& m, const PathView& p, std::size_t j, int i,
                            ClipTally* tally = nullptr) {
  const double p1 = m.score(p, j);
  const double raw = i == 1 ? p1 : 1.0 - p1;
  const double lo = m.clip();
  const double hi = 1.0 - m.clip();
  if (raw < lo || raw > hi || std::isnan(raw)) {
    if (tally) ++tally->count;
    return std::isnan(raw) ? lo : std::clamp(raw, lo, hi);
  }
  return raw;
}

struct Assignment {
  std::size_t period;
  int value;
};

// Product of sequential conditionals over strictly increasing periods. Each
// factor is clipped; the product is not re-clipped.
inline double joint_prob(const PropensityModel& m, const PathView& p, std::span<const Assignment> a,
                         ClipTally* tally = nullptr) {
  double prob = 1.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (t > 0 && a[t].period <= a[t - 1].period) {
      throw PreconditionError("joint_prob periods must be strictly increasing");
    }
    prob *= marginal_prob(m, p, a[t].period, a[t].value, tally);
  }
  return prob;
}

}  // namespace latre
