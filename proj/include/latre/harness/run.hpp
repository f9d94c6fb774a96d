#pragma once

// Estimation runs, Monte Carlo replication and the error metrics used to
// compare estimators against the generator's true effect.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "latre/baselines.hpp"
#include "latre/harness/config.hpp"
#include "latre/harness/csv.hpp"
#include "latre/identification.hpp"
#include "latre/simgen.hpp"
#include "latre/stats.hpp"

namespace latre::harness {

struct ErrorMetrics {
  double abs_mean_error = 0.0;    // |mean(tau_hat - tau)|
  double mean_abs_error = 0.0;    // mean(|tau_hat - tau|)
  double abs_median_error = 0.0;  // |median(tau_hat - tau)|
  double median_abs_error = 0.0;  // median(|tau_hat - tau|)
};

inline ErrorMetrics metrics(std::span<const double> estimates, double tau) {
  if (estimates.empty()) throw PreconditionError("metrics need at least one estimate");
  std::vector<double> err, abs_err;
  for (double e : estimates) {
    err.push_back(e - tau);
    abs_err.push_back(std::abs(e - tau));
  }
  return {std::abs(mean_of(err)), mean_of(abs_err), std::abs(median_of(err)), median_of(abs_err)};
}

// ---------------------------------------------------------------------------
// Single estimation run

inline PropensityModel instrument_model_for(const PanelDataset& d, const EstimateSettings& s,
                                            const SimConfig& sim) {
  if (s.propensity == "fitted") {
    return fit_propensity_model(d, FitTarget::instrument, {}, {}, s.clip);
  }
  if (s.oracle == "constant") {
    if (s.oracle_p.size() != d.horizon() + 1) {
      Config::bad("oracle_p", "needs one probability per period (" + std::to_string(d.horizon() + 1) + ")");
    }
    return PropensityModel::constant(s.oracle_p, s.clip);
  }
  if (d.horizon() != 1 || d.dim(0) != sim.dim()) {
    Config::bad("oracle", "sim-dgp oracle needs a two-period dataset with X_0 of dimension " +
                              std::to_string(sim.dim()));
  }
  return sim_oracle_model(sim, s.clip);
}

// Point estimate of the configured method on one dataset.
inline EstimateReport estimate_once(const PanelDataset& d, const EstimateSettings& s, const SimConfig& sim) {
  switch (s.method) {
    case Method::latre: {
      const auto model = instrument_model_for(d, s, sim);
      return latre_contrast(d, model, s.utility, s.regime_a, s.regime_b, s.options);
    }
    case Method::naive:
    case Method::noiv: {
      if (s.regime_a == s.regime_b) throw PreconditionError("regime contrast needs two different regimes");
      EstimateReport rep;
      rep.method = method_name(s.method);
      rep.regime_a = s.regime_a;
      rep.regime_b = s.regime_b;
      rep.ctype = ComplianceType::full(d.horizon());
      rep.n_used = d.size();
      rep.effect = s.method == Method::naive
                       ? naive_contrast(d, s.utility, s.regime_a, s.regime_b)
                       : noiv_contrast(d, s.utility, s.regime_a, s.regime_b, {}, {}, s.clip);
      rep.numerator = rep.effect;
      rep.complier_prob = std::nan("");
      return rep;
    }
  }
  throw Error("unknown method");
}

// Adds a bootstrap interval when s.bootstrap > 0.
inline EstimateReport estimate(const PanelDataset& d, const EstimateSettings& s, const SimConfig& sim) {
  EstimateReport rep = estimate_once(d, s, sim);
  if (s.bootstrap > 0) {
    rep.bootstrap = bootstrap_interval(
        [&](const PanelDataset& resample) { return estimate_once(resample, s, sim).effect; }, d, s.bootstrap,
        s.level, s.bootstrap_seed, s.workers);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Replication

struct ReplicationResult {
  std::vector<Method> methods;
  std::map<Method, std::vector<double>> estimates;
  std::map<Method, ErrorMetrics> errors;
  double tau = 0.0;
  double wall_seconds = 0.0;
  SimConfig sim;
  ReplicateSettings settings;
};

inline std::uint64_t replication_seed(std::uint64_t master, std::size_t r) {
  return master ^ static_cast<std::uint64_t>(r);
}

// Runs R generate -> estimate cycles. Replications are scheduled across
// `settings.workers` threads; results are stored by replication index.
inline ReplicationResult run_replication(const SimConfig& sim, const ReplicateSettings& settings,
                                         const EstimateSettings& est) {
  const auto start = std::chrono::steady_clock::now();
  ReplicationResult res;
  res.methods = settings.methods;
  res.tau = true_latre(sim);
  res.sim = sim;
  res.settings = settings;
  const std::size_t R = settings.replications;
  for (Method m : settings.methods) res.estimates[m].assign(R, 0.0);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::optional<std::size_t> failed_index;
  std::string failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= R || failed.load()) return;
      try {
        SimConfig cfg = sim;
        cfg.seed = replication_seed(settings.master_seed, r);
        cfg.emit_latents = false;
        const auto data = generate(cfg).data;
        for (Method m : settings.methods) {
          EstimateSettings s = est;
          s.method = m;
          res.estimates[m][r] = estimate_once(data, s, cfg).effect;
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (!failed_index || r < *failed_index) {
          failed_index = r;
          failure = e.what();
        }
        failed.store(true);
        return;
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(settings.workers, R));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failed_index) {
    throw Error("replication " + std::to_string(*failed_index) + " failed: " + failure);
  }
  for (Method m : settings.methods) res.errors[m] = metrics(res.estimates[m], res.tau);
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

// Plain-text table with one row per method.
inline std::string format_table(const ReplicationResult& res) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "Method" << std::right << std::setw(16) << "Absolute Mean"
     << std::setw(16) << "Mean Absolute" << std::setw(18) << "Absolute Median" << std::setw(18)
     << "Median Absolute" << '\n';
  os << std::fixed << std::setprecision(4);
  for (Method m : res.methods) {
    const auto& e = res.errors.at(m);
    os << std::left << std::setw(10) << method_name(m) << std::right << std::setw(16) << e.abs_mean_error
       << std::setw(16) << e.mean_abs_error << std::setw(18) << e.abs_median_error << std::setw(18)
       << e.median_abs_error << '\n';
  }
  return os.str();
}

inline void write_replication_csv(std::ostream& os, const ReplicationResult& res) {
  os << "replication,seed";
  for (Method m : res.methods) os << ',' << method_name(m);
  os << '\n';
  for (std::size_t r = 0; r < res.settings.replications; ++r) {
    os << r << ',' << replication_seed(res.settings.master_seed, r);
    for (Method m : res.methods) os << ',' << csv::format_real(res.estimates.at(m)[r]);
    os << '\n';
  }
}

}  // namespace latre::harness
