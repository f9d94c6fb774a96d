#pragma once

// Two-period synthetic panels with a logistic period-0 instrument, a
// Bernoulli(e1) period-1 instrument and one-sided noncompliance driven by
// the same noise that enters the outcomes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latre/errors.hpp"
#include "latre/model.hpp"
#include "latre/propensity.hpp"
#include "latre/rng.hpp"

namespace latre {

struct SimConfig {
  std::size_t n = 500000;
  std::vector<double> xi{1, 2, 3, -1, -2, -3};
  double e1 = 0.75;
  std::vector<double> alpha1{1, 1, 1, 1, 1, 2};
  std::vector<double> alpha2{2, 2, 2, 2, 2, 1};
  double beta1 = 2.0;
  double beta2 = 2.0;
  double delta = 2.0;
  double gamma = 1.0;
  std::uint64_t seed = 20170101;
  bool emit_latents = false;

  std::size_t dim() const { return xi.size(); }

  // Throws InputError naming the offending field.
  void check() const {
    if (n < 1) throw InputError("n: must be at least 1");
    if (xi.empty()) throw InputError("xi: must have at least one entry");
    if (!(e1 > 0.0 && e1 < 1.0)) throw InputError("e1: must lie strictly between 0 and 1");
    if (alpha1.size() != xi.size())
      throw InputError("alpha1: dimension " + std::to_string(alpha1.size()) + " does not match xi (" +
                       std::to_string(xi.size()) + ")");
    if (alpha2.size() != xi.size())
      throw InputError("alpha2: dimension " + std::to_string(alpha2.size()) + " does not match xi (" +
                       std::to_string(xi.size()) + ")");
    const std::pair<const char*, double> coefs[] = {
        {"beta1", beta1}, {"beta2", beta2}, {"delta", delta}, {"gamma", gamma}};
    for (const auto& [name, v] : coefs)
      if (!std::isfinite(v)) throw InputError(std::string(name) + ": must be finite");
  }
};

// Latent noise and potential treatments of one simulated subject.
struct LatentRecord {
  double eps0 = 0.0;
  double eps1 = 0.0;
  int w0_0 = 0, w0_1 = 1;  // W_0(0), W_0(1)
  int w1_0 = 0, w1_1 = 1;  // W_1(0), W_1(1)
};

struct SimOutput {
  PanelDataset data;
  std::optional<std::vector<LatentRecord>> latents;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// P(Z_0 = 1 | X_0) = 1 / (1 + exp(X_0 xi)).
inline double sim_instrument_prob0(std::span<const double> x0, std::span<const double> xi) {
  return 1.0 / (1.0 + std::exp(dot(x0, xi)));
}

// Path i draws, in order: X_0 (d uniforms), eps0, Z_0, W_0(0), eps1, Z_1,
// W_1(0), all from stream i of cfg.seed.
inline SimOutput generate(const SimConfig& cfg) {
  cfg.check();
  const std::size_t dim = cfg.dim();
  SimOutput out{PanelDataset(1, {dim, dim, 0}, cfg.n), std::nullopt};
  if (cfg.emit_latents) out.latents.emplace(cfg.n);
  auto& d = out.data;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    CounterRng rng(cfg.seed, i);
    auto x0 = d.x_mut(i, 0);
    for (auto& v : x0) v = rng.uniform(-1.0, 1.0);
    auto x1 = d.x_mut(i, 1);
    std::copy(x0.begin(), x0.end(), x1.begin());

    const double eps0 = rng.uniform();
    const int z0 = rng.bernoulli(sim_instrument_prob0(x0, cfg.xi)) ? 1 : 0;
    const int w0_0 = rng.bernoulli(eps0) ? 1 : 0;
    const int w0 = z0 == 1 ? 1 : w0_0;
    const double y1 = dot(x0, cfg.alpha1) + cfg.beta1 * w0 + eps0;

    const double eps1 = rng.uniform();
    const int z1 = rng.bernoulli(cfg.e1) ? 1 : 0;
    const int w1_0 = rng.bernoulli(eps1) ? 1 : 0;
    const int w1 = z1 == 1 ? 1 : w1_0;
    const double y2 = dot(x0, cfg.alpha2) + cfg.beta2 * w0 + cfg.delta * y1 + cfg.gamma * w1 + eps1;

    d.set_z(i, 0, z0);
    d.set_w(i, 0, w0);
    d.set_y(i, 1, y1);
    d.set_z(i, 1, z1);
    d.set_w(i, 1, w1);
    d.set_y(i, 2, y2);
    if (out.latents) (*out.latents)[i] = LatentRecord{eps0, eps1, w0_0, 1, w1_0, 1};
  }
  return out;
}

// Regime (1,0) versus (0,1) effect implied by the outcome equations.
inline double true_latre(const SimConfig& cfg) { return (cfg.beta2 + cfg.delta * cfg.beta1) - cfg.gamma; }

// Oracle instrument propensities of the generator ("sim-dgp").
inline PropensityModel sim_oracle_model(const SimConfig& cfg, double clip = kDefaultClip) {
  std::vector<double> xi = cfg.xi;
  const double e1 = cfg.e1;
  return PropensityModel::oracle(
      {[xi](const PathView& p) { return sim_instrument_prob0(p.x(0), xi); },
       [e1](const PathView&) { return e1; }},
      clip);
}

}  // namespace latre
