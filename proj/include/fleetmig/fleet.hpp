#pragma once

// Vessel-side model: Cobb-Douglas capture, distance-based net prices, and a
// logit random-utility choice among patches plus the outside option (stay
// in port). Utility vectors are laid out with the outside option at index 0
// and patch k at index k + 1, matching patch_id in trip files.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fleetmig/error.hpp"
#include "fleetmig/rng.hpp"

namespace fleetmig {

struct CaptureTech {
  double gamma = 1.0;   // technological constant
  double alpha = 1.0;   // effort elasticity
  double beta = 1.0;    // biomass elasticity
  Eigen::VectorXd rho;  // covariate elasticities

  void validate() const {
    if (!(gamma > 0.0) || !(alpha > 0.0) || !(beta > 0.0))
      throw config_error("fleet", "capture gamma, alpha and beta must be positive");
  }
};

inline double capture(const CaptureTech& tech, double effort, double biomass,
                      std::span<const double> z = {}) {
  if (!(effort >= 0.0) || !(biomass >= 0.0))
    throw data_error("fleet", "capture needs non-negative effort and biomass");
  if (static_cast<Eigen::Index>(z.size()) != tech.rho.size())
    throw data_error("fleet", "covariate count does not match rho");
  double cov = 1.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!(z[i] > 0.0))
      throw data_error("fleet", "capture covariates must be strictly positive");
    cov *= std::pow(z[i], tech.rho[static_cast<Eigen::Index>(i)]);
  }
  if (effort == 0.0 || biomass == 0.0) return 0.0;
  return tech.gamma * std::pow(effort, tech.alpha) * std::pow(biomass, tech.beta) * cov;
}

struct PriceInputs {
  double landed_price = 0.0;             // per ton
  double fuel_price = 0.0;               // per volume unit
  double vessel_fuel_rate = 0.0;         // volume per nautical mile
  double expected_catch_per_trip = 0.0;  // tons

  void validate() const {
    if (!(landed_price > 0.0) || !(fuel_price > 0.0) || !(vessel_fuel_rate > 0.0) ||
        !(expected_catch_per_trip > 0.0))
      throw data_error("fleet", "price inputs must be strictly positive");
  }
};

/// Round-trip fuel cost per expected ton landed.
inline double trip_cost_per_ton(const PriceInputs& in, double distance) {
  return 2.0 * distance * in.vessel_fuel_rate * in.fuel_price / in.expected_catch_per_trip;
}

/// Landed price net of travel cost; negative for unprofitable patches.
inline double net_price(const PriceInputs& in, double distance) {
  if (!(distance > 0.0)) throw data_error("fleet", "distance must be positive");
  return in.landed_price - trip_cost_per_ton(in, distance);
}

struct UtilitySpec {
  double a0 = 0.0;     // intercept
  double a1 = 1.0;     // weight on ln(net price)
  Eigen::VectorXd a2;  // weights on ln(z)
  double scale = 1.0;  // extreme-value scale, fixed by normalization

  void validate() const {
    if (scale != 1.0) throw config_error("fleet", "utility noise scale is normalized to 1");
  }
};

/// Utilities with the outside option (0) first. Patches with non-positive net
/// price are infeasible and get -inf. `z` is either empty or one covariate
/// vector per patch.
inline Eigen::VectorXd choice_utilities(const UtilitySpec& spec,
                                        std::span<const double> net_prices,
                                        const std::vector<Eigen::VectorXd>& z,
                                        std::span<const double> xi) {
  const std::size_t n = net_prices.size();
  if (xi.size() != n) throw data_error("fleet", "xi must have one entry per patch");
  if (!z.empty() && z.size() != n) throw data_error("fleet", "z must have one row per patch");
  Eigen::VectorXd u(static_cast<Eigen::Index>(n) + 1);
  u[0] = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double p = net_prices[k];
    double v = -std::numeric_limits<double>::infinity();
    if (p > 0.0 && xi[k] > -std::numeric_limits<double>::infinity()) {
      v = spec.a0 + spec.a1 * std::log(p) + xi[k];
      if (!z.empty()) {
        const Eigen::VectorXd& zk = z[k];
        if (zk.size() != spec.a2.size())
          throw data_error("fleet", "covariate count does not match a2");
        for (Eigen::Index m = 0; m < zk.size(); ++m) {
          if (!(zk[m] > 0.0)) throw data_error("fleet", "covariates must be positive");
          v += spec.a2[m] * std::log(zk[m]);
        }
      }
    }
    u[static_cast<Eigen::Index>(k) + 1] = v;
  }
  return u;
}

/// Multinomial-logit probabilities over all entries of `u` (outside option
/// included as an ordinary entry).
inline Eigen::VectorXd logit_shares(const Eigen::VectorXd& u) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::isnan(u[i]) || u[i] == std::numeric_limits<double>::infinity())
      throw data_error("fleet", "utilities must be finite or -inf");
    m = std::max(m, u[i]);
  }
  if (m == -std::numeric_limits<double>::infinity())
    throw data_error("fleet", "no feasible alternative");
  Eigen::VectorXd s(u.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    s[i] = std::exp(u[i] - m);
    total += s[i];
  }
  return s / total;
}

/// Random-utility choice: argmax of u + Gumbel noise. Returns an index into
/// `u` (0 = outside option).
inline int sample_choice(const Eigen::VectorXd& u, Rng& rng) {
  int best = -1;
  double best_v = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    double g = rng.gumbel();  // drawn for every entry so streams stay aligned
    if (u[i] == -std::numeric_limits<double>::infinity()) continue;
    double v = u[i] + g;
    if (best < 0 || v > best_v) {
      best = static_cast<int>(i);
      best_v = v;
    }
  }
  if (best < 0) throw data_error("fleet", "all alternatives infeasible");
  return best;
}

inline int sample_choice(const Eigen::VectorXd& u, std::uint64_t seed) {
  Rng rng(seed);
  return sample_choice(u, rng);
}

/// Noise-free variant: plain argmax (first index on ties).
inline int best_choice(const Eigen::VectorXd& u) {
  int best = -1;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (u[i] == -std::numeric_limits<double>::infinity()) continue;
    if (best < 0 || u[i] > u[best]) best = static_cast<int>(i);
  }
  if (best < 0) throw data_error("fleet", "all alternatives infeasible");
  return best;
}

}  // namespace fleetmig
