#pragma once

// Second estimation stage: per-patch migration regressions on the recovered
// biomass panel, estimated jointly, and the map back to biology.
//
// For patch k, with response x[t+1] + H[t] (or x[t+1] alone without harvest):
//
//     response = a0_k x[t] - a1_k x[t]^2 + sum_{h ~ k} d_hk x_h[t]
//
// Expanding the patch transition gives a0_k = 1 + r + d_kk and a1_k = r / K_k.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fleetmig/econ_kernel.hpp"
#include "fleetmig/error.hpp"
#include "fleetmig/patch_model.hpp"
#include "fleetmig/stage1.hpp"

namespace fleetmig {

namespace labels {
inline std::string patch_id(int k) { return std::to_string(k + 1); }
inline std::string alpha0(int k) { return "a0_" + patch_id(k); }
inline std::string alpha1(int k) { return "a1_" + patch_id(k); }
/// d{h}{k}, with an underscore between ids once any id has two digits.
inline std::string d(int h, int k, int n_patches) {
  if (n_patches >= 10) return "d" + patch_id(h) + "_" + patch_id(k);
  return "d" + patch_id(h) + patch_id(k);
}
}  // namespace labels

struct Stage2Spec {
  BiomassPanel biomass;
  PatchGraph graph;
  std::map<Cell, double> harvest;  // tons per (month, patch)
  bool regress_through_harvest = true;
};

/// Tons landed per (month ordinal, patch) summed over ports.
inline std::map<Cell, double> panel_harvest(const MarketPanel& panel) {
  std::map<Cell, double> out;
  for (const auto& m : panel.markets)
    for (int k = 0; k < panel.n_patches; ++k) out[{m.ym.ordinal(), k}] += m.catch_tons[k];
  return out;
}

struct MigrationRows {
  std::vector<econ::Equation> equations;  // one per patch, keys are month ordinals
  std::vector<int> dropped;               // rows lost to gaps, per patch
  int n_patches = 0;
};

inline MigrationRows build_migration_rows(const Stage2Spec& spec) {
  const PatchGraph& g = spec.graph;
  const int n = g.n_patches();
  if (spec.biomass.n_patches != n)
    throw data_error("stage2", "biomass panel and patch graph disagree on the patch count");
  std::set<int> months;
  for (const auto& [cell, x] : spec.biomass.biomass) {
    months.insert(cell.first);
    if (!(x > 0.0)) throw data_error("stage2", "biomass estimates must be positive");
  }

  MigrationRows out;
  out.n_patches = n;
  out.dropped.assign(static_cast<std::size_t>(n), 0);
  for (int k = 0; k < n; ++k) {
    econ::Equation eq;
    eq.name = "patch" + labels::patch_id(k);
    eq.labels = {labels::alpha0(k), labels::alpha1(k)};
    const auto& nb = g.neighbors(k);
    for (int h : nb) eq.labels.push_back(labels::d(h, k, n));

    std::vector<double> ys;
    std::vector<std::vector<double>> xs;
    for (int t : months) {
      auto xk = spec.biomass.at(t, k);
      if (!xk) continue;
      auto next = spec.biomass.at(t + 1, k);
      bool ok = next.has_value();
      std::vector<double> row{*xk, -(*xk) * (*xk)};
      for (int h : nb) {
        auto xh = spec.biomass.at(t, h);
        if (!xh) {
          ok = false;
          break;
        }
        row.push_back(*xh);
      }
      double harvest = 0.0;
      if (ok && spec.regress_through_harvest) {
        auto it = spec.harvest.find({t, k});
        if (it == spec.harvest.end())
          ok = false;
        else
          harvest = it->second;
      }
      if (!ok) {
        // the last observed month has no successor; that is not a gap
        if (t != *months.rbegin()) ++out.dropped[static_cast<std::size_t>(k)];
        continue;
      }
      ys.push_back(*next + harvest);
      xs.push_back(std::move(row));
      eq.obs.push_back(t);
    }
    if (ys.size() < 3)
      throw data_error("stage2", "patch " + labels::patch_id(k) +
                                     " has fewer than 3 usable (t, t+1) pairs");
    const auto nr = static_cast<Eigen::Index>(ys.size());
    eq.y = Eigen::Map<Eigen::VectorXd>(ys.data(), nr);
    eq.X.resize(nr, static_cast<Eigen::Index>(eq.labels.size()));
    for (Eigen::Index i = 0; i < nr; ++i)
      for (Eigen::Index c = 0; c < eq.X.cols(); ++c) eq.X(i, c) = xs[i][c];
    out.equations.push_back(std::move(eq));
  }
  return out;
}

inline econ::EstimateSet fit_stage2(const MigrationRows& rows,
                                    const econ::SurOptions& options = {econ::Balance::subset,
                                                                       false, 50, 1e-8}) {
  econ::LinearSystemSpec sys;
  sys.equations = rows.equations;
  return econ::sur(sys, options);
}

// ---------------------------------------------------------------------------
// Whole-fishery logistic fit
// ---------------------------------------------------------------------------

struct AuxFit {
  double r = 0.0;
  double K_total = 0.0;
  double r_se = 0.0;
  double K_se = 0.0;
  econ::EstimateSet estimates;  // in (r, K) units
};

/// Residuals of the aggregate logistic transition in units of the mean stock:
/// e_t = (X[t+1] - X[t] + H[t]) - r X[t] (1 - X[t]/K), parameters (r, K).
struct AggregateLogistic {
  Eigen::VectorXd xs;
  Eigen::VectorXd target;

  Eigen::VectorXd residual(const Eigen::VectorXd& p) const {
    return target.array() - p[0] * xs.array() * (1.0 - xs.array() / p[1]);
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& p) const {
    Eigen::MatrixXd J(xs.size(), 2);
    J.col(0) = -(xs.array() * (1.0 - xs.array() / p[1])).matrix();
    J.col(1) = (-p[0] * xs.array().square() / (p[1] * p[1])).matrix();
    return J;
  }
};

/// Fits X[t+1] = X[t] + r X[t] (1 - X[t]/K) - H[t]. Migration cancels in the
/// aggregate under conservative dispersion.
inline AuxFit fit_aux_total(const std::vector<double>& X, const std::vector<double>& H) {
  if (X.size() < 4) throw data_error("stage2", "aggregate series needs at least 4 points");
  if (H.size() + 1 < X.size()) throw data_error("stage2", "harvest series shorter than biomass series");
  const auto m = static_cast<Eigen::Index>(X.size() - 1);
  double scale = 0.0;
  for (double x : X) {
    if (!(x > 0.0)) throw data_error("stage2", "aggregate biomass must be positive");
    scale += x;
  }
  scale /= static_cast<double>(X.size());

  // Work in units of the mean stock so both parameters are O(1).
  AggregateLogistic model{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  Eigen::VectorXd& xs = model.xs;
  Eigen::VectorXd& target = model.target;
  for (Eigen::Index i = 0; i < m; ++i) {
    xs[i] = X[i] / scale;
    target[i] = (X[i + 1] - X[i] + H[i]) / scale;
  }
  auto residual = [&](const Eigen::VectorXd& p) { return model.residual(p); };
  auto jacobian = [&](const Eigen::VectorXd& p) { return model.jacobian(p); };

  Eigen::VectorXd start(2);
  start << 0.1, 2.0;
  {
    Eigen::MatrixXd A(m, 2);
    A.col(0) = xs;
    A.col(1) = -xs.array().square().matrix();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() == 2) {
      Eigen::VectorXd b = qr.solve(target);
      if (b[0] > 0.0 && b[1] > 0.0) start << b[0], b[0] / b[1];
    }
  }

  econ::NlsOptions opt;
  opt.labels = {"r", "K"};
  econ::EstimateSet est;
  try {
    est = econ::nls_system(residual, jacobian, start, opt);
  } catch (const econ::NonConvergenceError&) {
    throw;
  } catch (const Error& e) {
    throw numerical_error("stage2", std::string("aggregate growth fit: ") + e.what());
  }
  AuxFit out;
  out.r = est.estimates[0];
  out.K_total = est.estimates[1] * scale;
  if (!(out.r > 0.0) || !(out.K_total > 0.0))
    throw numerical_error("stage2", "aggregate fit gave nonpositive estimates: r = " +
                                        csv::format(out.r) + ", K = " + csv::format(out.K_total));
  Eigen::Vector2d s(1.0, scale);
  est.estimates = est.estimates.cwiseProduct(s);
  est.covariance = s.asDiagonal() * est.covariance * s.asDiagonal();
  est.std_errors = est.covariance.diagonal().cwiseSqrt();
  est.residual_covariance *= scale * scale;
  est.objective *= scale * scale;
  out.r_se = est.std_errors[0];
  out.K_se = est.std_errors[1];
  out.estimates = std::move(est);
  return out;
}

/// Whole-fishery biomass and harvest over the longest run of consecutive
/// months in which every patch is present.
inline std::pair<std::vector<double>, std::vector<double>> aggregate_series(const Stage2Spec& spec) {
  const int n = spec.biomass.n_patches;
  std::map<int, std::pair<double, int>> acc;
  for (const auto& [cell, x] : spec.biomass.biomass) {
    auto& a = acc[cell.first];
    a.first += x;
    a.second += 1;
  }
  std::vector<std::vector<int>> runs;
  std::optional<int> prev;
  for (const auto& [t, a] : acc) {
    if (a.second != n) continue;
    if (!prev || t != *prev + 1) runs.emplace_back();
    runs.back().push_back(t);
    prev = t;
  }
  std::vector<double> X, H;
  if (runs.empty()) return {X, H};
  const auto& run = *std::max_element(runs.begin(), runs.end(),
                                      [](const auto& a, const auto& b) { return a.size() < b.size(); });
  for (int t : run) {
    double h = 0.0;
    for (int k = 0; k < n; ++k) {
      auto it = spec.harvest.find({t, k});
      if (it != spec.harvest.end()) h += it->second;
    }
    X.push_back(acc.at(t).first);
    H.push_back(h);
  }
  return {X, H};
}

// ---------------------------------------------------------------------------
// Structural recovery
// ---------------------------------------------------------------------------

enum class StructuralMapping { canonical, alternative };

struct PatchCapacity {
  int patch = 0;
  double alpha1 = 0.0;
  double alpha1_se = 0.0;
  double k_point = 0.0;    // r / alpha1
  double k_upper80 = 0.0;  // r / (alpha1 upper 80% limit)
  double k_upper90 = 0.0;
  double k_chosen = 0.0;   // before rescaling
  double k_final = 0.0;    // after rescaling; NaN when unidentified
  bool fallback = false;
  bool unidentified = false;
};

struct DispersionEstimate {
  int from = 0;
  int to = 0;
  double value = 0.0;
  double se = 0.0;
};

struct StructuralEstimates {
  double r = 0.0;
  double r_se = 0.0;
  double K_total = 0.0;
  double K_total_se = 0.0;
  double level = 0.8;
  StructuralMapping mapping = StructuralMapping::canonical;
  std::vector<DispersionEstimate> d_own;   // d_kk per patch
  std::vector<DispersionEstimate> d_pair;  // d_hk per ordered adjacent pair
  std::vector<PatchCapacity> capacity;
  double rescale_factor = 1.0;
  Eigen::MatrixXd covariance;  // reduced-form covariance
  std::vector<std::string> covariance_labels;

  Eigen::MatrixXd dispersion(int n) const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : d_own) d(e.from, e.to) = e.value;
    for (const auto& e : d_pair) d(e.from, e.to) = e.value;
    return d;
  }
};

inline double capacity_from(double r, double alpha1) { return r / alpha1; }

inline StructuralEstimates recover_structure(const econ::EstimateSet& reduced, const AuxFit& aux,
                                             const PatchGraph& graph, double level,
                                             StructuralMapping mapping = StructuralMapping::canonical) {
  if (!(aux.r > 0.0)) throw data_error("stage2", "aggregate r must be positive");
  if (!(level > 0.0 && level < 1.0)) throw config_error("stage2", "confidence level must lie in (0, 1)");
  const int n = graph.n_patches();
  StructuralEstimates out;
  out.r = aux.r;
  out.r_se = aux.r_se;
  out.K_total = aux.K_total;
  out.K_total_se = aux.K_se;
  out.level = level;
  out.mapping = mapping;
  out.covariance = reduced.covariance;
  out.covariance_labels = reduced.labels;

  const double z_level = econ::two_sided_z(level);
  const double z80 = econ::two_sided_z(0.8);
  const double z90 = econ::two_sided_z(0.9);
  double chosen_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    double a0 = reduced.value(labels::alpha0(k));
    double a0_se = reduced.std_error(labels::alpha0(k));
    double dkk = mapping == StructuralMapping::canonical ? a0 - 1.0 - aux.r : aux.r - a0;
    out.d_own.push_back({k, k, dkk, a0_se});
    for (int h : graph.neighbors(k)) {
      auto l = labels::d(h, k, n);
      out.d_pair.push_back({h, k, reduced.value(l), reduced.std_error(l)});
    }

    PatchCapacity c;
    c.patch = k;
    c.alpha1 = reduced.value(labels::alpha1(k));
    c.alpha1_se = reduced.std_error(labels::alpha1(k));
    c.k_point = capacity_from(aux.r, c.alpha1);
    c.k_upper80 = capacity_from(aux.r, c.alpha1 + z80 * c.alpha1_se);
    c.k_upper90 = capacity_from(aux.r, c.alpha1 + z90 * c.alpha1_se);
    if (c.alpha1 > 0.0) {
      c.k_chosen = c.k_point;
    } else {
      double upper = c.alpha1 + z_level * c.alpha1_se;
      if (upper > 0.0) {
        c.fallback = true;
        c.k_chosen = aux.r / upper;
      } else {
        c.unidentified = true;
        c.k_chosen = std::numeric_limits<double>::quiet_NaN();
      }
    }
    if (!c.unidentified) chosen_sum += c.k_chosen;
    out.capacity.push_back(c);
  }
  std::sort(out.d_pair.begin(), out.d_pair.end(), [](const auto& a, const auto& b) {
    return std::pair(a.to, a.from) < std::pair(b.to, b.from);
  });
  if (chosen_sum > 0.0) {
    out.rescale_factor = aux.K_total / chosen_sum;
    for (auto& c : out.capacity)
      c.k_final = c.unidentified ? std::numeric_limits<double>::quiet_NaN()
                                 : c.k_chosen * out.rescale_factor;
  } else {
    throw numerical_error("stage2", "no patch has an identified carrying capacity");
  }
  return out;
}

}  // namespace fleetmig
