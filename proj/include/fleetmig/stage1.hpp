#pragma once

// First estimation stage.
//
// Each port contributes one demand equation over its (month, patch) rows,
//
//     ln s_k - ln s_0 = a0[year] + a1[year, port] ln p_k + rho' ln z_k + xi[month, patch],
//
// and one capture equation in logs runs over (month, patch) cells with
// positive effort and catch,
//
//     ln H = lngamma[year] + a2[year] ln E + rho' ln z + xi[month, patch].
//
// The patch-month effects xi (= beta ln biomass) and the covariate weights
// are shared across all equations; a0 is shared across ports. One reference
// cell per year has its effect fixed at zero, so a0 and lngamma absorb that
// cell's level. Levels are restored in recover_biomass.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fleetmig/econ_kernel.hpp"
#include "fleetmig/error.hpp"
#include "fleetmig/ingest.hpp"

namespace fleetmig {

using Cell = std::pair<int, int>;  // (year-month ordinal, patch index)

namespace labels {
inline std::string a0(int year) { return "a0_" + std::to_string(year); }
inline std::string a1(int year, int port) {
  return "a1_" + std::to_string(year) + "_" + std::to_string(port + 1);
}
inline std::string a2(int year) { return "a2_" + std::to_string(year); }
inline std::string lngamma(int year) { return "lngamma_" + std::to_string(year); }
inline std::string rho(const std::string& name) { return "rho_" + name; }
inline std::string xi(const Cell& c) {
  return "xi_" + YearMonth::from_ordinal(c.first).str() + "_" + std::to_string(c.second + 1);
}
}  // namespace labels

struct DemandRow {
  int port = 0;
  YearMonth ym;
  int patch = 0;
  double response = 0.0;  // ln s_k - ln s_0
  double ln_price = 0.0;
  std::vector<double> ln_z;
};

struct InversionReport {
  std::vector<DemandRow> rows;
  int dropped_zero_share = 0;
  int dropped_nonpositive_price = 0;
  int dropped_no_outside_markets = 0;
};

/// Berry inversion: one row per (market, patch) with interior share and
/// positive net price. Dropped rows are counted, never silently discarded.
inline InversionReport invert_shares(const MarketPanel& panel) {
  InversionReport rep;
  for (const auto& m : panel.markets) {
    if (m.outside_share <= 0.0) {
      ++rep.dropped_no_outside_markets;
      continue;
    }
    const double ln_s0 = std::log(m.outside_share);
    for (int k = 0; k < panel.n_patches; ++k) {
      if (m.share[k] <= 0.0) {
        ++rep.dropped_zero_share;
        continue;
      }
      if (m.net_price[k] <= 0.0) {
        ++rep.dropped_nonpositive_price;
        continue;
      }
      DemandRow r;
      r.port = m.port;
      r.ym = m.ym;
      r.patch = k;
      r.response = std::log(m.share[k]) - ln_s0;
      r.ln_price = std::log(m.net_price[k]);
      for (double z : panel.z(m.ym, k)) r.ln_z.push_back(std::log(z));
      rep.rows.push_back(std::move(r));
    }
  }
  if (rep.rows.empty()) throw data_error("stage1", "no usable share rows after inversion");
  return rep;
}

struct Stage1Options {
  bool capture_equation = true;
  econ::SurOptions sur{econ::Balance::subset, false, 50, 1e-8};
};

struct Stage1Spec {
  MarketPanel panel;
  Stage1Options options;
};

struct Stage1Result {
  econ::EstimateSet estimates;
  std::map<Cell, double> effects;  // xi-hat, reference cells at 0
  std::map<int, Cell> reference_cell;
  std::vector<int> years;
  std::vector<int> ports;  // 0-based ports with a demand equation
  int n_patches = 0;
  std::vector<std::string> covariate_names;
  int demand_rows = 0;
  int capture_rows = 0;
  int dropped_zero_share = 0;
  int dropped_nonpositive_price = 0;
  int dropped_no_outside_markets = 0;
};

struct CaptureRow {
  Cell cell;
  double ln_catch = 0.0;
  double ln_effort = 0.0;
  std::vector<double> ln_z;
};

/// Patch-month totals over ports; only cells with positive effort and catch.
inline std::vector<CaptureRow> capture_rows(const MarketPanel& panel) {
  std::map<Cell, std::pair<double, double>> tot;
  for (const auto& m : panel.markets)
    for (int k = 0; k < panel.n_patches; ++k) {
      auto& t = tot[{m.ym.ordinal(), k}];
      t.first += m.effort[k];
      t.second += m.catch_tons[k];
    }
  std::vector<CaptureRow> out;
  for (const auto& [cell, t] : tot) {
    if (t.first <= 0.0 || t.second <= 0.0) continue;
    CaptureRow r{cell, std::log(t.second), std::log(t.first), {}};
    for (double z : panel.z(YearMonth::from_ordinal(cell.first), cell.second))
      r.ln_z.push_back(std::log(z));
    out.push_back(std::move(r));
  }
  return out;
}

inline Stage1Result fit_stage1(const Stage1Spec& spec) {
  const MarketPanel& panel = spec.panel;
  const int n = panel.n_patches;
  if (n < 1) throw data_error("stage1", "panel has no patches");
  InversionReport inv = invert_shares(panel);
  std::vector<CaptureRow> cap;
  if (spec.options.capture_equation) cap = capture_rows(panel);

  std::set<int> months;
  for (const auto& m : panel.markets) months.insert(m.ym.ordinal());
  if (months.size() < 2) throw data_error("stage1", "panel must cover at least two months");

  auto key_of = [n](const Cell& c) { return static_cast<std::int64_t>(c.first) * n + c.second; };

  // Rows per cell decide the reference cell of each year.
  std::map<Cell, int> cell_rows;
  for (const auto& r : inv.rows) ++cell_rows[{r.ym.ordinal(), r.patch}];
  for (const auto& r : cap) ++cell_rows[r.cell];
  std::map<int, Cell> reference;
  std::map<int, int> best;
  for (const auto& [cell, count] : cell_rows) {
    int year = YearMonth::from_ordinal(cell.first).year;
    auto it = best.find(year);
    if (it == best.end() || count > it->second) {
      best[year] = count;
      reference[year] = cell;
    }
  }

  const auto& covn = panel.covariate_names;
  econ::LinearSystemSpec sys;
  std::set<int> years_all;
  std::set<int> ports_all;

  auto add_columns = [&](econ::Equation& eq, const std::vector<std::string>& fixed,
                         const std::set<Cell>& cells) {
    eq.labels = fixed;
    for (const auto& c : covn) eq.labels.push_back(labels::rho(c));
    for (const auto& c : cells)
      if (reference.at(YearMonth::from_ordinal(c.first).year) != c) eq.labels.push_back(labels::xi(c));
  };

  for (int port = 0; port < panel.n_ports; ++port) {
    std::vector<const DemandRow*> rows;
    for (const auto& r : inv.rows)
      if (r.port == port) rows.push_back(&r);
    if (rows.empty()) continue;
    ports_all.insert(port);
    std::set<int> years;
    std::set<Cell> cells;
    for (auto* r : rows) {
      years.insert(r->ym.year);
      cells.insert({r->ym.ordinal(), r->patch});
    }
    years_all.insert(years.begin(), years.end());
    std::vector<std::string> fixed;
    for (int y : years) fixed.push_back(labels::a0(y));
    for (int y : years) fixed.push_back(labels::a1(y, port));
    econ::Equation eq;
    eq.name = "demand_port" + std::to_string(port + 1);
    add_columns(eq, fixed, cells);
    std::map<std::string, Eigen::Index> col;
    for (std::size_t i = 0; i < eq.labels.size(); ++i) col[eq.labels[i]] = static_cast<Eigen::Index>(i);
    const auto nr = static_cast<Eigen::Index>(rows.size());
    eq.y.resize(nr);
    eq.X = Eigen::MatrixXd::Zero(nr, static_cast<Eigen::Index>(eq.labels.size()));
    for (Eigen::Index i = 0; i < nr; ++i) {
      const DemandRow& r = *rows[i];
      Cell c{r.ym.ordinal(), r.patch};
      eq.y[i] = r.response;
      eq.X(i, col.at(labels::a0(r.ym.year))) = 1.0;
      eq.X(i, col.at(labels::a1(r.ym.year, port))) = r.ln_price;
      for (std::size_t m = 0; m < covn.size(); ++m) eq.X(i, col.at(labels::rho(covn[m]))) = r.ln_z[m];
      if (auto it = col.find(labels::xi(c)); it != col.end()) eq.X(i, it->second) = 1.0;
      eq.obs.push_back(key_of(c));
    }
    sys.equations.push_back(std::move(eq));
  }

  if (!cap.empty()) {
    std::set<int> years;
    std::set<Cell> cells;
    for (const auto& r : cap) {
      years.insert(YearMonth::from_ordinal(r.cell.first).year);
      cells.insert(r.cell);
    }
    years_all.insert(years.begin(), years.end());
    std::vector<std::string> fixed;
    for (int y : years) fixed.push_back(labels::lngamma(y));
    for (int y : years) fixed.push_back(labels::a2(y));
    econ::Equation eq;
    eq.name = "capture";
    add_columns(eq, fixed, cells);
    std::map<std::string, Eigen::Index> col;
    for (std::size_t i = 0; i < eq.labels.size(); ++i) col[eq.labels[i]] = static_cast<Eigen::Index>(i);
    const auto nr = static_cast<Eigen::Index>(cap.size());
    eq.y.resize(nr);
    eq.X = Eigen::MatrixXd::Zero(nr, static_cast<Eigen::Index>(eq.labels.size()));
    for (Eigen::Index i = 0; i < nr; ++i) {
      const CaptureRow& r = cap[i];
      int year = YearMonth::from_ordinal(r.cell.first).year;
      eq.y[i] = r.ln_catch;
      eq.X(i, col.at(labels::lngamma(year))) = 1.0;
      eq.X(i, col.at(labels::a2(year))) = r.ln_effort;
      for (std::size_t m = 0; m < covn.size(); ++m) eq.X(i, col.at(labels::rho(covn[m]))) = r.ln_z[m];
      if (auto it = col.find(labels::xi(r.cell)); it != col.end()) eq.X(i, it->second) = 1.0;
      eq.obs.push_back(key_of(r.cell));
    }
    sys.equations.push_back(std::move(eq));
  }

  for (int y : years_all) sys.share(labels::a0(y));
  for (const auto& c : covn) sys.share(labels::rho(c));
  for (const auto& [cell, count] : cell_rows) sys.share(labels::xi(cell));

  Stage1Result out;
  try {
    out.estimates = econ::sur(sys, spec.options.sur);
  } catch (const RankDeficientError& e) {
    for (const auto& label : e.dependent())
      if (label.rfind("rho_", 0) == 0)
        throw Error(ErrorKind::numerical, "stage1",
                    "covariate " + label.substr(4) +
                        " varies only by patch-month and is absorbed by the effect block; "
                        "it is not identified");
    throw Error(ErrorKind::numerical, "stage1",
                "collinear regressors (a patch-month effect may be confounded with an "
                "intercept); " + std::string(e.what()));
  }
  out.years.assign(years_all.begin(), years_all.end());
  out.ports.assign(ports_all.begin(), ports_all.end());
  out.reference_cell = reference;
  out.n_patches = n;
  out.covariate_names = covn;
  for (const auto& [cell, count] : cell_rows) {
    auto l = labels::xi(cell);
    out.effects[cell] = out.estimates.has(l) ? out.estimates.value(l) : 0.0;
  }
  out.demand_rows = static_cast<int>(inv.rows.size());
  out.capture_rows = static_cast<int>(cap.size());
  out.dropped_zero_share = inv.dropped_zero_share;
  out.dropped_nonpositive_price = inv.dropped_nonpositive_price;
  out.dropped_no_outside_markets = inv.dropped_no_outside_markets;
  return out;
}

// ---------------------------------------------------------------------------
// Biomass levels from effects
// ---------------------------------------------------------------------------

struct BiomassOptions {
  std::optional<double> beta;           // fixed elasticity; nullopt = calibrate from totals
  std::map<int, double> annual_totals;  // per year: sum over patches of mean monthly biomass
  // Per-year shifts putting effects of different years on one scale
  // (calibrated-beta mode only); typically a0[year] - a0[first year].
  std::map<int, double> year_links;
  double beta_lo = 1e-3;
  double beta_hi = 10.0;
  double tolerance = 1e-10;
};

struct BiomassPanel {
  int n_patches = 0;
  std::map<Cell, double> biomass;  // x-hat, tons
  std::map<Cell, double> effect;   // beta_used * ln(x-hat)
  std::map<int, double> level_offset;
  double beta_used = 0.0;
  std::string calibration;  // "none", "totals", "totals+beta"

  std::optional<double> at(int ym_ordinal, int patch) const {
    auto it = biomass.find({ym_ordinal, patch});
    if (it == biomass.end()) return std::nullopt;
    return it->second;
  }
};

namespace detail {

// ln T_y(beta) = ln sum_k mean_t exp(e/beta), and its derivative in beta.
struct YearTotals {
  std::map<int, std::map<int, std::vector<double>>> effects;  // year -> patch -> effects

  std::pair<double, double> log_total(int year, double beta) const {
    const auto& patches = effects.at(year);
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& [k, v] : patches)
      for (double e : v) mx = std::max(mx, e / beta);
    double s = 0.0, ds = 0.0;
    for (const auto& [k, v] : patches) {
      double pk = 0.0, dk = 0.0;
      for (double e : v) {
        double w = std::exp(e / beta - mx);
        pk += w;
        dk += w * (-e / (beta * beta));
      }
      s += pk / static_cast<double>(v.size());
      ds += dk / static_cast<double>(v.size());
    }
    return {mx + std::log(s), ds / s};
  }
};

}  // namespace detail

inline BiomassPanel recover_biomass(const std::map<Cell, double>& effects, int n_patches,
                                    const BiomassOptions& opt) {
  if (effects.empty()) throw data_error("stage1", "no effects to convert");
  for (const auto& [y, b] : opt.annual_totals)
    if (!(b > 0.0)) throw data_error("stage1", "calibration totals must be positive");

  detail::YearTotals years;
  auto link = [&](int year) {
    auto it = opt.year_links.find(year);
    return it == opt.year_links.end() ? 0.0 : it->second;
  };
  const bool calibrate_beta = !opt.beta.has_value();
  for (const auto& [cell, e] : effects) {
    int year = YearMonth::from_ordinal(cell.first).year;
    years.effects[year][cell.second].push_back(e + (calibrate_beta ? link(year) : 0.0));
  }

  BiomassPanel out;
  out.n_patches = n_patches;
  if (!calibrate_beta) {
    double beta = *opt.beta;
    if (!(beta > 0.0)) throw config_error("stage1", "beta must be positive");
    out.beta_used = beta;
    out.calibration = opt.annual_totals.empty() ? "none" : "totals";
    for (const auto& [year, patches] : years.effects) {
      double offset = 0.0;
      if (!opt.annual_totals.empty()) {
        auto it = opt.annual_totals.find(year);
        if (it == opt.annual_totals.end())
          throw data_error("stage1", "no calibration total for year " + std::to_string(year));
        offset = beta * (std::log(it->second) - years.log_total(year, beta).first);
      }
      out.level_offset[year] = offset;
    }
  } else {
    if (opt.annual_totals.size() < 2)
      throw data_error("stage1", "calibrating beta needs totals for at least two years");
    std::vector<int> ys;
    for (const auto& [year, p] : years.effects) {
      if (!opt.annual_totals.count(year))
        throw data_error("stage1", "no calibration total for year " + std::to_string(year));
      ys.push_back(year);
    }
    if (ys.size() < 2) throw data_error("stage1", "calibrating beta needs at least two years of effects");
    // Least squares on log totals with a free common level: SSE(beta) is the
    // spread of e_y = ln B_y - ln T_y(beta); solve dSSE/dbeta = 0.
    auto fit = [&](double beta) {
      std::vector<double> e, de;
      for (int y : ys) {
        auto [lt, dlt] = years.log_total(y, beta);
        e.push_back(std::log(opt.annual_totals.at(y)) - lt);
        de.push_back(-dlt);
      }
      double mean = 0.0;
      for (double v : e) mean += v;
      mean /= static_cast<double>(e.size());
      double g = 0.0, sse = 0.0;
      for (std::size_t i = 0; i < e.size(); ++i) {
        g += 2.0 * (e[i] - mean) * de[i];
        sse += (e[i] - mean) * (e[i] - mean);
      }
      return std::tuple{g, mean, sse};
    };
    auto gradient = [&](double beta) { return std::get<0>(fit(beta)); };
    // SSE need not be monotone on either side of its minimum, so scan a log
    // grid for a - to + sign change and keep the bracket with the lowest SSE.
    constexpr int kGrid = 200;
    std::optional<std::pair<double, double>> bracket;
    double best_sse = std::numeric_limits<double>::infinity();
    double prev_b = opt.beta_lo, prev_g = gradient(prev_b);
    for (int i = 1; i <= kGrid; ++i) {
      double b = opt.beta_lo * std::pow(opt.beta_hi / opt.beta_lo, static_cast<double>(i) / kGrid);
      double g = gradient(b);
      if (prev_g < 0.0 && g >= 0.0) {
        double sse = std::get<2>(fit(0.5 * (prev_b + b)));
        if (sse < best_sse) {
          best_sse = sse;
          bracket = std::pair{prev_b, b};
        }
      }
      prev_b = b;
      prev_g = g;
    }
    if (!bracket)
      throw numerical_error("stage1", "beta calibration root not bracketed in [" +
                                          csv::format(opt.beta_lo) + ", " +
                                          csv::format(opt.beta_hi) + "]");
    double lo = bracket->first, hi = bracket->second;
    while (hi - lo > opt.tolerance * std::max(1.0, lo)) {
      double mid = 0.5 * (lo + hi);
      if (gradient(mid) < 0.0)
        lo = mid;
      else
        hi = mid;
    }
    double beta = 0.5 * (lo + hi);
    double level = std::get<1>(fit(beta)) * beta;
    out.beta_used = beta;
    out.calibration = "totals+beta";
    for (int y : ys) out.level_offset[y] = link(y) + level;
  }

  for (const auto& [cell, e] : effects) {
    int year = YearMonth::from_ordinal(cell.first).year;
    double abs_effect = e + out.level_offset.at(year);
    out.effect[cell] = abs_effect;
    out.biomass[cell] = std::exp(abs_effect / out.beta_used);
  }
  return out;
}

/// Year links from the demand intercepts: a0[y] - a0[first year].
inline std::map<int, double> intercept_year_links(const Stage1Result& s1) {
  std::map<int, double> links;
  if (s1.years.empty()) return links;
  double base = s1.estimates.value(labels::a0(s1.years.front()));
  for (int y : s1.years) links[y] = s1.estimates.value(labels::a0(y)) - base;
  return links;
}

}  // namespace fleetmig
