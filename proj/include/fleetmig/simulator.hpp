#pragma once

// Forward simulation of the bioeconomy: each month every vessel picks a patch
// (or stays in port) by random utility given beginning-of-month biomass, patch
// harvest follows the capture function of total trips, and the stock moves
// one step. Produces trip records plus the latent truth used as the oracle
// for estimation.
//
// The unobserved patch characteristic in utilities is exactly
// beta * ln(biomass), beta being the capture function's biomass elasticity.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "fleetmig/error.hpp"
#include "fleetmig/fleet.hpp"
#include "fleetmig/ingest.hpp"
#include "fleetmig/patch_model.hpp"
#include "fleetmig/rng.hpp"

namespace fleetmig {

struct Scenario {
  PatchGraph graph;
  BioParams bio;
  DispersionMatrix dispersion;
  CaptureTech tech;
  UtilitySpec utility;
  std::vector<int> vessels_per_port;
  int horizon = 48;  // months
  YearMonth start{2001, 1};
  Eigen::VectorXd initial_stock;
  std::vector<double> landed_price;  // per month
  std::vector<double> fuel_price;    // per month
  double vessel_fuel_rate = 1.0;
  double expected_catch_per_trip = 1.0;
  std::vector<std::string> covariate_names;
  std::vector<Eigen::MatrixXd> covariates;  // per month: patches x covariates
  std::uint64_t seed = 1;

  int n_patches() const { return graph.n_patches(); }
  int n_ports() const { return graph.n_ports(); }
  int n_vessels() const {
    int s = 0;
    for (int v : vessels_per_port) s += v;
    return s;
  }

  PriceInputs prices(int t) const {
    return {landed_price.at(t), fuel_price.at(t), vessel_fuel_rate, expected_catch_per_trip};
  }

  std::vector<Eigen::VectorXd> z(int t) const {
    std::vector<Eigen::VectorXd> out;
    if (covariate_names.empty()) return out;
    for (int k = 0; k < n_patches(); ++k) out.push_back(covariates.at(t).row(k).transpose());
    return out;
  }

  void validate() const {
    const int n = n_patches();
    if (n < 1) throw config_error("simulator", "scenario has no patches");
    if (horizon < 2) throw config_error("simulator", "horizon must be at least 2 months");
    bio.validate();
    tech.validate();
    utility.validate();
    if (bio.n_patches() != n || dispersion.n_patches() != n)
      throw config_error("simulator", "biological parameters do not match the patch graph");
    if (static_cast<int>(vessels_per_port.size()) != n_ports())
      throw config_error("simulator", "need one vessel count per port");
    for (int v : vessels_per_port)
      if (v < 0) throw config_error("simulator", "vessel counts must be non-negative");
    if (initial_stock.size() != n)
      throw config_error("simulator", "initial stock must have one entry per patch");
    for (int k = 0; k < n; ++k)
      if (!(initial_stock[k] > 0.0 && initial_stock[k] <= bio.carrying_capacity[k]))
        throw config_error("simulator", "initial stock of patch " + std::to_string(k + 1) +
                                            " must lie in (0, K]");
    if (static_cast<int>(landed_price.size()) < horizon ||
        static_cast<int>(fuel_price.size()) < horizon)
      throw config_error("simulator", "price series shorter than the horizon");
    for (int t = 0; t < horizon; ++t)
      if (!(landed_price[t] > 0.0) || !(fuel_price[t] > 0.0))
        throw config_error("simulator", "prices must be positive");
    if (!(vessel_fuel_rate > 0.0) || !(expected_catch_per_trip > 0.0))
      throw config_error("simulator", "fuel rate and expected catch must be positive");
    const auto m = static_cast<Eigen::Index>(covariate_names.size());
    if (tech.rho.size() != m || utility.a2.size() != m)
      throw config_error("simulator", "rho and a2 must have one entry per covariate");
    if (m > 0) {
      if (static_cast<int>(covariates.size()) < horizon)
        throw config_error("simulator", "covariate series shorter than the horizon");
      for (int t = 0; t < horizon; ++t)
        if (covariates[t].rows() != n || covariates[t].cols() != m ||
            (covariates[t].array() <= 0.0).any())
          throw config_error("simulator", "covariates must be positive, patches x covariates");
    }
  }
};

/// Patch utilities (outside option first) seen from `port` in month t.
inline Eigen::VectorXd port_utilities(const Scenario& s, int t, int port, const Eigen::VectorXd& x) {
  const int n = s.n_patches();
  std::vector<double> prices(n), xi(n);
  PriceInputs in = s.prices(t);
  for (int k = 0; k < n; ++k) {
    prices[k] = net_price(in, s.graph.distance(port, k));
    xi[k] = x[k] > 0.0 ? s.tech.beta * std::log(x[k]) : -std::numeric_limits<double>::infinity();
  }
  return choice_utilities(s.utility, prices, s.z(t), xi);
}

struct SimulationResult {
  std::vector<TripRecord> records;
  std::vector<YearMonth> months;          // observed months
  std::vector<Eigen::VectorXd> biomass;   // beginning-of-month stock, one per observed month
  std::vector<Eigen::VectorXd> effort;    // trips per patch
  std::vector<Eigen::VectorXd> harvest;   // tons per patch
  std::vector<std::vector<bool>> depleted;
  Eigen::VectorXd final_stock;            // stock after the last observed month
  bool terminated_early = false;          // every patch depleted

  int depletion_events() const {
    int c = 0;
    for (const auto& d : depleted)
      for (bool b : d) c += b ? 1 : 0;
    return c;
  }
};

/// Stochastic run: one choice per vessel per month.
inline SimulationResult run(const Scenario& s) {
  s.validate();
  const int n = s.n_patches();
  SimulationResult out;
  StockState state{s.initial_stock, 0};
  for (int t = 0; t < s.horizon; ++t) {
    if ((state.x.array() <= 0.0).all()) {
      out.terminated_early = true;
      break;
    }
    const YearMonth ym = s.start.plus(t);
    out.months.push_back(ym);
    out.biomass.push_back(state.x);

    std::vector<std::vector<int>> chosen(static_cast<std::size_t>(s.n_ports()));
    Eigen::VectorXd effort = Eigen::VectorXd::Zero(n);
    int vessel = 0;
    for (int j = 0; j < s.n_ports(); ++j) {
      Eigen::VectorXd u = port_utilities(s, t, j, state.x);
      for (int v = 0; v < s.vessels_per_port[j]; ++v) {
        ++vessel;
        Rng rng({s.seed, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(vessel)});
        int c = sample_choice(u, rng);
        chosen[j].push_back(c);
        if (c > 0) effort[c - 1] += 1.0;
      }
    }
    Eigen::VectorXd harvest(n);
    auto zt = s.z(t);
    for (int k = 0; k < n; ++k) {
      std::vector<double> zk;
      if (!zt.empty()) zk.assign(zt[k].data(), zt[k].data() + zt[k].size());
      harvest[k] = capture(s.tech, effort[k], state.x[k], zk);
    }
    vessel = 0;
    for (int j = 0; j < s.n_ports(); ++j)
      for (int c : chosen[j]) {
        ++vessel;
        double tons = c > 0 ? harvest[c - 1] / effort[c - 1] : 0.0;
        out.records.push_back({vessel, j + 1, ym.year, ym.month, c, tons});
      }
    out.effort.push_back(effort);
    out.harvest.push_back(harvest);
    StepResult next = step(state, s.bio, s.dispersion, harvest);
    out.depleted.push_back(next.depleted);
    state = next.state;
  }
  out.final_stock = state.x;
  return out;
}

/// Noise-free run: market shares equal the analytic logit probabilities and
/// effort is the expected (fractional) trip count. Returns the panel directly.
struct ExpectedRun {
  MarketPanel panel;
  SimulationResult truth;  // records left empty
};

inline ExpectedRun expected_run(const Scenario& s) {
  s.validate();
  const int n = s.n_patches();
  ExpectedRun out;
  out.panel.n_patches = n;
  out.panel.n_ports = s.n_ports();
  out.panel.covariate_names = s.covariate_names;
  StockState state{s.initial_stock, 0};
  for (int t = 0; t < s.horizon; ++t) {
    if ((state.x.array() <= 0.0).all()) {
      out.truth.terminated_early = true;
      break;
    }
    const YearMonth ym = s.start.plus(t);
    out.truth.months.push_back(ym);
    out.truth.biomass.push_back(state.x);

    std::vector<Market> markets;
    Eigen::VectorXd effort = Eigen::VectorXd::Zero(n);
    PriceInputs in = s.prices(t);
    for (int j = 0; j < s.n_ports(); ++j) {
      if (s.vessels_per_port[j] == 0) continue;
      Eigen::VectorXd shares = logit_shares(port_utilities(s, t, j, state.x));
      Market m;
      m.port = j;
      m.ym = ym;
      m.roster = s.vessels_per_port[j];
      m.outside_share = shares[0];
      for (int k = 0; k < n; ++k) {
        m.share.push_back(shares[k + 1]);
        m.choices.push_back(m.roster * shares[k + 1]);
        m.effort.push_back(m.roster * shares[k + 1]);
        m.net_price.push_back(net_price(in, s.graph.distance(j, k)));
        effort[k] += m.effort.back();
      }
      markets.push_back(std::move(m));
    }
    Eigen::VectorXd harvest(n);
    auto zt = s.z(t);
    for (int k = 0; k < n; ++k) {
      std::vector<double> zk;
      if (!zt.empty()) zk.assign(zt[k].data(), zt[k].data() + zt[k].size());
      harvest[k] = capture(s.tech, effort[k], state.x[k], zk);
      if (!zt.empty()) out.panel.covariates[{ym.ordinal(), k}] = zk;
    }
    for (auto& m : markets) {
      m.catch_tons.resize(n);
      for (int k = 0; k < n; ++k)
        m.catch_tons[k] = effort[k] > 0.0 ? harvest[k] * m.effort[k] / effort[k] : 0.0;
      out.panel.markets.push_back(std::move(m));
    }
    out.truth.effort.push_back(effort);
    out.truth.harvest.push_back(harvest);
    StepResult next = step(state, s.bio, s.dispersion, harvest);
    out.truth.depleted.push_back(next.depleted);
    state = next.state;
  }
  out.truth.final_stock = state.x;
  out.panel.recompute_diagnostics();
  return out;
}

// ---------------------------------------------------------------------------
// Side tables a run implies (what a data provider would ship with trips.csv)
// ---------------------------------------------------------------------------

inline std::vector<RosterEntry> scenario_roster(const Scenario& s) {
  std::vector<RosterEntry> out;
  int vessel = 0;
  for (int j = 0; j < s.n_ports(); ++j)
    for (int v = 0; v < s.vessels_per_port[j]; ++v)
      out.push_back({++vessel, j + 1, s.start, s.start.plus(s.horizon - 1)});
  return out;
}

inline std::vector<PriceRow> scenario_prices(const Scenario& s) {
  std::vector<PriceRow> out;
  for (int t = 0; t < s.horizon; ++t) {
    YearMonth ym = s.start.plus(t);
    for (int j = 0; j < s.n_ports(); ++j)
      out.push_back({j + 1, ym.year, ym.month, s.landed_price[t], s.fuel_price[t]});
  }
  return out;
}

inline std::vector<CovariateRow> scenario_covariates(const Scenario& s) {
  std::vector<CovariateRow> out;
  if (s.covariate_names.empty()) return out;
  for (int t = 0; t < s.horizon; ++t) {
    YearMonth ym = s.start.plus(t);
    for (int k = 0; k < s.n_patches(); ++k) {
      CovariateRow r{k + 1, ym.year, ym.month, {}};
      for (Eigen::Index m = 0; m < s.covariates[t].cols(); ++m) r.values.push_back(s.covariates[t](k, m));
      out.push_back(std::move(r));
    }
  }
  return out;
}

/// Per-year sum over patches of the mean monthly biomass: the external
/// stock-assessment figure used to pin biomass levels.
inline std::map<int, double> annual_totals(const std::vector<YearMonth>& months,
                                           const std::vector<Eigen::VectorXd>& biomass) {
  std::map<int, std::pair<double, int>> acc;
  for (std::size_t t = 0; t < months.size(); ++t) {
    auto& a = acc[months[t].year];
    a.first += biomass[t].sum();
    a.second += 1;
  }
  std::map<int, double> out;
  for (const auto& [y, a] : acc) out[y] = a.first / a.second;
  return out;
}

inline void write_truth(const std::string& path, const SimulationResult& r) {
  auto out = csv::open_out(path);
  out << "patch_id,year,month,biomass_tons\n";
  for (std::size_t t = 0; t < r.months.size(); ++t)
    for (Eigen::Index k = 0; k < r.biomass[t].size(); ++k)
      out << k + 1 << ',' << r.months[t].year << ',' << r.months[t].month << ','
          << csv::format(r.biomass[t][k]) << '\n';
}

inline void write_annual_totals(const std::string& path, const std::map<int, double>& totals) {
  auto out = csv::open_out(path);
  out << "year,biomass_tons\n";
  for (const auto& [y, v] : totals) out << y << ',' << csv::format(v) << '\n';
}

inline std::map<int, double> read_annual_totals(const std::string& path) {
  auto t = csv::read(path, {"year", "biomass_tons"});
  std::map<int, double> out;
  for (const auto& [lineno, text] : t.lines) {
    csv::Row row{csv::split(text), &t, {}};
    int y = row.integer("year");
    double v = row.number("biomass_tons");
    row.require(v > 0.0, "biomass total must be positive");
    if (!row.error.empty())
      throw data_error("simulator", path + ":" + std::to_string(lineno) + ": " + row.error);
    out[y] = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Default desk scenario
// ---------------------------------------------------------------------------

/// 8 patches on a 4 x 2 grid (two columns: coastal 1,3,5,7 and offshore
/// 2,4,6,8), four coastal ports, 120 vessels, 48 months from 2001-01.
/// Magnitudes are synthetic.
inline Scenario default_scenario() {
  constexpr int rows = 4, cols = 2, ports = 4;
  Eigen::MatrixXd dist(ports, rows * cols);
  for (int j = 0; j < ports; ++j)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        double dx = (c + 0.5) + 0.2;  // ports sit just inshore of column 0
        double dy = r - j;
        dist(j, r * cols + c) = 10.0 + 60.0 * std::sqrt(dx * dx + dy * dy);
      }
  Scenario s;
  s.graph = PatchGraph::grid(rows, cols, dist);
  const int n = s.graph.n_patches();

  Eigen::VectorXd K(n);
  K << 60e3, 80e3, 90e3, 70e3, 80e3, 100e3, 50e3, 70e3;
  s.bio = BioParams(0.25, K);

  // (from, to, rate) with 1-based patch ids
  const double rates[][3] = {{1, 2, 0.05}, {2, 1, 0.03}, {1, 3, 0.04}, {3, 1, 0.06},
                             {2, 4, 0.05}, {4, 2, 0.02}, {3, 4, 0.08}, {4, 3, 0.03},
                             {3, 5, 0.04}, {5, 3, 0.05}, {4, 6, 0.06}, {6, 4, 0.04},
                             {5, 6, 0.03}, {6, 5, 0.07}, {5, 7, 0.05}, {7, 5, 0.02},
                             {6, 8, 0.04}, {8, 6, 0.09}, {7, 8, 0.06}, {8, 7, 0.03}};
  Eigen::MatrixXd off = Eigen::MatrixXd::Zero(n, n);
  for (const auto& r : rates) off(static_cast<int>(r[0]) - 1, static_cast<int>(r[1]) - 1) = r[2];
  s.dispersion = DispersionMatrix::conservative(s.graph, off);

  s.tech.gamma = 0.08;
  s.tech.alpha = 1.05;
  s.tech.beta = 0.8;
  s.utility.a0 = -16.7;
  s.utility.a1 = 1.2;
  s.vessels_per_port = {30, 30, 30, 30};
  s.horizon = 48;
  s.start = {2001, 1};
  s.initial_stock.resize(n);
  s.initial_stock << 0.9 * K[0], 0.6 * K[1], 0.5 * K[2], 0.8 * K[3], 0.7 * K[4], 0.45 * K[5],
      0.85 * K[6], 0.55 * K[7];
  for (int t = 0; t < s.horizon; ++t) {
    double phase = 2.0 * std::numbers::pi * t / 12.0;
    s.landed_price.push_back(320.0 * (1.0 + 0.3 * std::sin(phase)) * (1.0 + 0.004 * t));
    s.fuel_price.push_back(0.8 * (1.0 + 0.1 * std::cos(phase)));
  }
  s.vessel_fuel_rate = 150.0;
  s.expected_catch_per_trip = 500.0;
  s.seed = 1;
  return s;
}

}  // namespace fleetmig
