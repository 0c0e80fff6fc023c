#pragma once

// Repeated simulate + estimate over seeds, summarised per parameter as bias,
// RMSE and confidence-interval coverage against the scenario truth.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "fleetmig/econ_kernel.hpp"
#include "fleetmig/pipeline.hpp"
#include "fleetmig/simulator.hpp"

namespace fleetmig {

struct ParameterDraw {
  double estimate = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();  // NaN: no interval
};

struct Replication {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::map<std::string, ParameterDraw> draws;
  double share_d_within = 0.0;  // off-diagonal rates within 0.1
  double share_k_within = 0.0;  // rescaled capacities within 15%
  double seconds = 0.0;
};

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  int n = 0;
  double mean = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  int n_interval = 0;
  double coverage = std::numeric_limits<double>::quiet_NaN();
};

struct MonteCarloReport {
  std::vector<Replication> replications;
  std::vector<ParameterSummary> parameters;
  double level = 0.9;
  int failures = 0;
};

/// Truth for every reported parameter of the default estimation path.
inline std::map<std::string, double> scenario_truth(const Scenario& s, const std::vector<int>& years) {
  std::map<std::string, double> t;
  const int n = s.n_patches();
  for (int y : years) {
    t["alpha_" + std::to_string(y)] = s.tech.alpha;
    t["gamma_" + std::to_string(y)] = s.tech.gamma;
  }
  for (int k = 0; k < n; ++k) {
    t[labels::alpha0(k)] = 1.0 + s.bio.r + s.dispersion.rate(k, k);
    t[labels::alpha1(k)] = s.bio.r / s.bio.carrying_capacity[k];
    t[labels::d(k, k, n)] = s.dispersion.rate(k, k);
    t["K_" + labels::patch_id(k)] = s.bio.carrying_capacity[k];
    for (int h : s.graph.neighbors(k)) t[labels::d(h, k, n)] = s.dispersion.rate(h, k);
  }
  t["r"] = s.bio.r;
  t["K_total"] = s.bio.carrying_capacity.sum();
  return t;
}

inline Replication replicate(Scenario s, std::uint64_t seed, const EstimationOptions& opt,
                             bool noiseless) {
  Replication rep;
  rep.seed = seed;
  s.seed = seed;
  auto t0 = std::chrono::steady_clock::now();
  try {
    MarketPanel panel;
    std::map<int, double> totals;
    if (noiseless) {
      auto e = expected_run(s);
      panel = std::move(e.panel);
      totals = annual_totals(e.truth.months, e.truth.biomass);
    } else {
      auto sim = run(s);
      PanelSettings ps{s.vessel_fuel_rate, s.expected_catch_per_trip, false};
      panel = build_panel(sim.records, scenario_roster(s), scenario_prices(s), s.graph, ps,
                          s.covariate_names, scenario_covariates(s));
      totals = annual_totals(sim.months, sim.biomass);
    }
    auto r = estimate(panel, s.graph, totals, opt);
    const int n = s.n_patches();
    for (const auto& c : r.capture) {
      rep.draws["alpha_" + std::to_string(c.year)] = {c.alpha, c.alpha_se};
      rep.draws["gamma_" + std::to_string(c.year)] = {c.gamma, c.gamma * c.lngamma_se};
    }
    for (std::size_t i = 0; i < r.reduced.labels.size(); ++i)
      rep.draws[r.reduced.labels[i]] = {r.reduced.estimates[static_cast<Eigen::Index>(i)],
                                        r.reduced.std_errors[static_cast<Eigen::Index>(i)]};
    const auto& st = r.structural;
    rep.draws["r"] = {st.r, st.r_se};
    rep.draws["K_total"] = {st.K_total, st.K_total_se};
    for (const auto& d : st.d_own) rep.draws[labels::d(d.from, d.to, n)] = {d.value, d.se};
    int d_ok = 0;
    for (const auto& d : st.d_pair)
      if (std::abs(d.value - s.dispersion.rate(d.from, d.to)) <= 0.1) ++d_ok;
    int k_ok = 0;
    for (const auto& c : st.capacity) {
      rep.draws["K_" + labels::patch_id(c.patch)] = {c.k_final, std::numeric_limits<double>::quiet_NaN()};
      if (std::abs(c.k_final / s.bio.carrying_capacity[c.patch] - 1.0) <= 0.15) ++k_ok;
    }
    rep.share_d_within = st.d_pair.empty() ? 0.0 : static_cast<double>(d_ok) / st.d_pair.size();
    rep.share_k_within = static_cast<double>(k_ok) / st.capacity.size();
    rep.ok = true;
  } catch (const std::exception& e) {
    rep.error = e.what();
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline MonteCarloReport monte_carlo(const Scenario& s, int reps, const EstimationOptions& opt,
                                    bool noiseless = false, int threads = 0, double level = 0.9) {
  if (reps < 2) throw config_error("montecarlo", "need at least 2 replications");
  s.validate();
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, reps);

  MonteCarloReport out;
  out.level = level;
  out.replications.resize(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < reps; i = next++)
      out.replications[static_cast<std::size_t>(i)] =
          replicate(s, static_cast<std::uint64_t>(i + 1), opt, noiseless);
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<int> years;
  for (int t = 0; t < s.horizon; ++t) {
    int y = s.start.plus(t).year;
    if (years.empty() || years.back() != y) years.push_back(y);
  }
  const double z = econ::two_sided_z(level);
  for (const auto& r : out.replications)
    if (!r.ok) ++out.failures;
  if (out.failures == reps)
    throw numerical_error("montecarlo", "all replications failed; first error: " +
                                            out.replications.front().error);
  for (const auto& [name, truth] : scenario_truth(s, years)) {
    ParameterSummary p;
    p.name = name;
    p.truth = truth;
    double sum = 0.0, sq = 0.0;
    int covered = 0;
    for (const auto& r : out.replications) {
      if (!r.ok) continue;
      auto it = r.draws.find(name);
      if (it == r.draws.end() || !std::isfinite(it->second.estimate)) continue;
      double err = it->second.estimate - truth;
      ++p.n;
      sum += it->second.estimate;
      sq += err * err;
      if (std::isfinite(it->second.se)) {
        ++p.n_interval;
        if (std::abs(err) <= z * it->second.se) ++covered;
      }
    }
    if (p.n == 0) continue;
    p.mean = sum / p.n;
    p.bias = p.mean - truth;
    p.rmse = std::sqrt(sq / p.n);
    if (p.n_interval > 0) p.coverage = static_cast<double>(covered) / p.n_interval;
    out.parameters.push_back(p);
  }
  return out;
}

inline std::string parameters_csv(const MonteCarloReport& r) {
  std::string out = "parameter,truth,n,mean,bias,rmse,n_interval,coverage\n";
  for (const auto& p : r.parameters)
    out += p.name + "," + csv::format(p.truth) + "," + std::to_string(p.n) + "," + csv::format(p.mean) +
           "," + csv::format(p.bias) + "," + csv::format(p.rmse) + "," + std::to_string(p.n_interval) +
           "," + (std::isnan(p.coverage) ? std::string("NA") : csv::format(p.coverage)) + "\n";
  return out;
}

inline std::string replications_csv(const MonteCarloReport& r) {
  std::string out = "seed,ok,share_d_within_0.1,share_k_within_15pct,error\n";
  for (const auto& rep : r.replications) {
    std::string err = rep.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += std::to_string(rep.seed) + "," + (rep.ok ? "1" : "0") + "," +
           (rep.ok ? csv::format(rep.share_d_within) : "NA") + "," +
           (rep.ok ? csv::format(rep.share_k_within) : "NA") + "," + err + "\n";
  }
  return out;
}

}  // namespace fleetmig
