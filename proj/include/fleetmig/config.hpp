#pragma once

// Run configuration: one JSON file holding the scenario truth, estimation
// switches and Monte Carlo settings. to_json/from_json round-trip exactly.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fleetmig/error.hpp"
#include "fleetmig/ingest.hpp"
#include "fleetmig/patch_model.hpp"
#include "fleetmig/pipeline.hpp"
#include "fleetmig/simulator.hpp"

namespace fleetmig {

struct EstimationConfig {
  double ci_level = 0.9;
  bool paper_mapping = false;
  bool regress_through_harvest = true;
  bool laplace = false;
  std::optional<double> beta = 0.8;  // null in JSON: calibrate from annual totals
  bool strict = true;
  bool sur_iterate = false;

  EstimationOptions options() const {
    EstimationOptions o;
    o.ci_level = ci_level;
    o.mapping = paper_mapping ? StructuralMapping::alternative : StructuralMapping::canonical;
    o.regress_through_harvest = regress_through_harvest;
    o.beta = beta;
    o.sur_iterate = sur_iterate;
    return o;
  }

  void validate() const {
    if (ci_level != 0.8 && ci_level != 0.9 && ci_level != 0.95)
      throw config_error("config", "ci_level must be one of 0.80, 0.90, 0.95");
    if (beta && !(*beta > 0.0)) throw config_error("config", "beta must be positive or null");
  }
};

struct MonteCarloConfig {
  int reps = 100;
  int threads = 0;  // 0: hardware concurrency
  bool noiseless = false;
};

struct RunConfig {
  Scenario scenario = default_scenario();
  EstimationConfig estimation;
  MonteCarloConfig montecarlo;
  std::string data_dir = "data";
  std::string report_dir = "reports";

  void validate() const {
    scenario.validate();
    estimation.validate();
    if (montecarlo.reps < 2) throw config_error("config", "montecarlo.reps must be at least 2");
    if (montecarlo.threads < 0) throw config_error("config", "montecarlo.threads must be >= 0");
  }
};

namespace detail {

using nlohmann::json;

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw config_error("config", what + " must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != cols)
      throw config_error("config", what + " rows must all have the same length");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class T>
T get(const json& j, const char* key, const T& fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

inline const json& need(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw config_error("config", std::string("missing key '") + key + "'");
  return *it;
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  const Scenario& s = c.scenario;
  json edges = json::array();
  for (auto [h, k] : s.graph.edges()) edges.push_back({h + 1, k + 1});
  json sc;
  sc["n_patches"] = s.n_patches();
  sc["edges"] = edges;
  sc["port_distances"] = detail::matrix_to_json(s.graph.port_distances());
  sc["r"] = s.bio.r;
  sc["carrying_capacity"] = detail::vector_to_json(s.bio.carrying_capacity);
  sc["dispersion"] = detail::matrix_to_json(s.dispersion.rates());
  sc["row_sum_convention"] = to_string(s.dispersion.convention());
  sc["capture"] = {{"gamma", s.tech.gamma},
                   {"alpha", s.tech.alpha},
                   {"beta", s.tech.beta},
                   {"rho", detail::vector_to_json(s.tech.rho)}};
  sc["utility"] = {{"a0", s.utility.a0}, {"a1", s.utility.a1}, {"a2", detail::vector_to_json(s.utility.a2)}};
  sc["vessels_per_port"] = s.vessels_per_port;
  sc["horizon"] = s.horizon;
  sc["start"] = s.start.str();
  sc["initial_stock"] = detail::vector_to_json(s.initial_stock);
  sc["landed_price"] = s.landed_price;
  sc["fuel_price"] = s.fuel_price;
  sc["vessel_fuel_rate"] = s.vessel_fuel_rate;
  sc["expected_catch_per_trip"] = s.expected_catch_per_trip;
  sc["covariate_names"] = s.covariate_names;
  json cov = json::array();
  for (const auto& m : s.covariates) cov.push_back(detail::matrix_to_json(m));
  sc["covariates"] = cov;

  json j;
  j["seed"] = s.seed;
  j["data_dir"] = c.data_dir;
  j["report_dir"] = c.report_dir;
  j["scenario"] = sc;
  const auto& e = c.estimation;
  j["estimation"] = {{"ci_level", e.ci_level},
                     {"paper_mapping", e.paper_mapping},
                     {"regress_through_harvest", e.regress_through_harvest},
                     {"laplace", e.laplace},
                     {"beta", e.beta ? json(*e.beta) : json(nullptr)},
                     {"strict", e.strict},
                     {"sur_iterate", e.sur_iterate}};
  j["montecarlo"] = {{"reps", c.montecarlo.reps},
                     {"threads", c.montecarlo.threads},
                     {"noiseless", c.montecarlo.noiseless}};
  return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::get;
  using detail::need;
  RunConfig c;
  try {
    const auto& sc = need(j, "scenario");
    Scenario s;
    const int n = need(sc, "n_patches").get<int>();
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : need(sc, "edges")) {
      if (!e.is_array() || e.size() != 2) throw config_error("config", "edges must be [h, k] pairs");
      edges.emplace_back(e[0].get<int>() - 1, e[1].get<int>() - 1);
    }
    s.graph = PatchGraph(n, edges, detail::matrix_from_json(need(sc, "port_distances"), "port_distances"));
    s.bio = BioParams(need(sc, "r").get<double>(), detail::vector_from_json(need(sc, "carrying_capacity")));
    auto conv = parse_row_sum_convention(get<std::string>(sc, "row_sum_convention", "conservative_zero"));
    s.dispersion = DispersionMatrix(s.graph, detail::matrix_from_json(need(sc, "dispersion"), "dispersion"), conv);
    const auto& cap = need(sc, "capture");
    s.tech.gamma = need(cap, "gamma").get<double>();
    s.tech.alpha = need(cap, "alpha").get<double>();
    s.tech.beta = need(cap, "beta").get<double>();
    s.tech.rho = detail::vector_from_json(get<nlohmann::json>(cap, "rho", nlohmann::json::array()));
    const auto& ut = need(sc, "utility");
    s.utility.a0 = need(ut, "a0").get<double>();
    s.utility.a1 = need(ut, "a1").get<double>();
    s.utility.a2 = detail::vector_from_json(get<nlohmann::json>(ut, "a2", nlohmann::json::array()));
    s.vessels_per_port = need(sc, "vessels_per_port").get<std::vector<int>>();
    s.horizon = need(sc, "horizon").get<int>();
    auto start = YearMonth::parse(need(sc, "start").get<std::string>());
    if (!start) throw config_error("config", "start must be YYYY-MM");
    s.start = *start;
    s.initial_stock = detail::vector_from_json(need(sc, "initial_stock"));
    s.landed_price = need(sc, "landed_price").get<std::vector<double>>();
    s.fuel_price = need(sc, "fuel_price").get<std::vector<double>>();
    s.vessel_fuel_rate = need(sc, "vessel_fuel_rate").get<double>();
    s.expected_catch_per_trip = need(sc, "expected_catch_per_trip").get<double>();
    s.covariate_names = get<std::vector<std::string>>(sc, "covariate_names", {});
    for (const auto& m : get<nlohmann::json>(sc, "covariates", nlohmann::json::array()))
      s.covariates.push_back(detail::matrix_from_json(m, "covariates"));
    s.seed = get<std::uint64_t>(j, "seed", 1);
    c.scenario = std::move(s);

    c.data_dir = get<std::string>(j, "data_dir", c.data_dir);
    c.report_dir = get<std::string>(j, "report_dir", c.report_dir);
    if (auto it = j.find("estimation"); it != j.end()) {
      auto& e = c.estimation;
      e.ci_level = get<double>(*it, "ci_level", e.ci_level);
      e.paper_mapping = get<bool>(*it, "paper_mapping", e.paper_mapping);
      e.regress_through_harvest = get<bool>(*it, "regress_through_harvest", e.regress_through_harvest);
      e.laplace = get<bool>(*it, "laplace", e.laplace);
      if (auto b = it->find("beta"); b != it->end())
        e.beta = b->is_null() ? std::nullopt : std::optional<double>(b->get<double>());
      e.strict = get<bool>(*it, "strict", e.strict);
      e.sur_iterate = get<bool>(*it, "sur_iterate", e.sur_iterate);
    }
    if (auto it = j.find("montecarlo"); it != j.end()) {
      c.montecarlo.reps = get<int>(*it, "reps", c.montecarlo.reps);
      c.montecarlo.threads = get<int>(*it, "threads", c.montecarlo.threads);
      c.montecarlo.noiseless = get<bool>(*it, "noiseless", c.montecarlo.noiseless);
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config", std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config", "cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config", path + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const std::string& path, const RunConfig& c) {
  std::ofstream out(path);
  if (!out) throw config_error("config", "cannot write config file " + path);
  out << to_json(c).dump(2) << '\n';
}

}  // namespace fleetmig
