#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fleetmig/simulator.hpp"

namespace fleetmig::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "fleetmig_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Single patch, single port, constant prices.
inline Scenario one_patch_scenario(int vessels, int horizon) {
  Scenario s;
  s.graph = PatchGraph(1, {}, Eigen::MatrixXd::Constant(1, 1, 30.0));
  s.bio = BioParams(0.2, Eigen::VectorXd::Constant(1, 1e5));
  s.dispersion = DispersionMatrix::zero(s.graph);
  s.tech = {0.08, 1.0, 0.8, {}};
  s.utility = {-12.0, 1.2, {}, 1.0};
  s.vessels_per_port = {vessels};
  s.horizon = horizon;
  s.initial_stock = Eigen::VectorXd::Constant(1, 1e5);
  s.landed_price.assign(static_cast<std::size_t>(horizon), 300.0);
  s.fuel_price.assign(static_cast<std::size_t>(horizon), 0.8);
  s.vessel_fuel_rate = 150.0;
  s.expected_catch_per_trip = 500.0;
  return s;
}

/// 2 x 2 grid with two ports over two years: small enough for fast
/// end-to-end runs.
inline Scenario tiny_scenario() {
  Scenario s = default_scenario();
  Eigen::MatrixXd dist(2, 4);
  dist << 40.0, 95.0, 100.0, 130.0, 100.0, 130.0, 40.0, 95.0;
  s.graph = PatchGraph::grid(2, 2, dist);
  Eigen::VectorXd K(4);
  K << 60e3, 80e3, 90e3, 70e3;
  s.bio = BioParams(0.25, K);
  Eigen::MatrixXd off = Eigen::MatrixXd::Zero(4, 4);
  off(0, 1) = 0.05;
  off(1, 0) = 0.03;
  off(0, 2) = 0.04;
  off(2, 0) = 0.06;
  off(1, 3) = 0.05;
  off(3, 1) = 0.02;
  off(2, 3) = 0.08;
  off(3, 2) = 0.03;
  s.dispersion = DispersionMatrix::conservative(s.graph, off);
  s.vessels_per_port = {60, 60};
  s.horizon = 24;
  s.initial_stock = K.cwiseProduct(Eigen::Vector4d(0.9, 0.6, 0.5, 0.8));
  s.landed_price.resize(24);
  s.fuel_price.resize(24);
  return s;
}

}  // namespace fleetmig::testing
