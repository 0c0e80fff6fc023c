#pragma once

// Parameter and capacity tables, as CSV and as aligned text.
//
// Aligned text layout: an optional title block, a blank line, then a header
// row. The first column is left-aligned and padded to the longest entry plus
// two spaces; every numeric column is right-aligned to the widest of its
// header and values, separated by two spaces. Numbers use fixed decimals per
// column; nonzero values below 1e-3 in magnitude switch to three-digit
// scientific notation with an uppercase exponent (-9.87E-08).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fleetmig/ingest.hpp"
#include "fleetmig/pipeline.hpp"
#include "fleetmig/stage1.hpp"
#include "fleetmig/stage2.hpp"

namespace fleetmig::report {

struct ParamRow {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  std::optional<int> decimals;  // overrides the table's estimate decimals
};

struct EquationRow {
  std::string name;
  long obs = 0;
  long params = 0;
  double r_squared = 0.0;
};

struct ParamTable {
  std::string title;
  std::vector<ParamRow> rows;
  std::vector<EquationRow> equations;
  int estimate_decimals = 4;
  int se_decimals = 4;
  int z_decimals = 2;
  int r2_decimals = 2;
};

struct CapacityRow {
  std::string name;
  double upper80 = 0.0;
  double upper90 = 0.0;
  double mean = 0.0;
};

struct CapacityTable {
  std::string title;
  std::vector<CapacityRow> rows;
  int decimals = 3;
};

inline std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  if (v != 0.0 && std::abs(v) < 1e-3) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2E", v);
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
  return s;
}

namespace detail {

inline std::string align(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        line += row[c] + std::string(width[0] - row[c].size(), ' ');
      } else {
        line += "  " + std::string(width[c] - row[c].size(), ' ') + row[c];
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace detail

inline std::string to_text(const ParamTable& t) {
  std::string out;
  if (!t.title.empty()) out += t.title + "\n\n";
  std::vector<std::vector<std::string>> cells{{"Parameter", "Estimate", "St. Error", "z-value"}};
  for (const auto& r : t.rows)
    cells.push_back({r.name, fixed(r.estimate, r.decimals.value_or(t.estimate_decimals)),
                     fixed(r.se, t.se_decimals), fixed(r.z, t.z_decimals)});
  out += detail::align(cells);
  if (!t.equations.empty()) {
    out += "\n";
    std::vector<std::vector<std::string>> eq{{"Equation", "Obs", "Parameters", "R2"}};
    for (const auto& e : t.equations)
      eq.push_back({e.name, std::to_string(e.obs), std::to_string(e.params),
                    fixed(e.r_squared, t.r2_decimals)});
    out += detail::align(eq);
  }
  return out;
}

inline std::string to_csv(const ParamTable& t) {
  std::string out = "parameter,estimate,std_error,z_value\n";
  for (const auto& r : t.rows)
    out += r.name + "," + csv::format(r.estimate) + "," + csv::format(r.se) + "," +
           csv::format(r.z) + "\n";
  return out;
}

inline std::string equations_csv(const ParamTable& t) {
  std::string out = "equation,obs,parameters,r_squared\n";
  for (const auto& e : t.equations)
    out += e.name + "," + std::to_string(e.obs) + "," + std::to_string(e.params) + "," +
           csv::format(e.r_squared) + "\n";
  return out;
}

inline std::string to_text(const CapacityTable& t) {
  std::string out;
  if (!t.title.empty()) out += t.title + "\n\n";
  std::vector<std::vector<std::string>> cells{{"", "Upper limit CI", "", "Mean"},
                                              {"Patch", "At 80%", "At 90%", "Estimated"}};
  for (const auto& r : t.rows)
    cells.push_back({r.name, fixed(r.upper80, t.decimals), fixed(r.upper90, t.decimals),
                     fixed(r.mean, t.decimals)});
  return out + detail::align(cells);
}

inline std::string to_csv(const CapacityTable& t) {
  std::string out = "patch,upper_80,upper_90,mean\n";
  for (const auto& r : t.rows)
    out += r.name + "," + csv::format(r.upper80) + "," + csv::format(r.upper90) + "," +
           csv::format(r.mean) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Builders from estimation results
// ---------------------------------------------------------------------------

inline ParamRow row_of(const econ::EstimateSet& est, const std::string& label,
                       const std::string& name) {
  auto i = est.index_of(label);
  double se = est.std_errors[i];
  double v = est.estimates[i];
  return {name, v, se, se > 0.0 ? v / se : std::numeric_limits<double>::quiet_NaN(), {}};
}

inline std::vector<EquationRow> equation_rows(const econ::EstimateSet& est) {
  std::vector<EquationRow> out;
  for (const auto& e : est.equations)
    out.push_back({e.name, static_cast<long>(e.n_obs), static_cast<long>(e.n_params), e.r_squared});
  return out;
}

/// Demand intercepts per year, price coefficients per year and port, and the
/// effort elasticity per year.
inline ParamTable stage1_table(const Stage1Result& s1) {
  ParamTable t;
  t.title = "Stage 1 reduced form";
  const auto& est = s1.estimates;
  for (int y : s1.years)
    if (est.has(labels::a0(y))) t.rows.push_back(row_of(est, labels::a0(y), labels::a0(y)));
  for (int y : s1.years)
    for (int p : s1.ports)
      if (est.has(labels::a1(y, p))) t.rows.push_back(row_of(est, labels::a1(y, p), labels::a1(y, p)));
  for (int y : s1.years)
    if (est.has(labels::a2(y))) t.rows.push_back(row_of(est, labels::a2(y), labels::a2(y)));
  for (const auto& c : s1.covariate_names)
    t.rows.push_back(row_of(est, labels::rho(c), labels::rho(c)));
  t.equations = equation_rows(est);
  return t;
}

/// Level-corrected catchability and effort elasticity per year.
inline ParamTable capture_table(const std::vector<CaptureYear>& cap) {
  ParamTable t;
  t.title = "Capture function";
  t.estimate_decimals = 5;
  for (const auto& c : cap) {
    double se = c.gamma * c.lngamma_se;  // delta method
    t.rows.push_back({"gamma_" + std::to_string(c.year), c.gamma, se,
                      c.lngamma_se > 0.0 ? c.lngamma / c.lngamma_se : std::numeric_limits<double>::quiet_NaN(),
                      {}});
  }
  for (const auto& c : cap)
    t.rows.push_back({"alpha_" + std::to_string(c.year), c.alpha, c.alpha_se,
                      c.alpha_se > 0.0 ? c.alpha / c.alpha_se : std::numeric_limits<double>::quiet_NaN(),
                      {}});
  return t;
}

inline ParamTable stage2_table(const econ::EstimateSet& reduced, const PatchGraph& graph) {
  ParamTable t;
  t.title = "Stage 2 reduced form";
  t.estimate_decimals = 5;
  t.se_decimals = 5;
  const int n = graph.n_patches();
  for (int k = 0; k < n; ++k) t.rows.push_back(row_of(reduced, labels::alpha0(k), labels::alpha0(k)));
  for (int k = 0; k < n; ++k) t.rows.push_back(row_of(reduced, labels::alpha1(k), labels::alpha1(k)));
  for (int k = 0; k < n; ++k)
    for (int h : graph.neighbors(k)) {
      auto l = labels::d(h, k, n);
      t.rows.push_back(row_of(reduced, l, l));
    }
  t.equations = equation_rows(reduced);
  return t;
}

/// r, own-patch rates d_kk, then d_hk ordered by (h, k).
inline ParamTable structural_table(const StructuralEstimates& s) {
  ParamTable t;
  t.title = s.mapping == StructuralMapping::alternative ? "Growth and migration (alternative mapping)"
                                                  : "Growth and migration";
  t.estimate_decimals = 5;
  auto z = [](double v, double se) {
    return se > 0.0 ? v / se : std::numeric_limits<double>::quiet_NaN();
  };
  const int n = static_cast<int>(s.d_own.size());
  t.rows.push_back({"r", s.r, s.r_se, z(s.r, s.r_se), {}});
  for (const auto& d : s.d_own)
    t.rows.push_back({labels::d(d.from, d.to, n), d.value, d.se, z(d.value, d.se), {}});
  auto pairs = s.d_pair;
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    return std::pair(a.from, a.to) < std::pair(b.from, b.to);
  });
  for (const auto& d : pairs)
    t.rows.push_back({labels::d(d.from, d.to, n), d.value, d.se, z(d.value, d.se), {}});
  t.rows.push_back({"K_total", s.K_total, s.K_total_se, z(s.K_total, s.K_total_se), 1});
  return t;
}

inline CapacityTable capacity_table(const StructuralEstimates& s) {
  CapacityTable t;
  t.title = "Carrying capacity per patch (tons)";
  t.decimals = 1;
  for (const auto& c : s.capacity)
    t.rows.push_back({"K" + labels::patch_id(c.patch), c.k_upper80, c.k_upper90, c.k_point});
  return t;
}

/// Chosen and rescaled capacities with the fallback flags.
inline std::string capacity_detail_csv(const StructuralEstimates& s) {
  std::string out =
      "patch_id,alpha1,alpha1_se,k_point,k_chosen,k_final,fallback,unidentified,rescale_factor,level\n";
  for (const auto& c : s.capacity)
    out += labels::patch_id(c.patch) + "," + csv::format(c.alpha1) + "," + csv::format(c.alpha1_se) +
           "," + csv::format(c.k_point) + "," + csv::format(c.k_chosen) + "," +
           csv::format(c.k_final) + "," + (c.fallback ? "1" : "0") + "," +
           (c.unidentified ? "1" : "0") + "," + csv::format(s.rescale_factor) + "," +
           csv::format(s.level) + "\n";
  return out;
}

inline std::string biomass_csv(const BiomassPanel& b) {
  std::string out = "patch_id,year,month,biomass_tons\n";
  std::vector<std::pair<Cell, double>> rows(b.biomass.begin(), b.biomass.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& c) {
    return std::pair(a.first.second, a.first.first) < std::pair(c.first.second, c.first.first);
  });
  for (const auto& [cell, x] : rows) {
    auto ym = YearMonth::from_ordinal(cell.first);
    out += labels::patch_id(cell.second) + "," + std::to_string(ym.year) + "," +
           std::to_string(ym.month) + "," + csv::format(x) + "\n";
  }
  return out;
}

}  // namespace fleetmig::report
