#pragma once

// End-to-end estimation: market panel -> stage 1 -> biomass levels -> stage 2
// -> structural parameters.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fleetmig/error.hpp"
#include "fleetmig/ingest.hpp"
#include "fleetmig/patch_model.hpp"
#include "fleetmig/stage1.hpp"
#include "fleetmig/stage2.hpp"

namespace fleetmig {

struct EstimationOptions {
  double ci_level = 0.9;
  StructuralMapping mapping = StructuralMapping::canonical;
  bool regress_through_harvest = true;
  std::optional<double> beta;  // nullopt: calibrate from annual totals
  bool sur_iterate = false;
};

struct CaptureYear {
  int year = 0;
  double gamma = 0.0;
  double lngamma = 0.0;  // level-corrected
  double lngamma_se = 0.0;
  double alpha = 0.0;
  double alpha_se = 0.0;
};

struct EstimationResult {
  Stage1Result stage1;
  BiomassPanel biomass;
  MigrationRows rows;
  econ::EstimateSet reduced;
  AuxFit aux;
  StructuralEstimates structural;
  std::vector<CaptureYear> capture;
};

inline EstimationResult estimate(const MarketPanel& panel, const PatchGraph& graph,
                                 const std::map<int, double>& annual_totals,
                                 const EstimationOptions& opt = {}) {
  if (panel.n_patches != graph.n_patches())
    throw config_error("pipeline", "panel and patch graph disagree on the patch count");
  if (!opt.beta && annual_totals.empty())
    throw config_error("pipeline", "calibrating beta requires annual biomass totals");

  EstimationResult out;
  Stage1Spec s1;
  s1.panel = panel;
  s1.options.sur.iterate = opt.sur_iterate;
  out.stage1 = fit_stage1(s1);

  BiomassOptions bo;
  bo.beta = opt.beta;
  bo.annual_totals = annual_totals;
  if (!opt.beta) bo.year_links = intercept_year_links(out.stage1);
  out.biomass = recover_biomass(out.stage1.effects, panel.n_patches, bo);

  for (int y : out.stage1.years) {
    if (!out.stage1.estimates.has(labels::lngamma(y))) continue;
    CaptureYear c;
    c.year = y;
    c.lngamma = out.stage1.estimates.value(labels::lngamma(y)) - out.biomass.level_offset.at(y);
    c.lngamma_se = out.stage1.estimates.std_error(labels::lngamma(y));
    c.gamma = std::exp(c.lngamma);
    c.alpha = out.stage1.estimates.value(labels::a2(y));
    c.alpha_se = out.stage1.estimates.std_error(labels::a2(y));
    out.capture.push_back(c);
  }

  Stage2Spec s2;
  s2.biomass = out.biomass;
  s2.graph = graph;
  s2.harvest = panel_harvest(panel);
  s2.regress_through_harvest = opt.regress_through_harvest;
  out.rows = build_migration_rows(s2);
  out.reduced = fit_stage2(out.rows, {econ::Balance::subset, opt.sur_iterate, 50, 1e-8});
  auto [X, H] = aggregate_series(s2);
  out.aux = fit_aux_total(X, H);
  out.structural = recover_structure(out.reduced, out.aux, graph, opt.ci_level, opt.mapping);
  return out;
}

}  // namespace fleetmig
