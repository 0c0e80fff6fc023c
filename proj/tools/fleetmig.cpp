#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "fleetmig/fleetmig.hpp"

namespace fs = std::filesystem;
using namespace fleetmig;

namespace {

struct Paths {
  std::string dir;
  std::string operator()(const std::string& name) const { return (fs::path(dir) / name).string(); }
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw config_error("cli", "cannot create directory '" + dir + "': " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  auto out = csv::open_out(path);
  out << text;
}

std::string without_module(const Error& e) {
  std::string what = e.what();
  std::string prefix = e.module() + ": ";
  return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

std::string kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::config:
      return "config";
    case ErrorKind::data:
      return "data";
    case ErrorKind::numerical:
      return "numerical";
  }
  return "unknown";
}

void report_error(const std::string& kind, const std::string& module, const std::string& message) {
  nlohmann::json j{{"status", "error"}, {"kind", kind}, {"module", module}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct SimulateFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data_dir;
  std::optional<std::string> convention;
};

struct EstimateFlags {
  std::optional<std::string> data_dir;
  std::optional<std::string> report_dir;
  bool paper_mapping = false;
  bool no_harvest = false;
  std::optional<double> ci_level;
  std::optional<double> beta;
  bool calibrate_beta = false;
  bool laplace = false;
  bool lenient = false;
  bool sur_iterate = false;
};

struct MonteCarloFlags {
  std::optional<int> reps;
  std::optional<int> threads;
  bool noiseless = false;
  std::optional<std::string> out_dir;
};

DispersionMatrix with_convention(const Scenario& s, RowSumConvention conv) {
  Eigen::MatrixXd d = s.dispersion.rates();
  for (Eigen::Index h = 0; h < d.rows(); ++h) {
    double off = d.row(h).sum() - d(h, h);
    if (conv == RowSumConvention::conservative_zero) d(h, h) = -off;
    if (conv == RowSumConvention::paper_one) d(h, h) = 1.0 - off;
  }
  return DispersionMatrix(s.graph, d, conv);
}

int cmd_init_config(const std::string& out) {
  RunConfig c;
  if (out == "-") {
    std::cout << to_json(c).dump(2) << '\n';
  } else {
    save_config(out, c);
    std::cout << "wrote " << out << '\n';
  }
  return 0;
}

int cmd_simulate(const std::string& config_path, const SimulateFlags& f) {
  RunConfig c = load_config(config_path);
  Scenario& s = c.scenario;
  if (f.seed) s.seed = *f.seed;
  if (f.data_dir) c.data_dir = *f.data_dir;
  if (f.convention) s.dispersion = with_convention(s, parse_row_sum_convention(*f.convention));
  s.validate();

  auto t0 = std::chrono::steady_clock::now();
  SimulationResult r = run(s);
  ensure_dir(c.data_dir);
  Paths p{c.data_dir};
  write_trips(p("trips.csv"), r.records);
  write_roster(p("roster.csv"), scenario_roster(s));
  write_prices(p("prices.csv"), scenario_prices(s));
  write_distances(p("distances.csv"), s.graph.port_distances());
  if (!s.covariate_names.empty())
    write_covariates(p("covariates.csv"), s.covariate_names, scenario_covariates(s));
  write_truth(p("truth.csv"), r);
  write_annual_totals(p("annual_totals.csv"), annual_totals(r.months, r.biomass));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::printf("simulate: seed %llu, %zu records, %zu periods, %d depletion events%s -> %s (%.2f s)\n",
              static_cast<unsigned long long>(s.seed), r.records.size(), r.months.size(),
              r.depletion_events(), r.terminated_early ? ", terminated early" : "",
              c.data_dir.c_str(), secs);
  return 0;
}

MarketPanel load_panel(const RunConfig& c, const EstimationConfig& e, PatchGraph& graph) {
  const Scenario& s = c.scenario;
  Paths p{c.data_dir};
  ParseOptions po{e.strict, s.n_patches(), s.graph.n_ports()};

  auto note = [](const std::string& file, const auto& parsed) {
    for (const auto& i : parsed.issues)
      std::fprintf(stderr, "warning: %s:%zu: %s (row skipped)\n", file.c_str(), i.line, i.message.c_str());
  };

  auto distances = parse_distances(p("distances.csv"), po);
  note(p("distances.csv"), distances);
  std::vector<std::pair<int, int>> edges = s.graph.edges();
  graph = PatchGraph(s.n_patches(), edges, distance_matrix(distances.rows, s.graph.n_ports(), s.n_patches()));

  auto trips = parse_trips(p("trips.csv"), po);
  note(p("trips.csv"), trips);
  auto roster = parse_roster(p("roster.csv"), po);
  note(p("roster.csv"), roster);
  auto prices = parse_prices(p("prices.csv"), po);
  note(p("prices.csv"), prices);

  std::vector<std::string> cov_names;
  std::vector<CovariateRow> cov_rows;
  if (!s.covariate_names.empty()) {
    auto cov = parse_covariates(p("covariates.csv"), po);
    note(p("covariates.csv"), cov);
    cov_names = cov.extra_columns;
    cov_rows = std::move(cov.rows);
  }
  PanelSettings ps{s.vessel_fuel_rate, s.expected_catch_per_trip, e.laplace};
  return build_panel(std::move(trips.rows), roster.rows, prices.rows, graph, ps, cov_names, cov_rows);
}

std::string diagnostics_csv(const MarketPanel& panel, const EstimationResult& r) {
  std::string out = "item,value\n";
  auto add = [&](const std::string& k, const std::string& v) { out += k + "," + v + "\n"; };
  add("markets", std::to_string(panel.diagnostics.markets));
  add("zero_share_markets", std::to_string(panel.diagnostics.zero_share_markets));
  add("zero_share_cells", std::to_string(panel.diagnostics.zero_share_cells));
  add("no_outside_markets", std::to_string(panel.diagnostics.no_outside_markets));
  add("stage1_demand_rows", std::to_string(r.stage1.demand_rows));
  add("stage1_capture_rows", std::to_string(r.stage1.capture_rows));
  add("stage1_dropped_zero_share", std::to_string(r.stage1.dropped_zero_share));
  add("stage1_dropped_nonpositive_price", std::to_string(r.stage1.dropped_nonpositive_price));
  add("stage1_dropped_no_outside", std::to_string(r.stage1.dropped_no_outside_markets));
  add("stage1_iterations", std::to_string(r.stage1.estimates.iterations));
  add("beta_used", csv::format(r.biomass.beta_used));
  add("biomass_calibration", r.biomass.calibration);
  for (int k = 0; k < r.rows.n_patches; ++k)
    add("stage2_dropped_" + labels::patch_id(k), std::to_string(r.rows.dropped[static_cast<std::size_t>(k)]));
  add("aux_r", csv::format(r.aux.r));
  add("aux_K_total", csv::format(r.aux.K_total));
  add("capacity_rescale_factor", csv::format(r.structural.rescale_factor));
  int fallback = 0, unidentified = 0;
  for (const auto& c : r.structural.capacity) {
    fallback += c.fallback ? 1 : 0;
    unidentified += c.unidentified ? 1 : 0;
  }
  add("capacity_fallback_patches", std::to_string(fallback));
  add("capacity_unidentified_patches", std::to_string(unidentified));
  return out;
}

int cmd_estimate(const std::string& config_path, const EstimateFlags& f) {
  RunConfig c = load_config(config_path);
  EstimationConfig& e = c.estimation;
  if (f.data_dir) c.data_dir = *f.data_dir;
  if (f.report_dir) c.report_dir = *f.report_dir;
  if (f.paper_mapping) e.paper_mapping = true;
  if (f.no_harvest) e.regress_through_harvest = false;
  if (f.ci_level) e.ci_level = *f.ci_level;
  if (f.beta) e.beta = *f.beta;
  if (f.calibrate_beta) e.beta.reset();
  if (f.laplace) e.laplace = true;
  if (f.lenient) e.strict = false;
  if (f.sur_iterate) e.sur_iterate = true;
  e.validate();

  auto t0 = std::chrono::steady_clock::now();
  PatchGraph graph;
  MarketPanel panel = load_panel(c, e, graph);
  std::map<int, double> totals;
  const std::string totals_path = Paths{c.data_dir}("annual_totals.csv");
  if (fs::exists(totals_path)) totals = read_annual_totals(totals_path);
  EstimationResult r = estimate(panel, graph, totals, e.options());

  ensure_dir(c.report_dir);
  Paths p{c.report_dir};
  auto t1 = report::stage1_table(r.stage1);
  write_text(p("stage1_params.csv"), report::to_csv(t1));
  write_text(p("stage1_equations.csv"), report::equations_csv(t1));
  write_text(p("stage1_params.txt"), report::to_text(t1));
  auto cap = report::capture_table(r.capture);
  write_text(p("capture_params.csv"), report::to_csv(cap));
  write_text(p("capture_params.txt"), report::to_text(cap));
  write_text(p("biomass.csv"), report::biomass_csv(r.biomass));
  auto t2 = report::stage2_table(r.reduced, graph);
  write_text(p("stage2_params.csv"), report::to_csv(t2));
  write_text(p("stage2_equations.csv"), report::equations_csv(t2));
  write_text(p("stage2_params.txt"), report::to_text(t2));
  auto st = report::structural_table(r.structural);
  write_text(p("structural_params.csv"), report::to_csv(st));
  write_text(p("structural_params.txt"), report::to_text(st));
  auto kt = report::capacity_table(r.structural);
  write_text(p("capacity.csv"), report::to_csv(kt));
  write_text(p("capacity.txt"), report::to_text(kt));
  write_text(p("capacity_detail.csv"), report::capacity_detail_csv(r.structural));
  write_text(p("diagnostics.csv"), diagnostics_csv(panel, r));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::printf("estimate: %d markets, beta %.4g (%s), r %.5g, K_total %.6g -> %s (%.2f s)\n",
              panel.diagnostics.markets, r.biomass.beta_used, r.biomass.calibration.c_str(),
              r.structural.r, r.structural.K_total, c.report_dir.c_str(), secs);
  return 0;
}

int cmd_montecarlo(const std::string& config_path, const MonteCarloFlags& f) {
  RunConfig c = load_config(config_path);
  if (f.reps) c.montecarlo.reps = *f.reps;
  if (f.threads) c.montecarlo.threads = *f.threads;
  if (f.noiseless) c.montecarlo.noiseless = true;
  std::string out_dir = f.out_dir.value_or(c.report_dir);
  c.validate();

  auto t0 = std::chrono::steady_clock::now();
  auto rep = monte_carlo(c.scenario, c.montecarlo.reps, c.estimation.options(), c.montecarlo.noiseless,
                         c.montecarlo.threads, c.estimation.ci_level);
  ensure_dir(out_dir);
  Paths p{out_dir};
  write_text(p("montecarlo_parameters.csv"), parameters_csv(rep));
  write_text(p("montecarlo_replications.csv"), replications_csv(rep));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  int d_pass = 0, k_pass = 0;
  for (const auto& r : rep.replications) {
    if (!r.ok) continue;
    d_pass += r.share_d_within >= 0.8 ? 1 : 0;
    k_pass += r.share_k_within >= 0.8 ? 1 : 0;
  }
  std::printf(
      "montecarlo: %d replications, %d failed; d_hk >=80%% within 0.1 in %d, K_k >=80%% within 15%% in %d "
      "-> %s (%.1f s)\n",
      c.montecarlo.reps, rep.failures, d_pass, k_pass, out_dir.c_str(), secs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fleet choice and patch migration estimator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fleetmig 1.0.0");

  std::string config_path;
  std::string init_out = "fleetmig.json";
  auto* init = app.add_subcommand("init-config", "Write the default desk scenario config");
  init->add_option("-o,--output", init_out, "Output path ('-' for stdout)");

  SimulateFlags sf;
  auto* sim = app.add_subcommand("simulate", "Simulate trips, prices and true biomass");
  sim->add_option("-c,--config", config_path, "Config file")->required();
  sim->add_option("--seed", sf.seed, "RNG seed");
  sim->add_option("--data", sf.data_dir, "Output data directory");
  sim->add_option("--row-sum-convention", sf.convention,
                  "Dispersion row-sum convention; the diagonal is rederived from the off-diagonal rates")
      ->check(CLI::IsMember({"conservative_zero", "paper_one", "unconstrained"}));

  EstimateFlags ef;
  auto* est = app.add_subcommand("estimate", "Estimate stage 1, biomass, stage 2 and structure");
  est->add_option("-c,--config", config_path, "Config file")->required();
  est->add_option("--data", ef.data_dir, "Input data directory");
  est->add_option("--reports", ef.report_dir, "Report output directory");
  est->add_flag("--paper-mapping", ef.paper_mapping, "Use d_kk = r - alpha0 for own-patch rates");
  est->add_flag("--no-harvest", ef.no_harvest, "Regress next-period biomass without adding harvest");
  est->add_option("--ci-level", ef.ci_level, "Confidence level (0.80, 0.90, 0.95)");
  auto* beta = est->add_option("--beta", ef.beta, "Fixed biomass elasticity of demand");
  est->add_flag("--calibrate-beta", ef.calibrate_beta, "Calibrate beta against annual totals")->excludes(beta);
  est->add_flag("--laplace", ef.laplace, "Add 1/2 to every choice count");
  est->add_flag("--lenient", ef.lenient, "Skip malformed rows with a warning");
  est->add_flag("--sur-iterate", ef.sur_iterate, "Iterate feasible GLS to convergence");

  MonteCarloFlags mf;
  auto* mc = app.add_subcommand("montecarlo", "Repeat simulate + estimate over seeds 1..reps");
  mc->add_option("-c,--config", config_path, "Config file")->required();
  mc->add_option("--reps", mf.reps, "Number of replications");
  mc->add_option("--threads", mf.threads, "Worker threads (0: all processors)");
  mc->add_flag("--noiseless", mf.noiseless, "Use expected shares instead of sampled choices");
  mc->add_option("--out", mf.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("config", "cli", e.what());
    return exit_code(ErrorKind::config);
  }

  try {
    if (*init) return cmd_init_config(init_out);
    if (*sim) return cmd_simulate(config_path, sf);
    if (*est) return cmd_estimate(config_path, ef);
    if (*mc) return cmd_montecarlo(config_path, mf);
  } catch (const Error& e) {
    report_error(kind_name(e.kind()), e.module(), without_module(e));
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report_error("internal", "cli", e.what());
    return 1;
  }
  return 0;
}
