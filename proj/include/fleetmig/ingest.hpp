#pragma once

// Trip-record CSV schemas and aggregation into the port x month market panel.
//
//   trips.csv      vessel_id,port_id,year,month,patch_id,catch_tons   (patch_id 0 = stayed in port)
//   roster.csv     vessel_id,port_id,from_ym,to_ym                    (YYYY-MM, inclusive)
//   prices.csv     port_id,year,month,landed_price,fuel_price
//   distances.csv  port_id,patch_id,nmi
//   covariates.csv patch_id,year,month,<one column per covariate>     (optional)
//
// Ids in files are 1-based; panel indices are 0-based.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <utility>
#include <vector>

#include "fleetmig/error.hpp"
#include "fleetmig/fleet.hpp"
#include "fleetmig/patch_model.hpp"

namespace fleetmig {

struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12

  int ordinal() const noexcept { return year * 12 + (month - 1); }
  static YearMonth from_ordinal(int ord) { return {ord / 12, ord % 12 + 1}; }
  YearMonth plus(int months) const { return from_ordinal(ordinal() + months); }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
  }

  static std::optional<YearMonth> parse(std::string_view s) {
    if (s.size() != 7 || s[4] != '-') return std::nullopt;
    int y = 0, m = 0;
    auto r1 = std::from_chars(s.data(), s.data() + 4, y);
    auto r2 = std::from_chars(s.data() + 5, s.data() + 7, m);
    if (r1.ec != std::errc() || r1.ptr != s.data() + 4 || r2.ec != std::errc() ||
        r2.ptr != s.data() + 7 || m < 1 || m > 12)
      return std::nullopt;
    return YearMonth{y, m};
  }

  friend auto operator<=>(const YearMonth&, const YearMonth&) = default;
};

struct TripRecord {
  int vessel_id = 0;
  int port_id = 0;
  int year = 0;
  int month = 1;
  int patch_id = 0;  // 0 = outside option
  double catch_tons = 0.0;

  YearMonth ym() const { return {year, month}; }
  friend bool operator==(const TripRecord&, const TripRecord&) = default;
};

struct RosterEntry {
  int vessel_id = 0;
  int port_id = 0;
  YearMonth from;
  YearMonth to;
  friend bool operator==(const RosterEntry&, const RosterEntry&) = default;
};

struct PriceRow {
  int port_id = 0;
  int year = 0;
  int month = 1;
  double landed_price = 0.0;
  double fuel_price = 0.0;
  friend bool operator==(const PriceRow&, const PriceRow&) = default;
};

struct DistanceRow {
  int port_id = 0;
  int patch_id = 0;
  double nmi = 0.0;
};

struct CovariateRow {
  int patch_id = 0;
  int year = 0;
  int month = 1;
  std::vector<double> values;
};

struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

template <class T>
struct Parsed {
  std::vector<T> rows;
  std::vector<ParseIssue> issues;
  std::vector<std::string> extra_columns;  // covariate names for covariates.csv
};

struct ParseOptions {
  bool strict = true;  // abort on the first malformed row
  int n_patches = 0;   // 0 = do not range-check patch ids
  int n_ports = 0;     // 0 = do not range-check port ids
};

// ---------------------------------------------------------------------------
// CSV primitives
// ---------------------------------------------------------------------------

namespace csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<int> to_int(std::string_view s) {
  int v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

/// Shortest representation that parses back to the same double.
inline std::string format(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::string>> lines;  // (line number, raw text)
  std::map<std::string, std::size_t> column;
};

inline Table read(const std::string& path, const std::vector<std::string>& required) {
  std::ifstream in(path);
  if (!in) throw data_error("ingest", "cannot open '" + path + "'");
  Table t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
        line.erase(0, 3);
      for (auto f : split(line)) t.header.emplace_back(f);
      for (std::size_t i = 0; i < t.header.size(); ++i) t.column[t.header[i]] = i;
      have_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    t.lines.emplace_back(lineno, line);
  }
  if (!have_header) throw data_error("ingest", "'" + path + "' has no header");
  for (const auto& c : required)
    if (!t.column.count(c))
      throw data_error("ingest", "'" + path + "' is missing column '" + c + "'");
  return t;
}

// Per-row field access that records the first problem.
struct Row {
  std::vector<std::string_view> fields;
  const Table* table;
  std::string error;

  std::string_view raw(const std::string& name) {
    auto i = table->column.at(name);
    if (i >= fields.size()) {
      if (error.empty()) error = "missing field '" + name + "'";
      return {};
    }
    return fields[i];
  }
  int integer(const std::string& name) {
    auto v = to_int(raw(name));
    if (!v && error.empty()) error = "non-integer " + name + " '" + std::string(raw(name)) + "'";
    return v.value_or(0);
  }
  double number(const std::string& name) {
    auto v = to_double(raw(name));
    if (!v && error.empty()) error = "non-numeric " + name + " '" + std::string(raw(name)) + "'";
    return v.value_or(0.0);
  }
  YearMonth year_month(const std::string& name) {
    auto v = YearMonth::parse(raw(name));
    if (!v && error.empty()) error = "bad " + name + " '" + std::string(raw(name)) + "' (YYYY-MM)";
    return v.value_or(YearMonth{});
  }
  void require(bool ok, const std::string& message) {
    if (!ok && error.empty()) error = message;
  }
};

template <class T, class Fn>
Parsed<T> parse_rows(const std::string& path, const std::vector<std::string>& required,
                     const ParseOptions& opt, Fn&& convert) {
  Table t = read(path, required);
  Parsed<T> out;
  for (const auto& [lineno, text] : t.lines) {
    Row row{split(text), &t, {}};
    T value = convert(row);
    if (!row.error.empty()) {
      if (opt.strict)
        throw data_error("ingest", path + ":" + std::to_string(lineno) + ": " + row.error);
      out.issues.push_back({lineno, row.error});
      continue;
    }
    out.rows.push_back(std::move(value));
  }
  return out;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("ingest", "cannot write '" + path + "'");
  return out;
}

}  // namespace csv

// ---------------------------------------------------------------------------
// File readers / writers
// ---------------------------------------------------------------------------

inline Parsed<TripRecord> parse_trips(const std::string& path, const ParseOptions& opt = {}) {
  return csv::parse_rows<TripRecord>(
      path, {"vessel_id", "port_id", "year", "month", "patch_id", "catch_tons"}, opt,
      [&](csv::Row& row) {
        TripRecord r;
        r.vessel_id = row.integer("vessel_id");
        r.port_id = row.integer("port_id");
        r.year = row.integer("year");
        r.month = row.integer("month");
        r.patch_id = row.integer("patch_id");
        r.catch_tons = row.number("catch_tons");
        row.require(r.month >= 1 && r.month <= 12, "month out of range");
        row.require(r.catch_tons >= 0.0, "negative catch_tons");
        row.require(r.port_id >= 1 && (opt.n_ports == 0 || r.port_id <= opt.n_ports),
                    "unknown port_id " + std::to_string(r.port_id));
        row.require(r.patch_id >= 0 && (opt.n_patches == 0 || r.patch_id <= opt.n_patches),
                    "unknown patch_id " + std::to_string(r.patch_id));
        row.require(r.patch_id != 0 || r.catch_tons == 0.0, "positive catch for outside option");
        return r;
      });
}

inline void write_trips(const std::string& path, const std::vector<TripRecord>& records) {
  auto out = csv::open_out(path);
  out << "vessel_id,port_id,year,month,patch_id,catch_tons\n";
  for (const auto& r : records)
    out << r.vessel_id << ',' << r.port_id << ',' << r.year << ',' << r.month << ',' << r.patch_id
        << ',' << csv::format(r.catch_tons) << '\n';
}

inline Parsed<RosterEntry> parse_roster(const std::string& path, const ParseOptions& opt = {}) {
  return csv::parse_rows<RosterEntry>(
      path, {"vessel_id", "port_id", "from_ym", "to_ym"}, opt, [&](csv::Row& row) {
        RosterEntry e;
        e.vessel_id = row.integer("vessel_id");
        e.port_id = row.integer("port_id");
        e.from = row.year_month("from_ym");
        e.to = row.year_month("to_ym");
        row.require(e.port_id >= 1 && (opt.n_ports == 0 || e.port_id <= opt.n_ports),
                    "unknown port_id " + std::to_string(e.port_id));
        row.require(!(e.to < e.from), "to_ym precedes from_ym");
        return e;
      });
}

inline void write_roster(const std::string& path, const std::vector<RosterEntry>& roster) {
  auto out = csv::open_out(path);
  out << "vessel_id,port_id,from_ym,to_ym\n";
  for (const auto& e : roster)
    out << e.vessel_id << ',' << e.port_id << ',' << e.from.str() << ',' << e.to.str() << '\n';
}

inline Parsed<PriceRow> parse_prices(const std::string& path, const ParseOptions& opt = {}) {
  return csv::parse_rows<PriceRow>(
      path, {"port_id", "year", "month", "landed_price", "fuel_price"}, opt, [&](csv::Row& row) {
        PriceRow p;
        p.port_id = row.integer("port_id");
        p.year = row.integer("year");
        p.month = row.integer("month");
        p.landed_price = row.number("landed_price");
        p.fuel_price = row.number("fuel_price");
        row.require(p.month >= 1 && p.month <= 12, "month out of range");
        row.require(p.port_id >= 1 && (opt.n_ports == 0 || p.port_id <= opt.n_ports),
                    "unknown port_id " + std::to_string(p.port_id));
        row.require(p.landed_price > 0.0 && p.fuel_price > 0.0, "prices must be positive");
        return p;
      });
}

inline void write_prices(const std::string& path, const std::vector<PriceRow>& prices) {
  auto out = csv::open_out(path);
  out << "port_id,year,month,landed_price,fuel_price\n";
  for (const auto& p : prices)
    out << p.port_id << ',' << p.year << ',' << p.month << ',' << csv::format(p.landed_price)
        << ',' << csv::format(p.fuel_price) << '\n';
}

inline Parsed<DistanceRow> parse_distances(const std::string& path, const ParseOptions& opt = {}) {
  return csv::parse_rows<DistanceRow>(path, {"port_id", "patch_id", "nmi"}, opt, [&](csv::Row& row) {
    DistanceRow d;
    d.port_id = row.integer("port_id");
    d.patch_id = row.integer("patch_id");
    d.nmi = row.number("nmi");
    row.require(d.port_id >= 1 && (opt.n_ports == 0 || d.port_id <= opt.n_ports),
                "unknown port_id " + std::to_string(d.port_id));
    row.require(d.patch_id >= 1 && (opt.n_patches == 0 || d.patch_id <= opt.n_patches),
                "unknown patch_id " + std::to_string(d.patch_id));
    row.require(d.nmi > 0.0, "distance must be positive");
    return d;
  });
}

inline void write_distances(const std::string& path, const Eigen::MatrixXd& dist) {
  auto out = csv::open_out(path);
  out << "port_id,patch_id,nmi\n";
  for (Eigen::Index j = 0; j < dist.rows(); ++j)
    for (Eigen::Index k = 0; k < dist.cols(); ++k)
      out << j + 1 << ',' << k + 1 << ',' << csv::format(dist(j, k)) << '\n';
}

/// Ports x patches distance matrix; every pair must be present exactly once.
inline Eigen::MatrixXd distance_matrix(const std::vector<DistanceRow>& rows, int n_ports,
                                       int n_patches) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n_ports, n_patches, -1.0);
  for (const auto& r : rows) {
    if (r.port_id < 1 || r.port_id > n_ports || r.patch_id < 1 || r.patch_id > n_patches)
      throw data_error("ingest", "distance row outside the configured ports/patches");
    if (d(r.port_id - 1, r.patch_id - 1) >= 0.0)
      throw data_error("ingest", "duplicate distance for port " + std::to_string(r.port_id) +
                                     " patch " + std::to_string(r.patch_id));
    d(r.port_id - 1, r.patch_id - 1) = r.nmi;
  }
  if ((d.array() < 0.0).any()) throw data_error("ingest", "distance table is incomplete");
  return d;
}

inline Parsed<CovariateRow> parse_covariates(const std::string& path,
                                             const ParseOptions& opt = {}) {
  csv::Table probe = csv::read(path, {"patch_id", "year", "month"});
  std::vector<std::string> names;
  for (const auto& h : probe.header)
    if (h != "patch_id" && h != "year" && h != "month") names.push_back(h);
  auto parsed = csv::parse_rows<CovariateRow>(
      path, {"patch_id", "year", "month"}, opt, [&](csv::Row& row) {
        CovariateRow c;
        c.patch_id = row.integer("patch_id");
        c.year = row.integer("year");
        c.month = row.integer("month");
        for (const auto& n : names) {
          double v = row.number(n);
          row.require(v > 0.0, "covariate " + n + " must be positive");
          c.values.push_back(v);
        }
        row.require(c.patch_id >= 1 && (opt.n_patches == 0 || c.patch_id <= opt.n_patches),
                    "unknown patch_id " + std::to_string(c.patch_id));
        return c;
      });
  parsed.extra_columns = names;
  return parsed;
}

inline void write_covariates(const std::string& path, const std::vector<std::string>& names,
                             const std::vector<CovariateRow>& rows) {
  auto out = csv::open_out(path);
  out << "patch_id,year,month";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (const auto& r : rows) {
    out << r.patch_id << ',' << r.year << ',' << r.month;
    for (double v : r.values) out << ',' << csv::format(v);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Market panel
// ---------------------------------------------------------------------------

/// One home port in one month; products are patches, plus staying in port.
struct Market {
  int port = 0;  // 0-based
  YearMonth ym;
  double roster = 0.0;           // vessels able to fish (share denominator)
  double outside_share = 0.0;
  std::vector<double> choices;   // vessel-choices per patch (fractional when split)
  std::vector<double> share;
  std::vector<double> effort;    // trips
  std::vector<double> catch_tons;
  std::vector<double> net_price;
  bool zero_share = false;       // some patch share is 0
  bool no_outside = false;       // outside share is 0
};

struct PanelDiagnostics {
  int markets = 0;
  int zero_share_markets = 0;
  int zero_share_cells = 0;
  int no_outside_markets = 0;
};

struct MarketPanel {
  int n_patches = 0;
  int n_ports = 0;
  std::vector<Market> markets;  // sorted by (ym, port)
  std::vector<std::string> covariate_names;
  std::map<std::pair<int, int>, std::vector<double>> covariates;  // (ym ordinal, patch)
  PanelDiagnostics diagnostics;

  std::vector<double> z(const YearMonth& ym, int patch) const {
    if (covariate_names.empty()) return {};
    auto it = covariates.find({ym.ordinal(), patch});
    if (it == covariates.end())
      throw data_error("ingest", "missing covariates for patch " + std::to_string(patch + 1) +
                                     " in " + ym.str());
    return it->second;
  }

  void recompute_diagnostics() {
    diagnostics = {};
    for (auto& m : markets) {
      ++diagnostics.markets;
      int zeros = 0;
      for (double s : m.share)
        if (s <= 0.0) ++zeros;
      m.zero_share = zeros > 0;
      m.no_outside = m.outside_share <= 1e-12;
      diagnostics.zero_share_cells += zeros;
      if (m.zero_share) ++diagnostics.zero_share_markets;
      if (m.no_outside) ++diagnostics.no_outside_markets;
    }
  }
};

struct PanelSettings {
  double vessel_fuel_rate = 1.0;
  double expected_catch_per_trip = 1.0;
  bool laplace = false;  // add 1/2 to every choice count (sparse real data)
};

/// Aggregate trip records into markets. A vessel that fished several patches
/// in one month contributes one choice split equally across them; effort is
/// the trip count.
inline MarketPanel build_panel(std::vector<TripRecord> records, const std::vector<RosterEntry>& roster,
                               const std::vector<PriceRow>& prices, const PatchGraph& graph,
                               const PanelSettings& settings,
                               const std::vector<std::string>& covariate_names = {},
                               const std::vector<CovariateRow>& covariates = {}) {
  const int n = graph.n_patches();
  const int n_ports = graph.n_ports();
  if (!(settings.vessel_fuel_rate > 0.0) || !(settings.expected_catch_per_trip > 0.0))
    throw config_error("ingest", "vessel_fuel_rate and expected_catch_per_trip must be positive");

  using Key = std::pair<int, int>;  // (ym ordinal, port)
  std::map<Key, PriceRow> price_of;
  for (const auto& p : prices) {
    if (p.port_id < 1 || p.port_id > n_ports)
      throw data_error("ingest", "price row for unknown port " + std::to_string(p.port_id));
    Key key{YearMonth{p.year, p.month}.ordinal(), p.port_id - 1};
    if (!price_of.emplace(key, p).second)
      throw data_error("ingest", "duplicate price row for port " + std::to_string(p.port_id) +
                                     " " + YearMonth{p.year, p.month}.str());
  }

  std::map<Key, double> roster_count;
  for (const auto& e : roster) {
    if (e.port_id < 1 || e.port_id > n_ports)
      throw data_error("ingest", "roster entry for unknown port " + std::to_string(e.port_id));
    for (int o = e.from.ordinal(); o <= e.to.ordinal(); ++o) roster_count[{o, e.port_id - 1}] += 1.0;
  }

  // Canonical order makes every sum independent of input record order.
  std::sort(records.begin(), records.end(), [](const TripRecord& a, const TripRecord& b) {
    return std::tie(a.year, a.month, a.port_id, a.vessel_id, a.patch_id, a.catch_tons) <
           std::tie(b.year, b.month, b.port_id, b.vessel_id, b.patch_id, b.catch_tons);
  });

  MarketPanel panel;
  panel.n_patches = n;
  panel.n_ports = n_ports;
  std::map<Key, std::size_t> market_index;
  for (const auto& [key, p] : price_of) {
    auto rc = roster_count.find(key);
    if (rc == roster_count.end() || rc->second <= 0.0) continue;
    Market m;
    m.port = key.second;
    m.ym = YearMonth::from_ordinal(key.first);
    m.roster = rc->second;
    m.choices.assign(n, 0.0);
    m.share.assign(n, 0.0);
    m.effort.assign(n, 0.0);
    m.catch_tons.assign(n, 0.0);
    m.net_price.resize(n);
    PriceInputs in{p.landed_price, p.fuel_price, settings.vessel_fuel_rate,
                   settings.expected_catch_per_trip};
    for (int k = 0; k < n; ++k) m.net_price[k] = net_price(in, graph.distance(m.port, k));
    market_index[key] = panel.markets.size();
    panel.markets.push_back(std::move(m));
  }
  // markets are keyed (ym, port) already; map order gives the sort.

  std::map<Key, std::map<int, std::set<int>>> fished;  // market -> vessel -> patches
  for (const auto& r : records) {
    if (r.port_id < 1 || r.port_id > n_ports)
      throw data_error("ingest", "trip record for unknown port " + std::to_string(r.port_id));
    if (r.patch_id < 0 || r.patch_id > n)
      throw data_error("ingest", "trip record for unknown patch " + std::to_string(r.patch_id));
    Key key{r.ym().ordinal(), r.port_id - 1};
    auto it = market_index.find(key);
    if (it == market_index.end())
      throw data_error("ingest", "trip in " + r.ym().str() + " from port " +
                                     std::to_string(r.port_id) +
                                     " has no matching price row or roster entry");
    if (r.patch_id == 0) continue;
    Market& m = panel.markets[it->second];
    m.effort[r.patch_id - 1] += 1.0;
    m.catch_tons[r.patch_id - 1] += r.catch_tons;
    fished[key][r.vessel_id].insert(r.patch_id - 1);
  }
  for (const auto& [key, vessels] : fished) {
    Market& m = panel.markets[market_index.at(key)];
    if (static_cast<double>(vessels.size()) > m.roster)
      throw data_error("ingest", "roster for port " + std::to_string(m.port + 1) + " in " +
                                     m.ym.str() + " lists " + csv::format(m.roster) +
                                     " vessels but " + std::to_string(vessels.size()) +
                                     " fished");
    for (const auto& [vessel, patches] : vessels) {
      double w = 1.0 / static_cast<double>(patches.size());
      for (int k : patches) m.choices[k] += w;
    }
  }
  for (auto& m : panel.markets) {
    double active = 0.0;
    for (double c : m.choices) active += c;
    double outside = std::max(m.roster - active, 0.0);
    if (settings.laplace) {
      double denom = m.roster + 0.5 * (n + 1);
      for (int k = 0; k < n; ++k) m.share[k] = (m.choices[k] + 0.5) / denom;
      m.outside_share = (outside + 0.5) / denom;
    } else {
      for (int k = 0; k < n; ++k) m.share[k] = m.choices[k] / m.roster;
      double s = 0.0;
      for (double v : m.share) s += v;
      m.outside_share = std::max(1.0 - s, 0.0);
    }
  }

  panel.covariate_names = covariate_names;
  for (const auto& c : covariates) {
    if (c.values.size() != covariate_names.size())
      throw data_error("ingest", "covariate row width mismatch");
    panel.covariates[{YearMonth{c.year, c.month}.ordinal(), c.patch_id - 1}] = c.values;
  }
  panel.recompute_diagnostics();
  return panel;
}

}  // namespace fleetmig
