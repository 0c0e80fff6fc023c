#pragma once

// Spatial layout and discrete-time stock dynamics of a patchy fish stock.
//
// Dispersion orientation: entry d(h, k) is the per-period rate at which
// stock in patch h moves into patch k (diagonal: own-patch outflow, <= 0
// under the conservative convention). Net migration into k is therefore
//
//     MN[k] = d(k, k) * x[k] + sum_{h != k} d(h, k) * x[h]  =  (D^T x)[k],
//
// i.e. inflow scales with the *source* stock. The original formulation writes
// x[k] inside the neighbour sum, which cannot conserve mass and disagrees with
// its own matrix form; the source-stock reading is used here throughout.
//
// Row-sum conventions: `conservative_zero` (rows sum to 0, total stock is
// conserved by migration; default) and `paper_one` (rows sum to 1, kept only
// to mirror the constraint as originally stated), plus `unconstrained`.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fleetmig/error.hpp"

namespace fleetmig {

class PatchGraph {
 public:
  PatchGraph() = default;

  /// `edges` are 0-based unordered pairs; `port_distances` is ports x patches
  /// in nautical miles.
  PatchGraph(int n_patches, const std::vector<std::pair<int, int>>& edges,
             Eigen::MatrixXd port_distances)
      : n_(n_patches),
        adj_(static_cast<std::size_t>(n_patches) * n_patches, 0),
        nbrs_(n_patches),
        dist_(std::move(port_distances)) {
    if (n_patches < 1) throw config_error("patch_model", "n_patches must be positive");
    for (auto [h, k] : edges) {
      if (h < 0 || k < 0 || h >= n_ || k >= n_)
        throw config_error("patch_model", "edge (" + std::to_string(h + 1) + "," +
                                              std::to_string(k + 1) + ") out of range");
      if (h == k)
        throw config_error("patch_model",
                           "self-adjacency for patch " + std::to_string(h + 1));
      if (adj_[idx(h, k)]) continue;
      adj_[idx(h, k)] = adj_[idx(k, h)] = 1;
    }
    for (int k = 0; k < n_; ++k)
      for (int h = 0; h < n_; ++h)
        if (adj_[idx(h, k)]) nbrs_[k].push_back(h);

    if (dist_.cols() != n_)
      throw config_error("patch_model", "port distance matrix must have one column per patch");
    if (dist_.rows() < 1) throw config_error("patch_model", "at least one port required");
    for (Eigen::Index j = 0; j < dist_.rows(); ++j)
      for (Eigen::Index k = 0; k < dist_.cols(); ++k)
        if (!(std::isfinite(dist_(j, k)) && dist_(j, k) > 0.0))
          throw config_error("patch_model", "distance port " + std::to_string(j + 1) +
                                                " patch " + std::to_string(k + 1) +
                                                " must be positive and finite");
    check_connected();
  }

  /// rows x cols lattice with 4-neighbour adjacency; patch id = row * cols + col.
  static PatchGraph grid(int rows, int cols, Eigen::MatrixXd port_distances) {
    std::vector<std::pair<int, int>> edges;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        int p = r * cols + c;
        if (c + 1 < cols) edges.emplace_back(p, p + 1);
        if (r + 1 < rows) edges.emplace_back(p, p + cols);
      }
    return PatchGraph(rows * cols, edges, std::move(port_distances));
  }

  int n_patches() const noexcept { return n_; }
  int n_ports() const noexcept { return static_cast<int>(dist_.rows()); }

  bool adjacent(int h, int k) const {
    check_patch(h);
    check_patch(k);
    return adj_[idx(h, k)] != 0;
  }

  /// Patches adjacent to k, ascending.
  const std::vector<int>& neighbors(int k) const {
    check_patch(k);
    return nbrs_[k];
  }

  /// Unordered edges (h < k), lexicographic.
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int h = 0; h < n_; ++h)
      for (int k = h + 1; k < n_; ++k)
        if (adj_[idx(h, k)]) out.emplace_back(h, k);
    return out;
  }

  const Eigen::MatrixXd& port_distances() const noexcept { return dist_; }

  double distance(int port, int patch) const {
    if (port < 0 || port >= n_ports())
      throw data_error("patch_model", "invalid port index " + std::to_string(port));
    check_patch(patch);
    return dist_(port, patch);
  }

  void check_patch(int k) const {
    if (k < 0 || k >= n_)
      throw data_error("patch_model", "invalid patch index " + std::to_string(k));
  }

 private:
  std::size_t idx(int h, int k) const { return static_cast<std::size_t>(h) * n_ + k; }

  void check_connected() const {
    std::vector<char> seen(n_, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      int k = stack.back();
      stack.pop_back();
      for (int h : nbrs_[k])
        if (!seen[h]) {
          seen[h] = 1;
          ++count;
          stack.push_back(h);
        }
    }
    if (count != n_) throw config_error("patch_model", "patch graph is not connected");
  }

  int n_ = 0;
  std::vector<char> adj_;
  std::vector<std::vector<int>> nbrs_;
  Eigen::MatrixXd dist_;
};

struct BioParams {
  double r = 0.0;              // intrinsic growth per period
  Eigen::VectorXd carrying_capacity;  // tons per patch

  BioParams() = default;
  BioParams(double r_, Eigen::VectorXd k_) : r(r_), carrying_capacity(std::move(k_)) {
    validate();
  }

  void validate() const {
    if (!(r > 0.0) || !std::isfinite(r))
      throw config_error("patch_model", "growth rate r must be positive");
    for (Eigen::Index k = 0; k < carrying_capacity.size(); ++k)
      if (!(carrying_capacity[k] > 0.0) || !std::isfinite(carrying_capacity[k]))
        throw config_error("patch_model",
                           "carrying capacity of patch " + std::to_string(k + 1) +
                               " must be positive");
  }

  int n_patches() const noexcept { return static_cast<int>(carrying_capacity.size()); }
};

enum class RowSumConvention { conservative_zero, paper_one, unconstrained };

inline std::string to_string(RowSumConvention c) {
  switch (c) {
    case RowSumConvention::conservative_zero:
      return "conservative_zero";
    case RowSumConvention::paper_one:
      return "paper_one";
    case RowSumConvention::unconstrained:
      return "unconstrained";
  }
  return "unknown";
}

inline RowSumConvention parse_row_sum_convention(const std::string& s) {
  if (s == "conservative_zero") return RowSumConvention::conservative_zero;
  if (s == "paper_one") return RowSumConvention::paper_one;
  if (s == "unconstrained") return RowSumConvention::unconstrained;
  throw config_error("patch_model", "unknown row-sum convention '" + s + "'");
}

class DispersionMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-12;

  DispersionMatrix() = default;

  DispersionMatrix(const PatchGraph& graph, Eigen::MatrixXd d,
                   RowSumConvention convention = RowSumConvention::conservative_zero)
      : d_(std::move(d)), convention_(convention) {
    const int n = graph.n_patches();
    if (d_.rows() != n || d_.cols() != n)
      throw config_error("patch_model", "dispersion matrix must be n_patches x n_patches");
    for (int h = 0; h < n; ++h)
      for (int k = 0; k < n; ++k) {
        if (!std::isfinite(d_(h, k)))
          throw config_error("patch_model", "non-finite dispersion rate");
        if (h != k && d_(h, k) != 0.0 && !graph.adjacent(h, k))
          throw config_error("patch_model", "nonzero rate d(" + std::to_string(h + 1) + "," +
                                                std::to_string(k + 1) +
                                                ") between non-adjacent patches");
      }
    for (int h = 0; h < n; ++h) {
      double s = d_.row(h).sum();
      if (convention_ == RowSumConvention::conservative_zero) {
        if (std::abs(s) > kRowSumTolerance)
          throw config_error("patch_model",
                             "row " + std::to_string(h + 1) + " must sum to 0 (conservative_zero)");
        if (d_(h, h) > 0.0)
          throw config_error("patch_model", "diagonal d(" + std::to_string(h + 1) + "," +
                                                std::to_string(h + 1) +
                                                ") must be <= 0 (conservative_zero)");
      } else if (convention_ == RowSumConvention::paper_one) {
        if (std::abs(s - 1.0) > kRowSumTolerance)
          throw config_error("patch_model",
                             "row " + std::to_string(h + 1) + " must sum to 1 (paper_one)");
      }
    }
  }

  /// Conservative matrix from off-diagonal rates: d(h, h) = -sum_k d(h, k).
  static DispersionMatrix conservative(const PatchGraph& graph, Eigen::MatrixXd off_diagonal) {
    for (Eigen::Index h = 0; h < off_diagonal.rows(); ++h) {
      off_diagonal(h, h) = 0.0;
      off_diagonal(h, h) = -off_diagonal.row(h).sum();
    }
    return DispersionMatrix(graph, std::move(off_diagonal), RowSumConvention::conservative_zero);
  }

  static DispersionMatrix zero(const PatchGraph& graph) {
    return DispersionMatrix(graph, Eigen::MatrixXd::Zero(graph.n_patches(), graph.n_patches()));
  }

  const Eigen::MatrixXd& rates() const noexcept { return d_; }
  double rate(int h, int k) const { return d_(h, k); }
  RowSumConvention convention() const noexcept { return convention_; }
  int n_patches() const noexcept { return static_cast<int>(d_.rows()); }

 private:
  Eigen::MatrixXd d_;
  RowSumConvention convention_ = RowSumConvention::conservative_zero;
};

struct StockState {
  Eigen::VectorXd x;  // tons per patch
  int t = 0;          // period (month) index
};

inline double logistic_growth(double x, const BioParams& params, int k) {
  if (k < 0 || k >= params.n_patches())
    throw data_error("patch_model", "invalid patch index " + std::to_string(k));
  return params.r * x * (1.0 - x / params.carrying_capacity[k]);
}

inline Eigen::VectorXd net_migration(const StockState& state, const DispersionMatrix& d) {
  if (state.x.size() != d.n_patches())
    throw data_error("patch_model", "stock vector and dispersion matrix dimensions differ");
  return d.rates().transpose() * state.x;
}

struct StepResult {
  StockState state;
  std::vector<bool> depleted;  // patch floored at zero this step

  bool any_depleted() const {
    for (bool b : depleted)
      if (b) return true;
    return false;
  }
};

inline StepResult step(const StockState& state, const BioParams& params,
                       const DispersionMatrix& d, const Eigen::VectorXd& harvest) {
  const Eigen::Index n = state.x.size();
  if (params.n_patches() != n || harvest.size() != n)
    throw data_error("patch_model", "dimension mismatch in step");
  for (Eigen::Index k = 0; k < n; ++k)
    if (!(harvest[k] >= 0.0))
      throw data_error("patch_model", "harvest must be non-negative");

  const Eigen::VectorXd mn = net_migration(state, d);
  StepResult out;
  out.state.t = state.t + 1;
  out.state.x.resize(n);
  out.depleted.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index k = 0; k < n; ++k) {
    double next = state.x[k] + logistic_growth(state.x[k], params, static_cast<int>(k)) -
                  harvest[k] + mn[k];
    if (next < 0.0) {
      next = 0.0;
      out.depleted[static_cast<std::size_t>(k)] = true;
    }
    out.state.x[k] = next;
  }
  return out;
}

}  // namespace fleetmig
