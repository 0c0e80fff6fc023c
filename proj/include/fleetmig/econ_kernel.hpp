#pragma once

// Estimation machinery shared by both stages: OLS, feasible-GLS seemingly
// unrelated regressions with cross-equation equality restrictions, damped
// Gauss-Newton for nonlinear systems, and normal-theory intervals.

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fleetmig/error.hpp"

namespace fleetmig::econ {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct EquationStats {
  std::string name;
  Index n_obs = 0;
  Index n_params = 0;
  double r_squared = 0.0;
  VectorXd residuals;
  std::vector<std::int64_t> obs;  // observation keys of the rows used
};

struct EstimateSet {
  std::vector<std::string> labels;
  VectorXd estimates;
  MatrixXd covariance;
  VectorXd std_errors;
  MatrixXd residual_covariance;  // across equations; 1x1 for single equations
  std::vector<EquationStats> equations;
  int iterations = 1;
  double ridge_jitter = 0.0;
  double objective = 0.0;

  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < labels.size(); ++i) index_.emplace(labels[i], static_cast<Index>(i));
  }

  bool has(std::string_view label) const { return index_.count(std::string(label)) != 0; }

  Index index_of(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end())
      throw data_error("econ_kernel", "unknown parameter label '" + std::string(label) + "'");
    return it->second;
  }

  double value(std::string_view label) const { return estimates[index_of(label)]; }
  double std_error(std::string_view label) const { return std_errors[index_of(label)]; }
  double z_value(std::string_view label) const {
    Index i = index_of(label);
    return std_errors[i] > 0.0 ? estimates[i] / std_errors[i]
                               : std::numeric_limits<double>::quiet_NaN();
  }

 private:
  std::unordered_map<std::string, Index> index_;
};

namespace detail {

struct LeastSquares {
  VectorXd coef;
  MatrixXd xtx_inv;
};

// Column-equilibrated, column-pivoted QR. Columns whose pivot falls below
// 1e-10 of the largest are reported by label.
inline LeastSquares solve_least_squares(const MatrixXd& X, const VectorXd& y,
                                        const std::vector<std::string>& labels,
                                        const std::string& module) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (y.size() != n) throw data_error(module, "response and design row counts differ");
  if (p == 0) throw data_error(module, "design has no columns");
  VectorXd scale(p);
  for (Index j = 0; j < p; ++j) {
    double s = X.col(j).norm();
    scale[j] = (s > 0.0 && std::isfinite(s)) ? s : 1.0;
  }
  MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(Xs);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::vector<std::string> dependent;
    const auto& perm = qr.colsPermutation().indices();
    for (Index i = qr.rank(); i < p; ++i) {
      Index c = perm[i];
      dependent.push_back(static_cast<std::size_t>(c) < labels.size() ? labels[c]
                                                                     : "col" + std::to_string(c));
    }
    std::sort(dependent.begin(), dependent.end());
    throw RankDeficientError(module, std::move(dependent));
  }
  LeastSquares out;
  out.coef = qr.solve(y).cwiseQuotient(scale);
  MatrixXd r = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  MatrixXd rinv = r.template triangularView<Eigen::Upper>().solve(MatrixXd::Identity(p, p));
  MatrixXd inv_perm = rinv * rinv.transpose();
  MatrixXd inv = qr.colsPermutation() * inv_perm * qr.colsPermutation().transpose();
  out.xtx_inv = scale.cwiseInverse().asDiagonal() * inv * scale.cwiseInverse().asDiagonal();
  out.xtx_inv = 0.5 * (out.xtx_inv + out.xtx_inv.transpose());
  return out;
}

inline double r_squared(const VectorXd& y, const VectorXd& resid) {
  if (y.size() == 0) return 0.0;
  double mean = y.mean();
  double sst = (y.array() - mean).square().sum();
  double ssr = resid.squaredNorm();
  if (sst <= 0.0) return ssr <= 0.0 ? 1.0 : 0.0;
  return 1.0 - ssr / sst;
}

}  // namespace detail

inline EstimateSet ols(const VectorXd& y, const MatrixXd& X, std::vector<std::string> labels = {}) {
  if (labels.empty())
    for (Index j = 0; j < X.cols(); ++j) labels.push_back("b" + std::to_string(j));
  if (static_cast<Index>(labels.size()) != X.cols())
    throw data_error("econ_kernel", "label count does not match design columns");
  auto ls = detail::solve_least_squares(X, y, labels, "econ_kernel");
  const Index n = X.rows();
  const Index p = X.cols();

  EstimateSet est;
  est.labels = std::move(labels);
  est.estimates = ls.coef;
  VectorXd resid = y - X * ls.coef;
  double ssr = resid.squaredNorm();
  double sigma2 = n > p ? ssr / static_cast<double>(n - p) : 0.0;
  est.covariance = sigma2 * ls.xtx_inv;
  est.std_errors = est.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  est.residual_covariance = MatrixXd::Constant(1, 1, ssr / static_cast<double>(n));
  est.objective = ssr;
  EquationStats eq;
  eq.name = "eq1";
  eq.n_obs = n;
  eq.n_params = p;
  eq.r_squared = detail::r_squared(y, resid);
  eq.residuals = std::move(resid);
  eq.obs.resize(static_cast<std::size_t>(n));
  std::iota(eq.obs.begin(), eq.obs.end(), 0);
  est.equations.push_back(std::move(eq));
  est.reindex();
  return est;
}

// ---------------------------------------------------------------------------
// Seemingly unrelated regressions
// ---------------------------------------------------------------------------

struct Equation {
  std::string name;
  VectorXd y;
  MatrixXd X;
  std::vector<std::string> labels;
  std::vector<std::int64_t> obs;  // observation key per row; empty = 0..n-1
};

struct ParameterRef {
  std::string equation;
  std::string label;
};

/// Equality restriction between two labelled coefficients.
struct Restriction {
  ParameterRef a;
  ParameterRef b;
};

struct LinearSystemSpec {
  std::vector<Equation> equations;
  std::vector<Restriction> restrictions;

  /// Tie every occurrence of `label` across equations to one parameter.
  void share(const std::string& label) {
    const Equation* first = nullptr;
    for (const auto& eq : equations) {
      if (std::find(eq.labels.begin(), eq.labels.end(), label) == eq.labels.end()) continue;
      if (!first)
        first = &eq;
      else
        restrictions.push_back({{first->name, label}, {eq.name, label}});
    }
  }
};

enum class Balance {
  require,    // identical observation keys in every equation
  intersect,  // keep only keys present in all equations
  subset,     // keep everything; each key is weighted by its own sub-block of Sigma
};

struct SurOptions {
  Balance balance = Balance::require;
  bool iterate = false;
  int max_iterations = 50;
  double tolerance = 1e-8;
};

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Cross-equation residual covariance, pairwise over common keys, denominator
// = number of common keys.
inline MatrixXd residual_covariance(const std::vector<std::map<std::int64_t, double>>& resid) {
  const int m = static_cast<int>(resid.size());
  MatrixXd s = MatrixXd::Zero(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = a; b < m; ++b) {
      double acc = 0.0;
      long count = 0;
      for (const auto& [key, ea] : resid[a]) {
        auto it = resid[b].find(key);
        if (it == resid[b].end()) continue;
        acc += ea * it->second;
        ++count;
      }
      s(a, b) = s(b, a) = count > 0 ? acc / static_cast<double>(count) : 0.0;
    }
  return s;
}

inline MatrixXd regularize(const MatrixXd& sigma, double& jitter) {
  jitter = 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma);
  double lmax = es.eigenvalues().maxCoeff();
  double lmin = es.eigenvalues().minCoeff();
  if (lmax > 0.0 && lmin > 1e-10 * lmax) return sigma;
  double base = lmax > 0.0 ? lmax : 1.0;
  jitter = 1e-8 * base;
  for (int attempt = 0; attempt < 6; ++attempt) {
    MatrixXd s = sigma + jitter * MatrixXd::Identity(sigma.rows(), sigma.cols());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es2(s);
    double mx = es2.eigenvalues().maxCoeff();
    if (es2.eigenvalues().minCoeff() > 1e-10 * mx && mx > 0.0) return s;
    jitter *= 100.0;
  }
  throw numerical_error("econ_kernel", "residual covariance singular after ridge regularization");
}

}  // namespace detail

inline EstimateSet sur(const LinearSystemSpec& spec, const SurOptions& options = {}) {
  const int m = static_cast<int>(spec.equations.size());
  if (m == 0) throw data_error("econ_kernel", "system has no equations");

  std::vector<std::vector<std::int64_t>> obs(m);
  std::map<std::string, int> eq_index;
  std::vector<int> col_offset(m + 1, 0);
  for (int e = 0; e < m; ++e) {
    const auto& eq = spec.equations[e];
    if (!eq_index.emplace(eq.name, e).second)
      throw data_error("econ_kernel", "duplicate equation name '" + eq.name + "'");
    if (eq.X.rows() != eq.y.size())
      throw data_error("econ_kernel", "equation '" + eq.name + "': design/response rows differ");
    if (static_cast<Index>(eq.labels.size()) != eq.X.cols())
      throw data_error("econ_kernel", "equation '" + eq.name + "': label count mismatch");
    std::set<std::string> seen(eq.labels.begin(), eq.labels.end());
    if (seen.size() != eq.labels.size())
      throw data_error("econ_kernel", "equation '" + eq.name + "': duplicate labels");
    obs[e] = eq.obs;
    if (obs[e].empty()) {
      obs[e].resize(static_cast<std::size_t>(eq.y.size()));
      std::iota(obs[e].begin(), obs[e].end(), 0);
    }
    if (static_cast<Index>(obs[e].size()) != eq.y.size())
      throw data_error("econ_kernel", "equation '" + eq.name + "': observation key count mismatch");
    std::set<std::int64_t> keys(obs[e].begin(), obs[e].end());
    if (keys.size() != obs[e].size())
      throw data_error("econ_kernel", "equation '" + eq.name + "': duplicate observation keys");
    col_offset[e + 1] = col_offset[e] + static_cast<int>(eq.X.cols());
  }

  // Map every (equation, column) onto a free parameter.
  detail::UnionFind uf(col_offset[m]);
  auto locate = [&](const ParameterRef& ref) {
    auto it = eq_index.find(ref.equation);
    if (it == eq_index.end())
      throw data_error("econ_kernel", "restriction names unknown equation '" + ref.equation + "'");
    const auto& labels = spec.equations[it->second].labels;
    auto pos = std::find(labels.begin(), labels.end(), ref.label);
    if (pos == labels.end())
      throw data_error("econ_kernel", "restriction names unknown label '" + ref.label + "' in '" +
                                          ref.equation + "'");
    return col_offset[it->second] + static_cast<int>(pos - labels.begin());
  };
  for (const auto& r : spec.restrictions) uf.unite(locate(r.a), locate(r.b));

  std::vector<int> global_of(col_offset[m]);
  std::vector<int> root_to_global(col_offset[m], -1);
  std::vector<std::pair<int, int>> owner;  // representative (equation, column)
  for (int e = 0; e < m; ++e)
    for (int c = 0; c < static_cast<int>(spec.equations[e].X.cols()); ++c) {
      int flat = col_offset[e] + c;
      int root = uf.find(flat);
      if (root_to_global[root] < 0) {
        root_to_global[root] = static_cast<int>(owner.size());
        owner.emplace_back(e, c);
      }
      global_of[flat] = root_to_global[root];
    }
  const int P = static_cast<int>(owner.size());
  std::vector<std::string> labels(P);
  std::map<std::string, int> label_count;
  for (int g = 0; g < P; ++g) ++label_count[spec.equations[owner[g].first].labels[owner[g].second]];
  for (int g = 0; g < P; ++g) {
    const auto& eq = spec.equations[owner[g].first];
    const auto& l = eq.labels[owner[g].second];
    labels[g] = label_count[l] > 1 ? eq.name + "." + l : l;
  }

  // Row selection according to the balance mode.
  std::vector<std::vector<Index>> rows(m);
  if (options.balance == Balance::require) {
    std::vector<std::int64_t> ref(obs[0]);
    std::sort(ref.begin(), ref.end());
    for (int e = 0; e < m; ++e) {
      std::vector<std::int64_t> k(obs[e]);
      std::sort(k.begin(), k.end());
      if (k != ref)
        throw data_error("econ_kernel", "unbalanced observation index in equation '" +
                                            spec.equations[e].name + "'");
    }
  }
  std::map<std::int64_t, int> key_count;
  for (int e = 0; e < m; ++e)
    for (auto k : obs[e]) ++key_count[k];
  for (int e = 0; e < m; ++e)
    for (Index i = 0; i < static_cast<Index>(obs[e].size()); ++i)
      if (options.balance != Balance::intersect || key_count[obs[e][i]] == m) rows[e].push_back(i);

  // key -> list of (equation, row) in equation order
  std::map<std::int64_t, std::vector<std::pair<int, Index>>> by_key;
  for (int e = 0; e < m; ++e)
    for (Index i : rows[e]) by_key[obs[e][i]].emplace_back(e, i);
  Index total_rows = 0;
  for (int e = 0; e < m; ++e) total_rows += static_cast<Index>(rows[e].size());
  if (total_rows == 0) throw data_error("econ_kernel", "system has no usable observations");

  auto fill_row = [&](int e, Index i, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
    out.setZero();
    const auto& X = spec.equations[e].X;
    for (Index c = 0; c < X.cols(); ++c) out[global_of[col_offset[e] + c]] += X(i, c);
  };

  MatrixXd Xs(total_rows, P);
  VectorXd ys(total_rows);
  {
    Index r = 0;
    for (int e = 0; e < m; ++e)
      for (Index i : rows[e]) {
        fill_row(e, i, Xs.row(r));
        ys[r] = spec.equations[e].y[i];
        ++r;
      }
  }

  auto residuals_of = [&](const VectorXd& b) {
    std::vector<std::map<std::int64_t, double>> res(m);
    Index r = 0;
    for (int e = 0; e < m; ++e)
      for (Index i : rows[e]) {
        res[e][obs[e][i]] = ys[r] - Xs.row(r).dot(b);
        ++r;
      }
    return res;
  };

  // Step 1: restricted pooled least squares (equation-by-equation OLS when
  // no restrictions link equations).
  auto step1 = detail::solve_least_squares(Xs, ys, labels, "econ_kernel");
  VectorXd b = step1.coef;
  MatrixXd cov;
  MatrixXd sigma;
  double jitter = 0.0;
  int iterations = 0;

  for (;;) {
    ++iterations;
    sigma = detail::regularize(detail::residual_covariance(residuals_of(b)), jitter);

    // Whiten each key's block by the Cholesky factor of its Sigma sub-block.
    std::map<std::uint64_t, MatrixXd> linv_cache;
    MatrixXd Xt(total_rows, P);
    VectorXd yt(total_rows);
    Index r = 0;
    for (const auto& [key, members] : by_key) {
      std::uint64_t mask = 0;
      const int s = static_cast<int>(members.size());
      std::vector<int> idx(s);
      for (int a = 0; a < s; ++a) {
        idx[a] = members[a].first;
        mask |= (m <= 64) ? (std::uint64_t{1} << members[a].first) : 0;
      }
      MatrixXd linv;
      auto cached = m <= 64 ? linv_cache.find(mask) : linv_cache.end();
      if (cached != linv_cache.end()) {
        linv = cached->second;
      } else {
        MatrixXd sub(s, s);
        for (int a = 0; a < s; ++a)
          for (int c = 0; c < s; ++c) sub(a, c) = sigma(idx[a], idx[c]);
        Eigen::LLT<MatrixXd> llt(sub);
        if (llt.info() != Eigen::Success)
          throw numerical_error("econ_kernel", "residual covariance block not positive definite");
        linv = llt.matrixL().solve(MatrixXd::Identity(s, s));
        if (m <= 64) linv_cache.emplace(mask, linv);
      }
      MatrixXd blockX(s, P);
      VectorXd blocky(s);
      for (int a = 0; a < s; ++a) {
        fill_row(members[a].first, members[a].second, blockX.row(a));
        blocky[a] = spec.equations[members[a].first].y[members[a].second];
      }
      Xt.middleRows(r, s) = linv * blockX;
      yt.segment(r, s) = linv * blocky;
      r += s;
    }
    auto gls = detail::solve_least_squares(Xt, yt, labels, "econ_kernel");
    double change = ((gls.coef - b).array().abs() / (1.0 + b.array().abs())).maxCoeff();
    b = gls.coef;
    cov = gls.xtx_inv;
    if (!options.iterate || change < options.tolerance || iterations >= options.max_iterations)
      break;
  }

  EstimateSet est;
  est.labels = labels;
  est.estimates = b;
  est.covariance = cov;
  est.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  est.residual_covariance = sigma;
  est.iterations = iterations;
  est.ridge_jitter = jitter;
  auto res = residuals_of(b);
  double objective = 0.0;
  for (int e = 0; e < m; ++e) {
    EquationStats st;
    st.name = spec.equations[e].name;
    st.n_obs = static_cast<Index>(rows[e].size());
    st.n_params = spec.equations[e].X.cols();
    st.residuals.resize(st.n_obs);
    VectorXd yy(st.n_obs);
    for (Index a = 0; a < st.n_obs; ++a) {
      auto key = obs[e][rows[e][a]];
      st.residuals[a] = res[e][key];
      st.obs.push_back(key);
      yy[a] = spec.equations[e].y[rows[e][a]];
    }
    st.r_squared = detail::r_squared(yy, st.residuals);
    objective += st.residuals.squaredNorm();
    est.equations.push_back(std::move(st));
  }
  est.objective = objective;
  est.reindex();
  return est;
}

// ---------------------------------------------------------------------------
// Nonlinear least squares
// ---------------------------------------------------------------------------

using ResidualFn = std::function<VectorXd(const VectorXd&)>;
using JacobianFn = std::function<MatrixXd(const VectorXd&)>;

struct NlsOptions {
  int max_iterations = 500;
  double step_tolerance = 1e-10;
  double objective_tolerance = 1e-12;
  VectorXd weights;  // per-residual weights; empty = unweighted
  std::vector<std::string> labels;
  double fd_relative_step = 1e-6;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(VectorXd best, double objective, int iterations)
      : Error(ErrorKind::numerical, "econ_kernel",
              "no convergence after " + std::to_string(iterations) +
                  " iterations (best objective " + std::to_string(objective) + ")"),
        best_(std::move(best)),
        objective_(objective),
        iterations_(iterations) {}

  const VectorXd& best() const noexcept { return best_; }
  double objective() const noexcept { return objective_; }
  int iterations() const noexcept { return iterations_; }

 private:
  VectorXd best_;
  double objective_;
  int iterations_;
};

/// Central differences with step h_j = rel_step * max(|x_j|, 1).
inline MatrixXd central_difference_jacobian(const ResidualFn& f, const VectorXd& x,
                                            double rel_step = 1e-6) {
  VectorXd f0 = f(x);
  MatrixXd J(f0.size(), x.size());
  for (Index j = 0; j < x.size(); ++j) {
    double h = rel_step * std::max(std::abs(x[j]), 1.0);
    VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (f(xp) - f(xm)) / (xp[j] - xm[j]);
  }
  return J;
}

/// Largest column discrepancy, max_i |analytic - reference| over max_i |reference|.
inline double jacobian_discrepancy(const MatrixXd& analytic, const MatrixXd& reference) {
  double worst = 0.0;
  for (Index j = 0; j < reference.cols(); ++j) {
    double scale = std::max(reference.col(j).cwiseAbs().maxCoeff(), 1e-300);
    worst = std::max(worst, (analytic.col(j) - reference.col(j)).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

/// Levenberg-Marquardt on the (weighted) residual norm.
inline EstimateSet nls_system(const ResidualFn& residual, const JacobianFn& jacobian,
                              const VectorXd& start, const NlsOptions& options = {}) {
  const Index p = start.size();
  VectorXd sqrt_w;
  auto weighted = [&](VectorXd r) {
    if (sqrt_w.size() == r.size()) r.array() *= sqrt_w.array();
    return r;
  };
  auto jac_at = [&](const VectorXd& x) {
    MatrixXd J = jacobian ? jacobian(x) : central_difference_jacobian(residual, x,
                                                                      options.fd_relative_step);
    if (sqrt_w.size() == J.rows()) J = sqrt_w.asDiagonal() * J;
    return J;
  };

  VectorXd x = start;
  VectorXd r0 = residual(x);
  if (!r0.allFinite()) throw numerical_error("econ_kernel", "residuals not finite at start");
  if (options.weights.size() > 0) {
    if (options.weights.size() != r0.size())
      throw data_error("econ_kernel", "weight count does not match residual count");
    if ((options.weights.array() < 0.0).any())
      throw data_error("econ_kernel", "weights must be non-negative");
    sqrt_w = options.weights.cwiseSqrt();
  }
  VectorXd r = weighted(r0);
  double obj = r.squaredNorm();
  double lambda = -1.0;
  bool converged = obj == 0.0;
  int iter = 0;

  while (!converged && iter < options.max_iterations) {
    MatrixXd J = jac_at(x);
    MatrixXd A = J.transpose() * J;
    VectorXd g = J.transpose() * r;
    VectorXd diag = A.diagonal();
    double dmax = std::max(diag.maxCoeff(), 1e-300);
    diag = diag.cwiseMax(1e-12 * dmax);
    if (lambda < 0.0) lambda = 1e-3;
    bool accepted = false;
    while (!accepted && iter < options.max_iterations) {
      ++iter;
      MatrixXd M = A;
      M.diagonal() += lambda * diag;
      VectorXd delta = M.ldlt().solve(-g);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      if (delta.norm() <= options.step_tolerance * (x.norm() + options.step_tolerance)) {
        converged = true;
        break;
      }
      VectorXd xn = x + delta;
      VectorXd rn = residual(xn);
      double objn = rn.allFinite() ? weighted(rn).squaredNorm()
                                   : std::numeric_limits<double>::infinity();
      if (objn < obj) {
        double rel = (obj - objn) / std::max(obj, 1e-300);
        x = xn;
        r = weighted(rn);
        obj = objn;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (rel < options.objective_tolerance || obj == 0.0) converged = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e20) {
          // No descent possible at machine precision: stationary point.
          converged = true;
          break;
        }
      }
    }
  }
  if (!converged) throw NonConvergenceError(x, obj, iter);

  MatrixXd J = jac_at(x);
  std::vector<std::string> labels = options.labels;
  if (labels.empty())
    for (Index j = 0; j < p; ++j) labels.push_back("p" + std::to_string(j));
  detail::LeastSquares ls;
  try {
    ls = detail::solve_least_squares(J, VectorXd::Zero(J.rows()), labels, "econ_kernel");
  } catch (const RankDeficientError& e) {
    throw numerical_error("econ_kernel",
                          "parameters unidentified: singular Jacobian at solution (" +
                              std::string(e.what()) + ")");
  }
  const Index n = r.size();
  double sigma2 = n > p ? obj / static_cast<double>(n - p) : 0.0;

  EstimateSet est;
  est.labels = std::move(labels);
  est.estimates = x;
  est.covariance = sigma2 * ls.xtx_inv;
  est.std_errors = est.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  est.residual_covariance = MatrixXd::Constant(1, 1, n > 0 ? obj / static_cast<double>(n) : 0.0);
  est.iterations = iter;
  est.objective = obj;
  EquationStats st;
  st.name = "system";
  st.n_obs = n;
  st.n_params = p;
  st.residuals = r;
  st.r_squared = std::numeric_limits<double>::quiet_NaN();
  est.equations.push_back(std::move(st));
  est.reindex();
  return est;
}

// ---------------------------------------------------------------------------
// Intervals
// ---------------------------------------------------------------------------

/// Two-sided normal critical value, e.g. 1.6449 for level 0.90.
inline double two_sided_z(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw config_error("econ_kernel", "confidence level must lie in (0, 1)");
  boost::math::normal_distribution<double> normal;
  return boost::math::quantile(normal, 0.5 + 0.5 * level);
}

inline std::pair<double, double> confidence_interval(double point, double se, double level) {
  double z = two_sided_z(level);
  return {point - z * se, point + z * se};
}

inline std::pair<double, double> confidence_interval(const EstimateSet& est,
                                                     std::string_view label, double level) {
  Index i = est.index_of(label);
  return confidence_interval(est.estimates[i], est.std_errors[i], level);
}

}  // namespace fleetmig::econ
