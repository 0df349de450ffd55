#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dppmc/benchmarks.hpp"
#include "dppmc/common.hpp"
#include "dppmc/dppmc.hpp"
#include "dppmc/random.hpp"
#include "dppmc/run_record.hpp"

namespace dppmc {

struct EsGradientEstimate {
  Eigen::VectorXd gradient;
  double sigma = 0.0;
  long evaluations_used = 0;
};

enum class EsMode { kForward, kAntithetic };

// Smoothed-objective gradient from a fixed set of perturbation directions
// (rows of `perturbations`). Forward mode averages f(theta + sigma g) g / sigma.
// Antithetic mode measures the directional slope through each +/- pair and
// solves the least-squares system against the empirical second moment of the
// directions, which recovers affine gradients exactly whatever the directions'
// covariance.
inline EsGradientEstimate es_gradient(Blackbox& f, const Eigen::VectorXd& theta,
                                      double sigma,
                                      const Eigen::MatrixXd& perturbations,
                                      EsMode mode) {
  const int m = static_cast<int>(perturbations.rows());
  const int d = static_cast<int>(theta.size());
  if (m == 0) throw Error("es_gradient: no perturbations");
  if (perturbations.cols() != d) throw Error("es_gradient: dimension mismatch");
  if (!(sigma > 0.0)) throw Error("es_gradient: sigma must be positive");

  EsGradientEstimate out;
  out.sigma = sigma;
  if (mode == EsMode::kForward) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < m; ++i) {
      const Eigen::VectorXd g = perturbations.row(i).transpose();
      grad += f(theta + sigma * g) * g;
    }
    out.gradient = grad / (static_cast<double>(m) * sigma);
    out.evaluations_used = m;
    return out;
  }

  Eigen::VectorXd slope(m);
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd g = perturbations.row(i).transpose();
    const double fp = f(theta + sigma * g);
    const double fm = f(theta - sigma * g);
    slope[i] = (fp - fm) / (2.0 * sigma);
  }
  const Eigen::VectorXd raw =
      perturbations.transpose() * slope / static_cast<double>(m);
  const Eigen::MatrixXd second =
      perturbations.transpose() * perturbations / static_cast<double>(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(second);
  if (es.info() != Eigen::Success)
    throw Error("es_gradient: second-moment eigendecomposition failed");
  const double lead = es.eigenvalues().maxCoeff();
  const double tol =
      static_cast<double>(d) * 2.220446049250313e-16 * std::max(1.0, lead);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < d; ++i) {
    const double lam = es.eigenvalues()[i];
    if (lam <= tol) continue;
    const Eigen::VectorXd u = es.eigenvectors().col(i);
    grad += u * (u.dot(raw) / lam);
  }
  out.gradient = grad;
  out.evaluations_used = 2L * m;
  return out;
}

inline EsGradientEstimate es_gradient(Blackbox& f, const Eigen::VectorXd& theta,
                                      double sigma, const SamplePool& pool,
                                      EsMode mode) {
  return es_gradient(f, theta, sigma, pool.points(), mode);
}

// ---------------------------------------------------------------------------
// Guided evolution strategy: perturbations follow a covariance that blends an
// isotropic component with the span of recent gradient estimates.

struct GuidedEsState {
  Eigen::VectorXd theta;
  std::deque<Eigen::VectorXd> gradient_buffer;
  int buffer_capacity = 1;
  double alpha = 0.5;
  double sigma = 0.1;
  double step = 0.1;
  long iteration = 0;
};

namespace detail {

// Orthonormal basis of the span of the buffered gradients; may have fewer
// columns than vectors when they are dependent.
inline Eigen::MatrixXd guided_subspace(const GuidedEsState& s) {
  const int d = static_cast<int>(s.theta.size());
  const int k = static_cast<int>(s.gradient_buffer.size());
  if (k == 0) return Eigen::MatrixXd(d, 0);
  Eigen::MatrixXd stacked(d, k);
  for (int j = 0; j < k; ++j) stacked.col(j) = s.gradient_buffer[j];
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(stacked);
  qr.setThreshold(1e-12);
  const int r = static_cast<int>(qr.rank());
  if (r == 0) return Eigen::MatrixXd(d, 0);
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, r);
}

}  // namespace detail

// Draws `n` guided perturbations. With an empty buffer the law is N(0, I/d);
// otherwise N(0, (alpha/d) I + ((1-alpha)/k) U U^T) with U the buffer span.
inline Eigen::MatrixXd sample_guided_perturbations(const GuidedEsState& s,
                                                   int n, Rng& rng) {
  const int d = static_cast<int>(s.theta.size());
  const Eigen::MatrixXd u = detail::guided_subspace(s);
  const int k = static_cast<int>(u.cols());
  Eigen::MatrixXd out(n, d);
  for (int row = 0; row < n; ++row) {
    Eigen::VectorXd xi(d);
    for (int i = 0; i < d; ++i) xi[i] = gaussian(rng);
    if (k == 0) {
      out.row(row) = (xi / std::sqrt(static_cast<double>(d))).transpose();
      continue;
    }
    Eigen::VectorXd eta(k);
    for (int i = 0; i < k; ++i) eta[i] = gaussian(rng);
    const Eigen::VectorXd g =
        std::sqrt(s.alpha / d) * xi +
        std::sqrt((1.0 - s.alpha) / static_cast<double>(k)) * (u * eta);
    out.row(row) = g.transpose();
  }
  return out;
}

// One guided-ES iteration: sample directions (optionally oversampled and
// diversified through a determinantal downsample), take an antithetic gradient
// estimate, step, and record the objective at the new point with one counted
// evaluation. Seed and method fields of the record are left for the caller.
// When `dppmc` is given its subset size is taken from `m`.
inline RunRecord guided_es_step(GuidedEsState& state, Blackbox& f, int m,
                                const std::optional<DppmcConfig>& dppmc,
                                Rng& rng) {
  if (m <= 0) throw Error("guided_es_step: need at least one perturbation");
  Eigen::MatrixXd perturbations;
  if (dppmc) {
    DppmcConfig cfg = *dppmc;
    cfg.m = m;
    auto sampler = [&state](int n, Rng& r) {
      return SamplePool(sample_guided_perturbations(state, n, r));
    };
    perturbations = dppmc_draw(sampler, cfg, rng).selected;
  } else {
    perturbations = sample_guided_perturbations(state, m, rng);
  }
  EsGradientEstimate est = es_gradient(f, state.theta, state.sigma,
                                       perturbations, EsMode::kAntithetic);
  state.theta -= state.step * est.gradient;
  state.gradient_buffer.push_back(est.gradient);
  while (static_cast<int>(state.gradient_buffer.size()) >
         state.buffer_capacity)
    state.gradient_buffer.pop_front();
  ++state.iteration;
  RunRecord rec;
  rec.iteration = state.iteration;
  rec.objective = f(state.theta);
  rec.cumulative_evals = f.evaluations();
  return rec;
}

// ---------------------------------------------------------------------------
// Trust-region evolution strategy with sample reuse. Each epoch mixes nearby
// archived evaluations with fresh perturbations; the diversified variant pools
// slightly more candidates and lets a determinantal draw pick which survive.

struct TrustRegionState {
  Eigen::VectorXd theta;
  Eigen::MatrixXd archive_points;  // absolute positions of past evaluations
  Eigen::VectorXd archive_values;
  double delta = 0.2;        // reuse fraction
  double ridge_lambda = 1e-3;
  double sigma = 0.1;        // sensing radius for fresh perturbations
  double step = 0.1;
  bool use_ridge = true;     // false: plain forward estimate over fresh points
  double dppmc_sigma = 0.5;  // kernel bandwidth for the diversified variant
  long iteration = 0;
};

struct TrustRegionStepInfo {
  RunRecord record;
  int reused = 0;           // archived points carried into the epoch
  int fresh_sampled = 0;    // fresh perturbations drawn
  int pool_size = 0;        // candidates offered to the selector
  int selected = 0;         // perturbations used by the estimator
  int fresh_evaluated = 0;  // fresh points actually sent to the objective
};

inline TrustRegionStepInfo trust_region_es_step(TrustRegionState& state,
                                                Blackbox& f, int m,
                                                bool dppmc_enabled, Rng& rng) {
  if (m <= 0) throw Error("trust_region_es_step: need at least one sample");
  if (!(state.delta > 0.0 && state.delta < 1.0))
    throw Error("trust_region_es_step: reuse fraction must be in (0,1)");
  const int d = static_cast<int>(state.theta.size());
  TrustRegionStepInfo info;

  const bool have_archive = state.archive_points.rows() > 0;
  const int reuse_target =
      have_archive ? static_cast<int>(std::lround(state.delta * m)) : 0;
  int fresh_target = m - reuse_target;
  if (dppmc_enabled && have_archive)
    fresh_target = m - static_cast<int>(std::lround(0.5 * state.delta * m));

  // Archived points closest to the current iterate, re-expressed as
  // perturbations around it; their stored values are reused as-is.
  std::vector<int> order(static_cast<std::size_t>(state.archive_points.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double da =
        (state.archive_points.row(a).transpose() - state.theta).squaredNorm();
    const double db =
        (state.archive_points.row(b).transpose() - state.theta).squaredNorm();
    if (da != db) return da < db;
    return a < b;
  });
  const int reuse_count =
      std::min(reuse_target, static_cast<int>(order.size()));

  Eigen::MatrixXd pool(reuse_count + fresh_target, d);
  Eigen::VectorXd pool_values(reuse_count + fresh_target);
  std::vector<bool> pool_fresh(static_cast<std::size_t>(pool.rows()), false);
  for (int i = 0; i < reuse_count; ++i) {
    const int src = order[static_cast<std::size_t>(i)];
    pool.row(i) = state.archive_points.row(src) - state.theta.transpose();
    pool_values[i] = state.archive_values[src];
  }
  for (int i = 0; i < fresh_target; ++i) {
    for (int j = 0; j < d; ++j)
      pool(reuse_count + i, j) = state.sigma * gaussian(rng);
    pool_fresh[static_cast<std::size_t>(reuse_count + i)] = true;
  }

  info.reused = reuse_count;
  info.fresh_sampled = fresh_target;
  info.pool_size = static_cast<int>(pool.rows());

  std::vector<int> chosen;
  if (dppmc_enabled && pool.rows() > m) {
    chosen = dppmc_select(pool, m, state.dppmc_sigma, rng);
  } else {
    chosen.resize(static_cast<std::size_t>(pool.rows()));
    std::iota(chosen.begin(), chosen.end(), 0);
  }
  info.selected = static_cast<int>(chosen.size());

  // Only the surviving fresh candidates cost evaluations.
  Eigen::MatrixXd used(info.selected, d);
  Eigen::VectorXd values(info.selected);
  std::vector<bool> used_fresh(static_cast<std::size_t>(info.selected), false);
  for (int i = 0; i < info.selected; ++i) {
    const int idx = chosen[static_cast<std::size_t>(i)];
    used.row(i) = pool.row(idx);
    used_fresh[static_cast<std::size_t>(i)] =
        pool_fresh[static_cast<std::size_t>(idx)];
    if (used_fresh[static_cast<std::size_t>(i)]) {
      values[i] = f(state.theta + used.row(i).transpose());
      ++info.fresh_evaluated;
    } else {
      values[i] = pool_values[idx];
    }
  }

  Eigen::VectorXd grad;
  if (state.use_ridge) {
    const double center = f(state.theta);
    const Eigen::VectorXd y = values.array() - center;
    const Eigen::MatrixXd gram =
        used.transpose() * used +
        state.ridge_lambda * Eigen::MatrixXd::Identity(d, d);
    grad = gram.ldlt().solve(used.transpose() * y);
  } else {
    grad = Eigen::VectorXd::Zero(d);
    int fresh_used = 0;
    for (int i = 0; i < info.selected; ++i) {
      if (!used_fresh[static_cast<std::size_t>(i)]) continue;
      grad += values[i] * used.row(i).transpose();
      ++fresh_used;
    }
    if (fresh_used == 0)
      throw Error("trust_region_es_step: forward estimate needs fresh points");
    grad /= static_cast<double>(fresh_used) * state.sigma * state.sigma;
  }

  const Eigen::VectorXd old_theta = state.theta;
  state.theta -= state.step * grad;

  state.archive_points.resize(info.selected, d);
  state.archive_values.resize(info.selected);
  for (int i = 0; i < info.selected; ++i) {
    state.archive_points.row(i) = old_theta.transpose() + used.row(i);
    state.archive_values[i] = values[i];
  }

  ++state.iteration;
  info.record.iteration = state.iteration;
  info.record.objective = f(state.theta);
  info.record.cumulative_evals = f.evaluations();
  return info;
}

}  // namespace dppmc
