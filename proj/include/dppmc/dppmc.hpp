#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "dppmc/common.hpp"
#include "dppmc/distributions.hpp"
#include "dppmc/dpp.hpp"
#include "dppmc/random.hpp"

namespace dppmc {

struct DppmcConfig {
  int m = 0;                 // how many samples the estimator keeps
  double rho = 10.0;         // oversampling factor for the candidate pool
  double sigma = 0.5;        // RBF bandwidth of the similarity kernel
  bool renormalize = false;  // equalize candidate norms for the kernel only
};

// One diversified draw: the oversampled pool, the selected indices and the
// selected original vectors.
struct DppmcDraw {
  SamplePool pool;
  std::vector<int> selected_indices;
  Eigen::MatrixXd selected;
  // Present only when renormalization was requested; the vectors the kernel
  // actually saw. Estimation never touches these.
  std::optional<SamplePool> kernel_view;
};

// Gaussian similarity kernel over row vectors; unit diagonal by
// construction.
inline LEnsemble rbf_l_ensemble(const Eigen::MatrixXd& points, double sigma) {
  if (!(sigma > 0.0)) throw Error("rbf_l_ensemble: bandwidth must be positive");
  const int n = static_cast<int>(points.rows());
  Eigen::MatrixXd l(n, n);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int i = 0; i < n; ++i) {
    l(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double d2 = (points.row(i) - points.row(j)).squaredNorm();
      l(i, j) = l(j, i) = std::exp(-d2 * inv);
    }
  }
  return LEnsemble(l);
}

inline LEnsemble rbf_l_ensemble(const SamplePool& pool, double sigma) {
  return rbf_l_ensemble(pool.points(), sigma);
}

namespace detail {

inline std::vector<int> dppmc_select_once(const Eigen::MatrixXd& points, int m,
                                          double sigma, Rng& rng) {
  LEnsemble l = rbf_l_ensemble(points, sigma);
  if (l.rank() < m) {
    // Duplicate candidates collapse the kernel; a tiny diagonal nudge keeps
    // the decomposition usable without changing the law measurably.
    Eigen::MatrixXd jittered = l.matrix();
    jittered.diagonal().array() += 1e-10;
    l = LEnsemble(jittered);
  }
  return sample_k_dpp(l, m, rng);
}

}  // namespace detail

// Pick m of the candidates through the fixed-size DPP on the similarity
// kernel. A rank failure is retried once with the bandwidth halved.
inline std::vector<int> dppmc_select(const Eigen::MatrixXd& points, int m,
                                     double sigma, Rng& rng) {
  if (m > points.rows())
    throw Error("dppmc_select: subset larger than candidate pool");
  try {
    return detail::dppmc_select_once(points, m, sigma, rng);
  } catch (const InsufficientRankError&) {
    return detail::dppmc_select_once(points, m, 0.5 * sigma, rng);
  }
}

// Renormalized view of a pool: every row rescaled to the mean norm. Rows of
// zero norm are kept as they are.
inline SamplePool renormalized_view(const SamplePool& pool) {
  Eigen::MatrixXd points = pool.points();
  double mean_norm = 0.0;
  for (int i = 0; i < pool.size(); ++i) mean_norm += points.row(i).norm();
  mean_norm /= std::max(1, pool.size());
  for (int i = 0; i < pool.size(); ++i) {
    const double norm = points.row(i).norm();
    if (norm > 0.0) points.row(i) *= mean_norm / norm;
  }
  return SamplePool(std::move(points), SampleTag::kRenormalizedView);
}

// Oversample ceil(rho * m) candidates from the sampler, then keep a
// diversified subset of size m. The similarity kernel may look at a
// renormalized view, the returned vectors are always the originals.
template <class Sampler>
DppmcDraw dppmc_draw(Sampler&& sampler, const DppmcConfig& cfg, Rng& rng) {
  if (cfg.m <= 0) throw Error("dppmc_draw: subset size must be positive");
  if (!(cfg.rho > 1.0)) throw Error("dppmc_draw: oversampling factor must exceed 1");
  const int pool_size =
      static_cast<int>(std::ceil(cfg.rho * static_cast<double>(cfg.m)));
  DppmcDraw draw;
  draw.pool = sampler(pool_size, rng);
  if (draw.pool.size() != pool_size)
    throw Error("dppmc_draw: sampler returned a pool of the wrong size");
  if (cfg.renormalize) draw.kernel_view = renormalized_view(draw.pool);
  const Eigen::MatrixXd& kernel_points =
      cfg.renormalize ? draw.kernel_view->points() : draw.pool.points();
  draw.selected_indices = dppmc_select(kernel_points, cfg.m, cfg.sigma, rng);
  draw.selected.resize(cfg.m, draw.pool.dim());
  for (int i = 0; i < cfg.m; ++i)
    draw.selected.row(i) = draw.pool.points().row(draw.selected_indices[i]);
  return draw;
}

// Plain average of h over the selected vectors; no reweighting.
template <class H>
double dppmc_estimate(const DppmcDraw& draw, H&& h) {
  if (draw.selected.rows() == 0) throw Error("dppmc_estimate: empty selection");
  double total = 0.0;
  for (Eigen::Index i = 0; i < draw.selected.rows(); ++i)
    total += h(Eigen::VectorXd(draw.selected.row(i).transpose()));
  return total / static_cast<double>(draw.selected.rows());
}

}  // namespace dppmc
