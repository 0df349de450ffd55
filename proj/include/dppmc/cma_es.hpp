#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "dppmc/benchmarks.hpp"
#include "dppmc/common.hpp"
#include "dppmc/dppmc.hpp"
#include "dppmc/random.hpp"
#include "dppmc/run_record.hpp"

namespace dppmc {

// Covariance matrix adaptation with rank-one and rank-mu updates and
// cumulative step-size control, standard default constants throughout.
struct CmaState {
  Eigen::VectorXd mean;
  double sigma = 0.5;
  Eigen::MatrixXd cov;
  Eigen::VectorXd path_sigma;
  Eigen::VectorXd path_cov;
  long iteration = 0;

  int lambda = 0;
  int mu = 0;
  Eigen::VectorXd weights;
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_cov_path = 0.0;
  double c_rank_one = 0.0;
  double c_rank_mu = 0.0;
  double chi_n = 0.0;
};

inline CmaState make_cma_state(const Eigen::VectorXd& mean0, double sigma0,
                               int lambda) {
  if (lambda < 4) throw Error("make_cma_state: population must be at least 4");
  if (!(sigma0 > 0.0)) throw Error("make_cma_state: sigma must be positive");
  const int d = static_cast<int>(mean0.size());
  if (d == 0) throw Error("make_cma_state: empty mean");

  CmaState s;
  s.mean = mean0;
  s.sigma = sigma0;
  s.cov = Eigen::MatrixXd::Identity(d, d);
  s.path_sigma = Eigen::VectorXd::Zero(d);
  s.path_cov = Eigen::VectorXd::Zero(d);
  s.lambda = lambda;
  s.mu = lambda / 2;

  Eigen::VectorXd w(s.mu);
  for (int i = 0; i < s.mu; ++i)
    w[i] = std::log(s.mu + 0.5) - std::log(static_cast<double>(i + 1));
  w /= w.sum();
  s.weights = w;
  s.mu_eff = 1.0 / w.squaredNorm();

  const double dd = static_cast<double>(d);
  s.c_sigma = (s.mu_eff + 2.0) / (dd + s.mu_eff + 5.0);
  s.d_sigma =
      1.0 +
      2.0 * std::max(0.0, std::sqrt((s.mu_eff - 1.0) / (dd + 1.0)) - 1.0) +
      s.c_sigma;
  s.c_cov_path = (4.0 + s.mu_eff / dd) / (dd + 4.0 + 2.0 * s.mu_eff / dd);
  s.c_rank_one = 2.0 / ((dd + 1.3) * (dd + 1.3) + s.mu_eff);
  s.c_rank_mu =
      std::min(1.0 - s.c_rank_one, 2.0 * (s.mu_eff - 2.0 + 1.0 / s.mu_eff) /
                                       ((dd + 2.0) * (dd + 2.0) + s.mu_eff));
  s.chi_n = std::sqrt(dd) * (1.0 - 1.0 / (4.0 * dd) + 1.0 / (21.0 * dd * dd));
  return s;
}

// One generation: exactly `lambda` objective evaluations. The returned record
// carries the best value of the generation; seed/method are for the caller.
//
// With a dppmc config the generation is oversampled by rho and a determinantal
// draw over the candidate displacement vectors picks which lambda survive;
// only survivors are evaluated, so the evaluation budget does not change. The
// repulsion kernel acts on the unwhitened displacements sigma*C^{1/2}z: in
// whitened coordinates high-dimensional Gaussian pool points are nearly
// equidistant and the kernel would go flat, while the displacement geometry is
// exactly what recombination consumes. The config's subset size is ignored in
// favour of lambda.
inline RunRecord cma_es_step(CmaState& s, Blackbox& f,
                             const std::optional<DppmcConfig>& dppmc,
                             Rng& rng) {
  const int d = static_cast<int>(s.mean.size());
  if (s.lambda < 4) throw Error("cma_es_step: state not initialised");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.cov);
  if (es.info() != Eigen::Success)
    throw Error("cma_es_step: covariance eigendecomposition failed");
  const Eigen::VectorXd evals = es.eigenvalues().cwiseMax(1e-14);
  const Eigen::MatrixXd& basis = es.eigenvectors();
  const Eigen::VectorXd scale = evals.cwiseSqrt();

  int pool_n = s.lambda;
  if (dppmc) {
    if (!(dppmc->rho > 1.0))
      throw Error("cma_es_step: oversampling factor must exceed 1");
    pool_n = static_cast<int>(std::ceil(dppmc->rho * s.lambda));
  }

  // Candidates and selection run on substreams derived from the caller's
  // generator, so runs that differ only in oversampling share their candidate
  // prefix draw-for-draw (common random numbers across variants).
  Rng pool_rng = make_rng(rng(), 0x706f6f6cULL);
  Rng select_rng = make_rng(rng(), 0x73656c65ULL);

  Eigen::MatrixXd y_pool(pool_n, d);
  for (int i = 0; i < pool_n; ++i) {
    Eigen::VectorXd z(d);
    for (int j = 0; j < d; ++j) z[j] = gaussian(pool_rng);
    y_pool.row(i) = (basis * scale.cwiseProduct(z)).transpose();
  }

  std::vector<int> picked;
  if (dppmc) {
    Eigen::MatrixXd displacements = s.sigma * y_pool;
    if (dppmc->renormalize)
      displacements = renormalized_view(SamplePool(displacements)).points();
    picked = dppmc_select(displacements, s.lambda, dppmc->sigma, select_rng);
  } else {
    picked.resize(static_cast<std::size_t>(s.lambda));
    std::iota(picked.begin(), picked.end(), 0);
  }

  Eigen::MatrixXd ys(s.lambda, d);
  Eigen::VectorXd values(s.lambda);
  for (int i = 0; i < s.lambda; ++i) {
    ys.row(i) = y_pool.row(picked[static_cast<std::size_t>(i)]);
    values[i] = f(s.mean + s.sigma * ys.row(i).transpose());
  }

  std::vector<int> rank(static_cast<std::size_t>(s.lambda));
  std::iota(rank.begin(), rank.end(), 0);
  std::sort(rank.begin(), rank.end(), [&](int a, int b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return a < b;
  });

  Eigen::VectorXd y_w = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < s.mu; ++i)
    y_w += s.weights[i] * ys.row(rank[static_cast<std::size_t>(i)]).transpose();

  s.mean += s.sigma * y_w;

  const Eigen::VectorXd whitened =
      basis * (basis.transpose() * y_w).cwiseQuotient(scale);
  s.path_sigma = (1.0 - s.c_sigma) * s.path_sigma +
                 std::sqrt(s.c_sigma * (2.0 - s.c_sigma) * s.mu_eff) * whitened;

  const double gens = static_cast<double>(s.iteration + 1);
  const double correction =
      std::sqrt(1.0 - std::pow(1.0 - s.c_sigma, 2.0 * gens));
  const bool h_sigma = s.path_sigma.norm() / correction <
                       (1.4 + 2.0 / (d + 1.0)) * s.chi_n;

  s.path_cov = (1.0 - s.c_cov_path) * s.path_cov;
  if (h_sigma)
    s.path_cov +=
        std::sqrt(s.c_cov_path * (2.0 - s.c_cov_path) * s.mu_eff) * y_w;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < s.mu; ++i) {
    const Eigen::VectorXd y =
        ys.row(rank[static_cast<std::size_t>(i)]).transpose();
    rank_mu += s.weights[i] * y * y.transpose();
  }
  const double stall = h_sigma ? 0.0 : s.c_cov_path * (2.0 - s.c_cov_path);
  s.cov = (1.0 - s.c_rank_one - s.c_rank_mu) * s.cov +
          s.c_rank_one * (s.path_cov * s.path_cov.transpose() + stall * s.cov) +
          s.c_rank_mu * rank_mu;
  s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();

  s.sigma *= std::exp((s.c_sigma / s.d_sigma) *
                      (s.path_sigma.norm() / s.chi_n - 1.0));
  if (s.sigma > 1e8)
    throw CovarianceBlowupError(
        "cma_es_step: step size exceeded 1e8; the objective appears unbounded "
        "below or the update is diverging");

  ++s.iteration;
  RunRecord rec;
  rec.iteration = s.iteration;
  rec.objective = values[rank[0]];
  rec.cumulative_evals = f.evaluations();
  return rec;
}

}  // namespace dppmc
