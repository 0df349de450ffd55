#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>
#include <vector>

#include "dppmc/benchmarks.hpp"
#include "dppmc/theory_checks.hpp"

using namespace dppmc;

namespace {

DownsampledEstimatorSpec scalar_spec(std::vector<double> a, double p) {
  DownsampledEstimatorSpec spec;
  const int n = static_cast<int>(a.size());
  spec.values.resize(n, 1);
  for (int i = 0; i < n; ++i) spec.values(i, 0) = a[static_cast<std::size_t>(i)];
  spec.probabilities = Eigen::VectorXd::Constant(n, p);
  return spec;
}

}  // namespace

TEST_CASE("independent pairwise table reduces to the diagonal formula") {
  Rng rng = make_rng(11);
  DownsampledEstimatorSpec spec;
  spec.values.resize(5, 3);
  for (int i = 0; i < 5; ++i)
    for (int c = 0; c < 3; ++c) spec.values(i, c) = gaussian(rng);
  spec.probabilities.resize(5);
  for (int i = 0; i < 5; ++i)
    spec.probabilities[i] = 0.2 + 0.6 * uniform_open(rng);

  const double var = exact_variance_from_pairwise(
      spec, independent_pairwise(spec.probabilities));
  double expected = 0.0;
  for (int i = 0; i < 5; ++i)
    expected += (1.0 / spec.probabilities[i] - 1.0) *
                spec.values.row(i).squaredNorm();
  expected /= 25.0;
  CHECK(std::abs(var - expected) < 1e-12);
}

TEST_CASE("certain inclusion gives zero variance") {
  DownsampledEstimatorSpec spec = scalar_spec({3.0, -1.0, 2.0}, 1.0);
  const double var = exact_variance_from_pairwise(
      spec, independent_pairwise(spec.probabilities));
  CHECK(std::abs(var) < 1e-15);
}

TEST_CASE("pairwise variance matches full enumeration on a fixed kernel") {
  DownsampledEstimatorSpec spec = scalar_spec({1.0, 2.0, 3.0}, 0.5);
  Eigen::MatrixXd raw(3, 3);
  raw << 0.5, 0.10, 0.05,
         0.10, 0.5, 0.15,
         0.05, 0.15, 0.5;
  const MarginalKernel kernel(raw);
  const double closed = exact_variance_from_pairwise(spec, dpp_pairwise(kernel));
  CHECK(std::abs(closed - 1.4111111111111112) < 1e-12);
  const EnumeratedMoments moments = enumerate_estimator_moments(spec, kernel);
  CHECK(std::abs(moments.variance - closed) < 1e-10);
  CHECK(std::abs(moments.mean[0] - 2.0) < 1e-12);
  const Eigen::VectorXd closed_mean = downsampled_mean(spec);
  CHECK(std::abs(closed_mean[0] - 2.0) < 1e-15);
}

TEST_CASE("pairwise table validation rejects malformed input") {
  DownsampledEstimatorSpec spec = scalar_spec({1.0, 2.0, 3.0}, 0.5);
  Eigen::MatrixXd table = independent_pairwise(spec.probabilities);
  Eigen::MatrixXd skew = table;
  skew(0, 1) += 1e-6;
  CHECK_THROWS_AS(exact_variance_from_pairwise(spec, skew), Error);
  Eigen::MatrixXd wrong_diag = table;
  wrong_diag(1, 1) = 0.25;
  CHECK_THROWS_AS(exact_variance_from_pairwise(spec, wrong_diag), Error);
}

TEST_CASE("scalar construction reproduces the all-pairs kernel") {
  const DownsampledEstimatorSpec spec = scalar_spec({1.0, 1.0, 1.0, 1.0}, 0.5);
  const MarginalKernel kernel = construct_variance_reducing_kernel(spec);
  // bisection against the eigenvalue ceiling 0.5 + 3 eps < 1 - 1e-9,
  // then the 0.99 interiority shrink
  const double eps = 0.16499999966999976;
  for (int i = 0; i < 4; ++i) {
    CHECK(kernel.matrix()(i, i) == 0.5);
    for (int j = 0; j < 4; ++j)
      if (i != j) CHECK(std::abs(kernel.matrix()(i, j) - eps) < 1e-12);
  }
  DownsampledEstimatorSpec probe = spec;
  const double var_dpp = exact_variance_from_pairwise(probe, dpp_pairwise(kernel));
  CHECK(std::abs(var_dpp - 0.16832500032670022) < 1e-12);
  CHECK(std::abs(var_dpp - (0.25 - 3.0 * eps * eps)) < 1e-12);
  // the enumerated law agrees with the closed form
  const EnumeratedMoments moments = enumerate_estimator_moments(spec, kernel);
  CHECK(std::abs(moments.variance - var_dpp) < 1e-10);
  CHECK(std::abs(moments.mean[0] - 1.0) < 1e-12);
  // the raw off-diagonal sum carries the unnormalized reduction
  double raw_sum = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) raw_sum += eps * eps * 1.0 / 0.25;
  CHECK(std::abs(raw_sum - 48.0 * eps * eps) < 1e-12);
  CHECK(std::abs(pairwise_reduction_sum(spec, kernel) - raw_sum / 16.0) < 1e-12);
}

TEST_CASE("sign condition keeps only aligned pairs") {
  const DownsampledEstimatorSpec spec = scalar_spec({1.0, -1.0, 1.0}, 0.5);
  const MarginalKernel kernel = construct_variance_reducing_kernel(spec);
  CHECK(kernel.matrix()(0, 1) == 0.0);
  CHECK(kernel.matrix()(1, 2) == 0.0);
  CHECK(std::abs(kernel.matrix()(0, 2) - 0.495) < 1e-6);
}

TEST_CASE("zero epsilon request reduces to the independent variance") {
  const DownsampledEstimatorSpec spec = scalar_spec({1.0, 1.0, 1.0, 1.0}, 0.5);
  const MarginalKernel kernel = construct_variance_reducing_kernel(spec, 0.0);
  const double var_dpp = exact_variance_from_pairwise(spec, dpp_pairwise(kernel));
  const double var_iid = exact_variance_from_pairwise(
      spec, independent_pairwise(spec.probabilities));
  CHECK(var_dpp == var_iid);
}

TEST_CASE("construction rejects degenerate requests") {
  CHECK_THROWS_AS(
      construct_variance_reducing_kernel(scalar_spec({1.0, -1.0, 0.0}, 0.5)),
      NoPositivePairError);
  CHECK_THROWS_AS(construct_variance_reducing_kernel(scalar_spec({1.0, 1.0}, 0.5)),
                  Error);
  DownsampledEstimatorSpec vec;
  vec.values = Eigen::MatrixXd::Ones(4, 3);
  vec.probabilities = Eigen::VectorXd::Constant(4, 0.5);
  CHECK_THROWS_AS(construct_variance_reducing_kernel(vec), Error);
  CHECK_THROWS_AS(
      construct_variance_reducing_kernel(scalar_spec({1.0, 1.0, 1.0}, 1.0)),
      Error);
}

TEST_CASE("constructed kernels stay strictly inside the spectral box") {
  Rng rng = make_rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 5 + static_cast<int>(uniform_open(rng) * 4);
    DownsampledEstimatorSpec spec;
    spec.values.resize(n, 2);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c) spec.values(i, c) = gaussian(rng);
    spec.probabilities.resize(n);
    for (int i = 0; i < n; ++i)
      spec.probabilities[i] = 0.15 + 0.7 * uniform_open(rng);
    const MarginalKernel kernel = construct_variance_reducing_kernel(spec);
    CHECK(kernel.eigenvalues().minCoeff() > 1e-9);
    CHECK(kernel.eigenvalues().maxCoeff() < 1.0 - 1e-9);
    // gap identity: the reduction sum accounts for the whole difference
    const double var_iid = exact_variance_from_pairwise(
        spec, independent_pairwise(spec.probabilities));
    const double var_dpp =
        exact_variance_from_pairwise(spec, dpp_pairwise(kernel));
    CHECK(std::abs((var_iid - var_dpp) - pairwise_reduction_sum(spec, kernel)) <
          1e-10);
  }
}

TEST_CASE("theorem-1 verifier passes on the canonical scalar instance") {
  const DownsampledEstimatorSpec spec = scalar_spec({1.0, 1.0, 1.0, 1.0}, 0.5);
  Rng rng = make_rng(77);
  const Theorem1Report report = verify_theorem_1(spec, 20000, rng);
  CHECK(report.passed);
  CHECK(report.variance_strictly_reduced);
  CHECK(report.empirical_within_three_se);
  CHECK(report.mean_within_three_se);
  CHECK(std::abs(report.var_iid - 0.25) < 1e-15);
  CHECK(std::abs(report.var_dpp_closed_form - 0.16832500032670022) < 1e-12);
  CHECK(std::abs(report.epsilon - 0.16499999966999976) < 1e-12);
  CHECK(report.mean_iid == report.mean_dpp);
}

TEST_CASE("corollary verifier passes on the benchmark pair") {
  for (const char* name : {"sphere", "rosenbrock"}) {
    Blackbox f = benchmark_function(name, 2);
    Rng rng = make_rng(name[0] == 's' ? 101 : 202);
    const Eigen::VectorXd theta = Eigen::VectorXd::Ones(2);
    const Theorem1Report report = verify_corollary_es(
        2, 5, [&](const Eigen::VectorXd& x) { return f(x); }, theta, 0.1, 0.5,
        20000, rng);
    INFO(name);
    CHECK(report.passed);
    CHECK(report.var_dpp_closed_form < report.var_iid);
  }
}

TEST_CASE("biased mode keeps the bias equal and the gap aligned") {
  DownsampledEstimatorSpec spec = scalar_spec({1.0, 1.0, 1.0, 1.0}, 0.5);
  spec.weights = Eigen::VectorXd::Constant(4, 1.0);  // w = 2p
  Rng rng = make_rng(5);
  const BiasedReport report = verify_biased_theorem(spec, 20000, rng);
  CHECK(report.passed);
  CHECK(std::abs(report.bias_iid[0] + 0.5) < 1e-12);
  CHECK(std::abs(report.bias_dpp[0] + 0.5) < 1e-10);
  CHECK(std::abs(report.mse_gap - report.var_gap) < 1e-10);
  CHECK(report.mse_dpp < report.mse_iid);
}

TEST_CASE("random biased weights keep the gap identity") {
  Rng rng = make_rng(8);
  for (int rep = 0; rep < 5; ++rep) {
    DownsampledEstimatorSpec spec;
    spec.values.resize(6, 2);
    for (int i = 0; i < 6; ++i)
      for (int c = 0; c < 2; ++c) spec.values(i, c) = gaussian(rng);
    spec.probabilities.resize(6);
    spec.weights.resize(6);
    for (int i = 0; i < 6; ++i) {
      spec.probabilities[i] = 0.3 + 0.4 * uniform_open(rng);
      spec.weights[i] =
          spec.probabilities[i] * (0.5 + 1.5 * uniform_open(rng));
    }
    const BiasedReport report = verify_biased_theorem(spec, 5000, rng);
    CHECK(std::abs(report.mse_gap - report.var_gap) < 1e-10);
    CHECK((report.bias_iid - report.bias_dpp).norm() < 1e-10);
  }
}

TEST_CASE("unbiased specialization matches the theorem-1 numbers") {
  DownsampledEstimatorSpec spec = scalar_spec({1.0, 1.0, 1.0, 1.0}, 0.5);
  spec.weights = spec.probabilities;
  Rng rng = make_rng(6);
  const BiasedReport report = verify_biased_theorem(spec, 5000, rng);
  CHECK(report.bias_iid.norm() < 1e-12);
  CHECK(std::abs(report.var_iid - 0.25) < 1e-15);
  CHECK(std::abs(report.var_dpp - 0.16832500032670022) < 1e-12);
}

TEST_CASE("negative correlation bound holds at small dimensions") {
  Rng rng = make_rng(9);
  for (int d : {1, 2, 3, 4}) {
    const NegativeCorrelationReport report =
        verify_negative_correlation_bound(d, 10000, rng);
    INFO(d);
    CHECK(report.passed);
    CHECK(report.simplex_max_deviation <= 1e-12);
    CHECK(report.violations == 0);
    CHECK(report.falsification_trials == 10000);
    CHECK(std::abs(report.simplex_pairwise_dot + 1.0 / d) < 1e-15);
  }
  // above the search cutoff only the simplex construction runs
  const NegativeCorrelationReport wide =
      verify_negative_correlation_bound(7, 10000, rng);
  CHECK(wide.passed);
  CHECK(wide.falsification_trials == 0);
}

TEST_CASE("orthogonality argmax on the planted four-feature instance") {
  Eigen::MatrixXd features(4, 3);
  features << 1, 0, 0,
              0, 1, 0,
              0, 0, 1,
              1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0;
  const OrthogonalityReport report = verify_orthogonality_argmax(features, 2);
  CHECK(report.passed);
  CHECK(report.maximizer_count == 4);
  CHECK(report.orthogonal_family_count == 4);
  CHECK(std::abs(report.max_det - 1.0) <= 1e-9);
  CHECK(report.amgm_bound_holds);
  // the mixed pair loses exactly half the mass
  const Eigen::MatrixXd gram = features * features.transpose();
  CHECK(std::abs(principal_minor_det(gram, {0, 3}) - 0.5) < 1e-12);
}

TEST_CASE("orthogonality argmax edge subsets") {
  Eigen::MatrixXd features(4, 3);
  features << 1, 0, 0,
              0, 1, 0,
              0, 0, 1,
              1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0;
  const OrthogonalityReport singles = verify_orthogonality_argmax(features, 1);
  CHECK(singles.passed);
  CHECK(singles.maximizer_count == 4);

  const Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(3, 3);
  const OrthogonalityReport full = verify_orthogonality_argmax(basis, 3);
  CHECK(full.passed);
  CHECK(full.maximizer_count == 1);

  Eigen::MatrixXd scaled = features;
  scaled.row(0) *= 2.0;
  CHECK_THROWS_AS(verify_orthogonality_argmax(scaled, 2), Error);
}
