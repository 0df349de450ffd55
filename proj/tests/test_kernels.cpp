#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dppmc/kernels.hpp"

using namespace dppmc;

namespace {

GaussianMixtureKernel standard_1d() {
  return GaussianMixtureKernel(GaussianMixture::standard(1));
}

GaussianMixtureKernel mixture_1d() {
  Eigen::MatrixXd means(2, 1), vars(2, 1);
  means << 0.3, -0.5;
  vars << 0.2, 0.05;
  Eigen::VectorXd w(2);
  w << 0.6, 0.4;
  return GaussianMixtureKernel(GaussianMixture(means, vars, w));
}

GaussianMixtureKernel mixture_d(int d, int q, Rng& rng) {
  Eigen::MatrixXd means(q, d), vars(q, d);
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < d; ++b) {
      means(a, b) = gaussian(rng);
      vars(a, b) = 0.05 + 0.3 * uniform_open(rng);
    }
  Eigen::VectorXd w(q);
  for (int a = 0; a < q; ++a) w[a] = 0.2 + uniform_open(rng);
  w /= w.sum();
  return GaussianMixtureKernel(GaussianMixture(means, vars, w));
}

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

}  // namespace

TEST_CASE("kernel closed form matches frozen values") {
  const auto kern = standard_1d();
  CHECK(gm_kernel_exact(kern, vec1(0.7), vec1(0.7)) == 1.0);
  CHECK(std::abs(gm_kernel_exact(kern, vec1(0.5), vec1(0.0)) -
                 0.007191883355826368) < 1e-15);
  // Symmetry in the pair arguments.
  CHECK(gm_kernel_exact(kern, vec1(0.0), vec1(0.5)) ==
        gm_kernel_exact(kern, vec1(0.5), vec1(0.0)));
}

TEST_CASE("kernel closed form agrees with direct quadrature") {
  const auto kern = mixture_1d();
  for (double tau : {0.0, 0.1, 0.25, 0.5, 1.0}) {
    double integral = 0.0;
    const double h = 1e-4;
    for (double v = -20.0; v < 20.0; v += h) {
      const double mid = v + 0.5 * h;
      integral += std::cos(2.0 * M_PI * mid * tau) *
                  kern.spectral.density(vec1(mid)) * h;
    }
    CHECK(std::abs(gm_kernel_exact(kern, vec1(tau), vec1(0.0)) - integral) <
          1e-3);
  }
}

TEST_CASE("feature estimate converges to the closed form") {
  const auto kern = mixture_1d();
  Rng rng = make_rng(201);
  const auto ff = draw_feature_frequencies(kern, 100000, "iid", rng);
  const double est = gm_kernel_feature_estimate(ff, vec1(0.3), vec1(0.0));
  CHECK(std::abs(est - gm_kernel_exact(kern, vec1(0.3), vec1(0.0))) < 0.02);
}

TEST_CASE("feature estimate is unbiased across seeds") {
  const auto kern = mixture_1d();
  const double exact = gm_kernel_exact(kern, vec1(0.4), vec1(0.0));
  const int seeds = 2000;
  double mean = 0.0, mean_sq = 0.0;
  for (int s = 0; s < seeds; ++s) {
    Rng rng = make_rng(300 + s);
    const auto ff = draw_feature_frequencies(kern, 16, "iid", rng);
    const double est = gm_kernel_feature_estimate(ff, vec1(0.4), vec1(0.0));
    mean += est;
    mean_sq += est * est;
  }
  mean /= seeds;
  mean_sq /= seeds;
  const double se = std::sqrt((mean_sq - mean * mean) / seeds);
  CHECK(std::abs(mean - exact) <= 3.0 * se);
}

TEST_CASE("empirical mse of iid features is tiny at huge m") {
  const auto kern = mixture_1d();
  Rng rng = make_rng(202);
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs = {
      {vec1(0.2), vec1(0.0)}, {vec1(1.1), vec1(0.4)}};
  const MseRow row = empirical_mse(kern, pairs, 100000, 3, "iid", rng);
  CHECK(row.mse <= 1e-4);
  CHECK(row.trials == 3);
  CHECK(row.ratio == 100000.0);
}

TEST_CASE("qmc features beat iid features on a 1-d mixture") {
  const auto kern = mixture_1d();
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
  for (double a : {0.1, 0.35, 0.8, 1.5}) pairs.push_back({vec1(a), vec1(0.0)});
  Rng rng_iid = make_rng(203);
  Rng rng_qmc = make_rng(203);
  const MseRow iid = empirical_mse(kern, pairs, 64, 100, "iid", rng_iid);
  const MseRow qmc = empirical_mse(kern, pairs, 64, 100, "qmc", rng_qmc);
  CHECK(qmc.mse <= iid.mse);
}

TEST_CASE("diversified features do not lose to iid on a planted mixture") {
  Rng setup = make_rng(204);
  const auto kern = mixture_d(2, 2, setup);
  Eigen::MatrixXd data = synthetic_blobs(2, 60, 3, setup);
  Rng pair_rng = make_rng(205);
  const auto pairs = make_pairs(data, 20, pair_rng);
  DppmcConfig cfg;
  cfg.rho = 10.0;
  cfg.sigma = 0.5;
  Rng rng_iid = make_rng(206);
  Rng rng_dpp = make_rng(206);
  const MseRow iid = empirical_mse(kern, pairs, 8, 500, "iid", rng_iid);
  const MseRow dpp = empirical_mse(kern, pairs, 8, 500, "dppmc", rng_dpp, cfg);
  CHECK(dpp.mse <= iid.mse);
}

TEST_CASE("mse report serializes with the exact column header") {
  MseReport report;
  MseRow row;
  row.ratio = 2.0;
  row.method = "iid";
  row.mse = 0.125;
  row.stderr_ = 0.0625;
  row.trials = 10;
  report.rows.push_back(row);
  std::ostringstream out;
  write_mse_report(out, report);
  std::istringstream in(out.str());
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "ratio,method,mse,stderr,trials");
  std::getline(in, line);
  CHECK(line == "2,iid,0.125,0.0625,10");
}

TEST_CASE("dataset loader standardizes and skips a header") {
  const char* path = "kern_dataset_tmp.csv";
  {
    std::ofstream out(path);
    out << "alpha,beta\n";
    out << "1.0,10.0\n2.0,20.0\n3.0,30.0\n4.0,40.0\n";
  }
  const Eigen::MatrixXd m = load_pair_dataset(path);
  REQUIRE(m.rows() == 4);
  REQUIRE(m.cols() == 2);
  for (int c = 0; c < 2; ++c) {
    CHECK(std::abs(m.col(c).mean()) < 1e-12);
    CHECK(std::abs(m.col(c).squaredNorm() / m.rows() - 1.0) < 1e-12);
  }
  std::remove(path);
}

TEST_CASE("dataset loader rejects ragged and non-numeric rows") {
  const char* ragged = "kern_ragged_tmp.csv";
  {
    std::ofstream out(ragged);
    out << "1,2\n3,4,5\n";
  }
  CHECK_THROWS_AS(load_pair_dataset(ragged), DatasetError);
  std::remove(ragged);

  const char* alpha = "kern_alpha_tmp.csv";
  {
    std::ofstream out(alpha);
    out << "1,2\n3,oops\n";
  }
  CHECK_THROWS_AS(load_pair_dataset(alpha), DatasetError);
  std::remove(alpha);

  CHECK_THROWS_AS(load_pair_dataset("does_not_exist_anywhere.csv"),
                  DatasetError);
}

TEST_CASE("matrix csv round-trips bit for bit") {
  Rng rng = make_rng(207);
  Eigen::MatrixXd m(5, 3);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = gaussian(rng);
  const char* path = "kern_roundtrip_tmp.csv";
  save_matrix_csv(path, m);
  const Eigen::MatrixXd back = load_matrix_csv(path);
  CHECK(back == m);
  std::remove(path);
}

TEST_CASE("synthetic blobs come out standardized") {
  Rng rng = make_rng(208);
  const Eigen::MatrixXd m = synthetic_blobs(8, 200, 4, rng);
  REQUIRE(m.rows() == 200);
  REQUIRE(m.cols() == 8);
  for (int c = 0; c < 8; ++c) {
    CHECK(std::abs(m.col(c).mean()) < 1e-9);
    CHECK(std::abs(m.col(c).squaredNorm() / m.rows() - 1.0) < 1e-9);
  }
}

TEST_CASE("random pairing is seeded and never pairs a point with itself") {
  Rng rng = make_rng(209);
  Eigen::MatrixXd pts(10, 2);
  for (int r = 0; r < 10; ++r) {
    pts(r, 0) = r;
    pts(r, 1) = -r;
  }
  Rng r1 = make_rng(210), r2 = make_rng(210);
  const auto a = make_pairs(pts, 30, r1);
  const auto b = make_pairs(pts, 30, r2);
  REQUIRE(a.size() == 30);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second == b[i].second);
    CHECK(a[i].first != a[i].second);
  }
}

TEST_CASE("unknown feature methods are rejected") {
  Rng rng = make_rng(211);
  CHECK_THROWS_AS(
      draw_feature_frequencies(standard_1d(), 8, "sobol", rng), Error);
}
