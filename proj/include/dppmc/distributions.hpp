#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "dppmc/common.hpp"
#include "dppmc/random.hpp"

namespace dppmc {

// Diagonal-covariance Gaussian mixture over R^d. Rows of `means` and
// `variances` are components.
class GaussianMixture {
 public:
  GaussianMixture(Eigen::MatrixXd means, Eigen::MatrixXd variances,
                  Eigen::VectorXd weights)
      : means_(std::move(means)),
        variances_(std::move(variances)),
        weights_(std::move(weights)) {
    if (means_.rows() == 0 || means_.cols() == 0)
      throw Error("GaussianMixture: empty component list");
    if (variances_.rows() != means_.rows() ||
        variances_.cols() != means_.cols())
      throw Error("GaussianMixture: means/variances shape mismatch");
    if (weights_.size() != means_.rows())
      throw Error("GaussianMixture: one weight per component required");
    for (Eigen::Index q = 0; q < weights_.size(); ++q) {
      if (weights_[q] < 0.0)
        throw Error("GaussianMixture: negative component weight");
    }
    if (std::abs(weights_.sum() - 1.0) > 1e-12)
      throw Error("GaussianMixture: weights must sum to 1");
    if ((variances_.array() <= 0.0).any())
      throw Error("GaussianMixture: variances must be positive");
  }

  static GaussianMixture single(const Eigen::VectorXd& mean,
                                const Eigen::VectorXd& variance) {
    return GaussianMixture(mean.transpose(), variance.transpose(),
                           Eigen::VectorXd::Ones(1));
  }

  static GaussianMixture standard(int dim) {
    return single(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim));
  }

  int dim() const { return static_cast<int>(means_.cols()); }
  int components() const { return static_cast<int>(means_.rows()); }
  const Eigen::MatrixXd& means() const { return means_; }
  const Eigen::MatrixXd& variances() const { return variances_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  double density(const Eigen::VectorXd& x) const {
    if (x.size() != means_.cols())
      throw Error("GaussianMixture::density: dimension mismatch");
    double total = 0.0;
    for (Eigen::Index q = 0; q < means_.rows(); ++q) {
      double logp = 0.0;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = variances_(q, i);
        const double z = x[i] - means_(q, i);
        logp += -0.5 * z * z / v - 0.5 * std::log(2.0 * M_PI * v);
      }
      total += weights_[q] * std::exp(logp);
    }
    return total;
  }

 private:
  Eigen::MatrixXd means_;
  Eigen::MatrixXd variances_;
  Eigen::VectorXd weights_;
};

enum class SampleTag { kFresh, kReused, kRenormalizedView };

// Immutable bag of sample vectors (rows) with per-sample provenance tags.
class SamplePool {
 public:
  SamplePool() = default;
  explicit SamplePool(Eigen::MatrixXd points, SampleTag tag = SampleTag::kFresh)
      : points_(std::move(points)),
        tags_(static_cast<std::size_t>(points_.rows()), tag) {}
  SamplePool(Eigen::MatrixXd points, std::vector<SampleTag> tags)
      : points_(std::move(points)), tags_(std::move(tags)) {
    if (tags_.size() != static_cast<std::size_t>(points_.rows()))
      throw Error("SamplePool: one tag per row required");
  }

  int size() const { return static_cast<int>(points_.rows()); }
  int dim() const { return static_cast<int>(points_.cols()); }
  const Eigen::MatrixXd& points() const { return points_; }
  Eigen::VectorXd point(int i) const { return points_.row(i).transpose(); }
  const std::vector<SampleTag>& tags() const { return tags_; }

 private:
  Eigen::MatrixXd points_;
  std::vector<SampleTag> tags_;
};

// First 200 primes, the bases available to the Halton sequence.
inline constexpr int kHaltonPrimes[200] = {
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37,
    41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
    157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
    227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281,
    283, 293, 307, 311, 313, 317, 331, 337, 347, 349, 353, 359,
    367, 373, 379, 383, 389, 397, 401, 409, 419, 421, 431, 433,
    439, 443, 449, 457, 461, 463, 467, 479, 487, 491, 499, 503,
    509, 521, 523, 541, 547, 557, 563, 569, 571, 577, 587, 593,
    599, 601, 607, 613, 617, 619, 631, 641, 643, 647, 653, 659,
    661, 673, 677, 683, 691, 701, 709, 719, 727, 733, 739, 743,
    751, 757, 761, 769, 773, 787, 797, 809, 811, 821, 823, 827,
    829, 839, 853, 857, 859, 863, 877, 881, 883, 887, 907, 911,
    919, 929, 937, 941, 947, 953, 967, 971, 977, 983, 991, 997,
    1009, 1013, 1019, 1021, 1031, 1033, 1039, 1049, 1051, 1061, 1063, 1069,
    1087, 1091, 1093, 1097, 1103, 1109, 1117, 1123, 1129, 1151, 1153, 1163,
    1171, 1181, 1187, 1193, 1201, 1213, 1217, 1223};

// Van der Corput radical inverse of `index` in the given base.
inline double radical_inverse(std::uint64_t index, int base) {
  double result = 0.0;
  double digit = 1.0 / base;
  while (index > 0) {
    result += digit * static_cast<double>(index % base);
    index /= base;
    digit /= base;
  }
  return result;
}

// Draw n points from the mixture; component choice and coordinate noise all
// come from the provided stream.
inline SamplePool sample_gaussian_mixture(const GaussianMixture& gm, int n,
                                          Rng& rng) {
  const int d = gm.dim();
  Eigen::MatrixXd points(n, d);
  for (int j = 0; j < n; ++j) {
    const double u = uniform_open(rng);
    int q = 0;
    double cum = gm.weights()[0];
    while (u > cum && q + 1 < gm.components()) cum += gm.weights()[++q];
    for (int i = 0; i < d; ++i)
      points(j, i) =
          gm.means()(q, i) + std::sqrt(gm.variances()(q, i)) * gaussian(rng);
  }
  return SamplePool(std::move(points));
}

inline SamplePool sample_isotropic_gaussian(int dim, int n, Rng& rng) {
  Eigen::MatrixXd points(n, dim);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < dim; ++i) points(j, i) = gaussian(rng);
  return SamplePool(std::move(points));
}

// Deterministic low-discrepancy draw from the mixture. A Halton point in
// (0,1)^(d+1) drives each sample: the extra coordinate (largest prime base)
// picks the component by inverse CDF of the weights, the first d coordinates
// (bases 2, 3, 5, ...) map through the probit onto each axis. Index 0 of the
// sequence is always skipped; `sequence_offset` is the first index used.
inline SamplePool qmc_gaussian_mixture(const GaussianMixture& gm, int n,
                                       std::uint64_t sequence_offset = 1) {
  const int d = gm.dim();
  if (d + 1 > 200)
    throw Error("qmc_gaussian_mixture: needs d+1 prime bases, table has 200");
  if (sequence_offset == 0)
    throw Error("qmc_gaussian_mixture: offset 0 hits the degenerate point");
  Eigen::MatrixXd points(n, d);
  for (int j = 0; j < n; ++j) {
    const std::uint64_t index = sequence_offset + static_cast<std::uint64_t>(j);
    const double usel = radical_inverse(index, kHaltonPrimes[d]);
    int q = 0;
    double cum = gm.weights()[0];
    while (usel > cum && q + 1 < gm.components()) cum += gm.weights()[++q];
    for (int i = 0; i < d; ++i) {
      const double u = radical_inverse(index, kHaltonPrimes[i]);
      points(j, i) =
          gm.means()(q, i) + std::sqrt(gm.variances()(q, i)) * probit(u);
    }
  }
  return SamplePool(std::move(points));
}

inline double gaussian_mixture_density(const GaussianMixture& gm,
                                       const Eigen::VectorXd& x) {
  return gm.density(x);
}

}  // namespace dppmc
