#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <utility>
#include <vector>

#include "dppmc/common.hpp"
#include "dppmc/random.hpp"

namespace dppmc {

// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
class Spectrum {
 public:
  explicit Spectrum(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success)
      throw Error("Spectrum: eigendecomposition failed");
    eigenvalues_ = solver.eigenvalues();
    eigenvectors_ = solver.eigenvectors();
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const Eigen::Index n = m.rows();
    const double ortho = (eigenvectors_.transpose() * eigenvectors_ -
                          Eigen::MatrixXd::Identity(n, n))
                             .cwiseAbs()
                             .maxCoeff();
    const double recon = (eigenvectors_ *
                              eigenvalues_.asDiagonal() *
                              eigenvectors_.transpose() -
                          m)
                             .cwiseAbs()
                             .maxCoeff();
    if (ortho > 1e-8 || recon > 1e-8 * scale)
      throw Error("Spectrum: decomposition failed its own residual check");
  }

  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }

 private:
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
};

namespace detail {

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& raw,
                                   const char* who) {
  if (raw.rows() != raw.cols()) throw Error(std::string(who) + ": not square");
  const double asym = (raw - raw.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10)
    throw Error(std::string(who) + ": matrix asymmetry above tolerance");
  return 0.5 * (raw + raw.transpose());
}

}  // namespace detail

// Likelihood kernel of an L-ensemble; positive semidefinite. Slightly
// negative eigenvalues (down to -1e-8) are treated as zero.
class LEnsemble {
 public:
  explicit LEnsemble(const Eigen::MatrixXd& raw)
      : matrix_(detail::symmetrized(raw, "LEnsemble")), spectrum_(matrix_) {
    eigenvalues_ = spectrum_.eigenvalues();
    if (eigenvalues_.size() > 0 && eigenvalues_.minCoeff() < -1e-8)
      throw Error("LEnsemble: matrix is not positive semidefinite");
    eigenvalues_ = eigenvalues_.cwiseMax(0.0);
  }

  int size() const { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  // Eigenvalues after the zero clamp, ascending.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenvectors() const {
    return spectrum_.eigenvectors();
  }

  int rank() const {
    const double lmax = eigenvalues_.size() ? eigenvalues_.maxCoeff() : 0.0;
    const double tol =
        std::max(1e-12, size() * 2.2e-16 * lmax);
    return static_cast<int>((eigenvalues_.array() > tol).count());
  }

 private:
  Eigen::MatrixXd matrix_;
  Spectrum spectrum_;
  Eigen::VectorXd eigenvalues_;
};

// Marginal kernel of a DPP; eigenvalues must lie in [0,1] up to a 1e-8
// slack, and are clamped into the interval.
class MarginalKernel {
 public:
  explicit MarginalKernel(const Eigen::MatrixXd& raw)
      : matrix_(detail::symmetrized(raw, "MarginalKernel")),
        spectrum_(matrix_) {
    eigenvalues_ = spectrum_.eigenvalues();
    if (eigenvalues_.size() > 0 &&
        (eigenvalues_.minCoeff() < -1e-8 ||
         eigenvalues_.maxCoeff() > 1.0 + 1e-8))
      throw Error("MarginalKernel: eigenvalues outside [0,1]");
    eigenvalues_ = eigenvalues_.cwiseMax(0.0).cwiseMin(1.0);
  }

  int size() const { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenvectors() const {
    return spectrum_.eigenvectors();
  }

 private:
  Eigen::MatrixXd matrix_;
  Spectrum spectrum_;
  Eigen::VectorXd eigenvalues_;
};

// Determinant of the principal minor indexed by `subset` (empty minor: 1).
inline double principal_minor_det(const Eigen::MatrixXd& m,
                                  const std::vector<int>& subset) {
  const int k = static_cast<int>(subset.size());
  if (k == 0) return 1.0;
  Eigen::MatrixXd sub(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) sub(i, j) = m(subset[i], subset[j]);
  return sub.determinant();
}

// P[S = subset] under the L-ensemble: det(L_S) / det(L + I).
inline double lensemble_subset_probability(const LEnsemble& l,
                                           const std::vector<int>& subset) {
  double log_norm = 0.0;
  for (Eigen::Index i = 0; i < l.eigenvalues().size(); ++i)
    log_norm += std::log1p(l.eigenvalues()[i]);
  return principal_minor_det(l.matrix(), subset) * std::exp(-log_norm);
}

// P[subset included in S] under DPP(K): det(K_subset).
inline double marginal_inclusion_probability(const MarginalKernel& k,
                                             const std::vector<int>& subset) {
  return principal_minor_det(k.matrix(), subset);
}

// Marginal kernel of the L-ensemble: same eigenvectors, eigenvalues mapped
// through lambda / (1 + lambda).
inline MarginalKernel l_to_marginal(const LEnsemble& l) {
  const Eigen::VectorXd mapped =
      l.eigenvalues().array() / (1.0 + l.eigenvalues().array());
  return MarginalKernel(l.eigenvectors() * mapped.asDiagonal() *
                        l.eigenvectors().transpose());
}

// Inverse map, defined when every eigenvalue of K stays below one.
inline LEnsemble marginal_to_l(const MarginalKernel& k) {
  if (k.eigenvalues().size() > 0 && k.eigenvalues().maxCoeff() >= 1.0 - 1e-12)
    throw Error("marginal_to_l: an eigenvalue of K reaches 1");
  const Eigen::VectorXd mapped =
      k.eigenvalues().array() / (1.0 - k.eigenvalues().array());
  return LEnsemble(k.eigenvectors() * mapped.asDiagonal() *
                   k.eigenvectors().transpose());
}

// Table of elementary symmetric polynomials: entry (j, n) is e_j over the
// first n eigenvalues. Recursion e_j^n = e_j^{n-1} + lambda_n e_{j-1}^{n-1}.
inline Eigen::MatrixXd elementary_symmetric(const Eigen::VectorXd& lambdas,
                                            int k) {
  const int n = static_cast<int>(lambdas.size());
  if (k < 0) throw Error("elementary_symmetric: negative order");
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(k + 1, n + 1);
  table.row(0).setOnes();
  for (int j = 1; j <= k; ++j)
    for (int m = 1; m <= n; ++m)
      table(j, m) = table(j, m - 1) + lambdas[m - 1] * table(j - 1, m - 1);
  return table;
}

namespace detail {

// Common second phase: sample one item per selected eigenvector, projecting
// the basis away from each chosen coordinate.
inline std::vector<int> sample_elementary_dpp(Eigen::MatrixXd v, Rng& rng) {
  std::vector<int> chosen;
  const int rows = static_cast<int>(v.rows());
  while (v.cols() > 0) {
    const int cols = static_cast<int>(v.cols());
    // Distribution over items: squared row mass / number of vectors.
    double u = uniform_open(rng) * static_cast<double>(cols);
    int item = rows - 1;
    double cum = 0.0;
    for (int i = 0; i < rows; ++i) {
      cum += v.row(i).squaredNorm();
      if (u <= cum) {
        item = i;
        break;
      }
    }
    chosen.push_back(item);

    // Pivot on the column with the largest weight at the chosen item.
    int pivot = 0;
    for (int c = 1; c < cols; ++c)
      if (std::abs(v(item, c)) > std::abs(v(item, pivot))) pivot = c;
    if (v(item, pivot) == 0.0)
      throw Error("sample_dpp: degenerate projection step");
    const Eigen::VectorXd pcol = v.col(pivot);
    const double pval = v(item, pivot);
    for (int c = 0; c < cols; ++c) {
      if (c == pivot) continue;
      v.col(c) -= pcol * (v(item, c) / pval);
    }
    v.col(pivot) = v.col(cols - 1);
    v.conservativeResize(Eigen::NoChange, cols - 1);

    // Modified Gram-Schmidt; a column that comes out short of 1e-7 gets a
    // second orthogonalization pass before normalizing.
    for (int c = 0; c < v.cols(); ++c) {
      for (int prev = 0; prev < c; ++prev)
        v.col(c) -= v.col(prev) * v.col(prev).dot(v.col(c));
      if (v.col(c).norm() < 1e-7) {
        for (int prev = 0; prev < c; ++prev)
          v.col(c) -= v.col(prev) * v.col(prev).dot(v.col(c));
      }
      const double norm = v.col(c).norm();
      if (norm == 0.0) throw Error("sample_dpp: basis collapsed");
      v.col(c) /= norm;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace detail

// Draw a subset from DPP(K). Phase one keeps eigenvector n with probability
// lambda_n, phase two runs the elementary DPP over the kept vectors.
inline std::vector<int> sample_dpp(const MarginalKernel& k, Rng& rng) {
  std::vector<int> kept;
  for (Eigen::Index n = 0; n < k.eigenvalues().size(); ++n)
    if (uniform_open(rng) < k.eigenvalues()[n]) kept.push_back(static_cast<int>(n));
  Eigen::MatrixXd v(k.size(), kept.size());
  for (std::size_t c = 0; c < kept.size(); ++c)
    v.col(static_cast<Eigen::Index>(c)) = k.eigenvectors().col(kept[c]);
  return detail::sample_elementary_dpp(std::move(v), rng);
}

// Draw a subset from the L-ensemble: eigenvector n survives phase one with
// probability lambda_n / (1 + lambda_n).
inline std::vector<int> sample_lensemble(const LEnsemble& l, Rng& rng) {
  std::vector<int> kept;
  for (Eigen::Index n = 0; n < l.eigenvalues().size(); ++n) {
    const double lam = l.eigenvalues()[n];
    if (uniform_open(rng) < lam / (1.0 + lam)) kept.push_back(static_cast<int>(n));
  }
  Eigen::MatrixXd v(l.size(), kept.size());
  for (std::size_t c = 0; c < kept.size(); ++c)
    v.col(static_cast<Eigen::Index>(c)) = l.eigenvectors().col(kept[c]);
  return detail::sample_elementary_dpp(std::move(v), rng);
}

// Draw a fixed-size subset from the k-DPP built on L. Phase one walks the
// eigenvalues against the elementary symmetric polynomial table.
inline std::vector<int> sample_k_dpp(const LEnsemble& l, int k, Rng& rng) {
  const int n = l.size();
  if (k < 0 || k > n) throw Error("sample_k_dpp: subset size out of range");
  if (k == 0) return {};
  if (l.rank() < k)
    throw InsufficientRankError("sample_k_dpp: kernel rank below subset size");

  const Eigen::MatrixXd table = elementary_symmetric(l.eigenvalues(), k);
  std::vector<int> kept;
  int remaining = k;
  for (int m = n; m >= 1 && remaining > 0; --m) {
    double accept;
    if (m == remaining) {
      accept = 1.0;
    } else {
      const double denom = table(remaining, m);
      accept = denom > 0.0
                   ? l.eigenvalues()[m - 1] * table(remaining - 1, m - 1) / denom
                   : 1.0;
    }
    if (uniform_open(rng) < accept) {
      kept.push_back(m - 1);
      --remaining;
    }
  }
  if (remaining != 0)
    throw InsufficientRankError("sample_k_dpp: eigenvalue walk fell short");

  Eigen::MatrixXd v(n, k);
  for (int c = 0; c < k; ++c) v.col(c) = l.eigenvectors().col(kept[c]);
  return detail::sample_elementary_dpp(std::move(v), rng);
}

namespace detail {

inline std::vector<int> bits_to_subset(unsigned mask, int n) {
  std::vector<int> subset;
  for (int i = 0; i < n; ++i)
    if (mask & (1u << i)) subset.push_back(i);
  return subset;
}

}  // namespace detail

// Exact law of the k-DPP by enumerating every size-k subset. Hard cap at
// n = 20 ground-set elements.
inline std::vector<std::pair<std::vector<int>, double>>
enumerate_k_dpp_distribution(const LEnsemble& l, int k) {
  const int n = l.size();
  if (n > 20)
    throw CapExceededError("enumerate_k_dpp_distribution: ground set above 20");
  if (k < 0 || k > n) throw Error("enumerate_k_dpp_distribution: bad size");
  std::vector<std::pair<std::vector<int>, double>> out;
  double total = 0.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != k) continue;
    const auto subset = detail::bits_to_subset(mask, n);
    const double det = principal_minor_det(l.matrix(), subset);
    out.emplace_back(subset, det);
    total += det;
  }
  if (total <= 0.0)
    throw InsufficientRankError(
        "enumerate_k_dpp_distribution: no size-k subset has positive mass");
  for (auto& entry : out) entry.second /= total;
  return out;
}

// Exact law of DPP(K) over all subsets, via P[S = A] = |det(K - I on the
// complement)|. Hard cap at n = 16.
inline std::vector<std::pair<std::vector<int>, double>>
enumerate_dpp_distribution(const MarginalKernel& k) {
  const int n = k.size();
  if (n > 16)
    throw CapExceededError("enumerate_dpp_distribution: ground set above 16");
  std::vector<std::pair<std::vector<int>, double>> out;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    Eigen::MatrixXd shifted = k.matrix();
    for (int i = 0; i < n; ++i)
      if (!(mask & (1u << i))) shifted(i, i) -= 1.0;
    out.emplace_back(detail::bits_to_subset(mask, n),
                     std::abs(shifted.determinant()));
  }
  return out;
}

// True when items i and j are negatively dependent under DPP(K):
// P[j in S | i in S] < P[j in S], equivalently K_ij^2 > 0.
inline bool negative_dependence_check(const MarginalKernel& k, int i, int j) {
  if (i == j) throw Error("negative_dependence_check: items must differ");
  if (!(k.matrix()(j, j) > 0.0))
    throw Error("negative_dependence_check: item j has zero marginal");
  const double pair = marginal_inclusion_probability(k, {std::min(i, j),
                                                         std::max(i, j)});
  return pair / k.matrix()(j, j) < k.matrix()(i, i);
}

}  // namespace dppmc
