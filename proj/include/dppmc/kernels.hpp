#pragma once

#include <Eigen/Dense>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dppmc/common.hpp"
#include "dppmc/distributions.hpp"
#include "dppmc/dppmc.hpp"
#include "dppmc/random.hpp"

namespace dppmc {

// Shift-invariant kernel whose spectral measure is a diagonal Gaussian
// mixture; fully described by that mixture.
struct GaussianMixtureKernel {
  GaussianMixture spectral;

  explicit GaussianMixtureKernel(GaussianMixture s) : spectral(std::move(s)) {}
  int dim() const { return spectral.dim(); }
};

// Closed form of the kernel: per component and coordinate, a damped cosine
// in the coordinate difference.
inline double gm_kernel_exact(const GaussianMixtureKernel& kern,
                              const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y) {
  if (x.size() != kern.dim() || y.size() != kern.dim())
    throw Error("gm_kernel_exact: dimension mismatch");
  const Eigen::VectorXd tau = x - y;
  double total = 0.0;
  for (int q = 0; q < kern.spectral.components(); ++q) {
    double factor = 1.0;
    for (int i = 0; i < kern.dim(); ++i) {
      const double t = tau[i];
      factor *= std::exp(-2.0 * M_PI * M_PI * t * t *
                         kern.spectral.variances()(q, i)) *
                std::cos(2.0 * M_PI * t * kern.spectral.means()(q, i));
    }
    total += kern.spectral.weights()[q] * factor;
  }
  return total;
}

// A batch of frequency samples together with the scheme that produced them.
struct FeatureFrequencies {
  Eigen::MatrixXd freqs;
  std::string method;
};

// Monte Carlo estimate of the kernel from frequencies: the average of
// cos(2 pi <v, x - y>).
inline double gm_kernel_feature_estimate(const FeatureFrequencies& ff,
                                         const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& y) {
  if (ff.freqs.rows() == 0)
    throw Error("gm_kernel_feature_estimate: no frequencies");
  const Eigen::VectorXd tau = x - y;
  double total = 0.0;
  for (Eigen::Index i = 0; i < ff.freqs.rows(); ++i)
    total += std::cos(2.0 * M_PI * ff.freqs.row(i).dot(tau));
  return total / static_cast<double>(ff.freqs.rows());
}

// Draw m frequencies by the named scheme. The qmc path walks the Halton
// sequence starting at `qmc_offset`; the dppmc path oversamples by
// cfg.rho and keeps a diversified subset.
inline FeatureFrequencies draw_feature_frequencies(
    const GaussianMixtureKernel& kern, int m, const std::string& method,
    Rng& rng, const DppmcConfig& cfg = {}, std::uint64_t qmc_offset = 1) {
  FeatureFrequencies ff;
  ff.method = method;
  if (method == "iid") {
    ff.freqs = sample_gaussian_mixture(kern.spectral, m, rng).points();
  } else if (method == "qmc") {
    ff.freqs = qmc_gaussian_mixture(kern.spectral, m, qmc_offset).points();
  } else if (method == "dppmc") {
    DppmcConfig local = cfg;
    local.m = m;
    const auto sampler = [&kern](int n, Rng& r) {
      return sample_gaussian_mixture(kern.spectral, n, r);
    };
    ff.freqs = dppmc_draw(sampler, local, rng).selected;
  } else {
    throw Error("draw_feature_frequencies: unknown method '" + method + "'");
  }
  return ff;
}

struct MseRow {
  double ratio = 0.0;  // m / d
  std::string method;
  double mse = 0.0;
  double stderr_ = 0.0;
  long trials = 0;
};

struct MseReport {
  std::vector<MseRow> rows;
};

// Mean squared error of the kernel estimator over the given pairs,
// averaged across t independent frequency draws. One frequency batch serves
// every pair of a repetition, as it would in use.
inline MseRow empirical_mse(
    const GaussianMixtureKernel& kern,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs,
    int m, int t, const std::string& method, Rng& rng,
    const DppmcConfig& cfg = {}) {
  if (pairs.empty()) throw Error("empirical_mse: no evaluation pairs");
  if (t <= 0) throw Error("empirical_mse: need at least one repetition");
  std::vector<double> exact(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p)
    exact[p] = gm_kernel_exact(kern, pairs[p].first, pairs[p].second);

  double sum = 0.0, sum_sq = 0.0;
  for (int rep = 0; rep < t; ++rep) {
    const std::uint64_t offset =
        1 + static_cast<std::uint64_t>(rep) * static_cast<std::uint64_t>(m);
    const FeatureFrequencies ff =
        draw_feature_frequencies(kern, m, method, rng, cfg, offset);
    double rep_err = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const double err =
          gm_kernel_feature_estimate(ff, pairs[p].first, pairs[p].second) -
          exact[p];
      rep_err += err * err;
    }
    rep_err /= static_cast<double>(pairs.size());
    sum += rep_err;
    sum_sq += rep_err * rep_err;
  }
  MseRow row;
  row.ratio = static_cast<double>(m) / kern.dim();
  row.method = method;
  row.trials = t;
  row.mse = sum / t;
  const double var = std::max(0.0, sum_sq / t - row.mse * row.mse);
  row.stderr_ = std::sqrt(var / t);
  return row;
}

inline void write_mse_report(std::ostream& out, const MseReport& report) {
  out << "ratio,method,mse,stderr,trials\n";
  char buf[160];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%s,%.17g,%.17g,%ld\n", r.ratio,
                  r.method.c_str(), r.mse, r.stderr_, r.trials);
    out << buf;
  }
}

namespace detail {

inline bool parse_double(const std::string& cell, double* out) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || errno == ERANGE) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  if (*end != '\0') return false;
  *out = v;
  return true;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace detail

// Standardize columns to zero mean and unit variance in place. Constant
// columns are centered and left unscaled.
inline void standardize_columns(Eigen::MatrixXd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double mean = m.col(c).mean();
    m.col(c).array() -= mean;
    const double var = m.col(c).squaredNorm() / m.rows();
    if (var > 0.0) m.col(c) /= std::sqrt(var);
  }
}

// Read a numeric CSV of data points (rows), auto-skipping one header line
// when the first row contains a non-numeric cell, and standardize columns.
inline Eigen::MatrixXd load_pair_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("load_pair_dataset: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  bool header_checked = false;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    std::vector<double> row;
    row.reserve(cells.size());
    bool numeric = true;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v;
      if (!detail::parse_double(cells[c], &v)) {
        if (!header_checked) {
          numeric = false;
          break;
        }
        throw DatasetError("load_pair_dataset: non-numeric cell at line " +
                           std::to_string(lineno) + ", column " +
                           std::to_string(c + 1));
      }
      row.push_back(v);
    }
    header_checked = true;
    if (!numeric) continue;  // header line skipped
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw DatasetError("load_pair_dataset: ragged row at line " +
                         std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DatasetError("load_pair_dataset: no data in " + path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
  standardize_columns(m);
  return m;
}

// Standardized synthetic blob data: points scattered around a few Gaussian
// centers, then column-standardized.
inline Eigen::MatrixXd synthetic_blobs(int dim, int points, int blobs,
                                       Rng& rng) {
  if (dim <= 0 || points <= 0 || blobs <= 0)
    throw Error("synthetic_blobs: sizes must be positive");
  Eigen::MatrixXd centers(blobs, dim);
  for (int b = 0; b < blobs; ++b)
    for (int c = 0; c < dim; ++c) centers(b, c) = 2.0 * gaussian(rng);
  Eigen::MatrixXd m(points, dim);
  for (int r = 0; r < points; ++r) {
    const int b = static_cast<int>(uniform_open(rng) * blobs);
    for (int c = 0; c < dim; ++c)
      m(r, c) = centers(std::min(b, blobs - 1), c) + 0.5 * gaussian(rng);
  }
  standardize_columns(m);
  return m;
}

// Seeded random pairing of dataset rows.
inline std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> make_pairs(
    const Eigen::MatrixXd& points, int count, Rng& rng) {
  if (points.rows() < 2) throw Error("make_pairs: need at least two points");
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
  pairs.reserve(count);
  for (int p = 0; p < count; ++p) {
    const int i = static_cast<int>(uniform_open(rng) * points.rows());
    int j = static_cast<int>(uniform_open(rng) * (points.rows() - 1));
    if (j >= i) ++j;
    pairs.emplace_back(points.row(std::min<int>(i, points.rows() - 1)),
                       points.row(std::min<int>(j, points.rows() - 1)));
  }
  return pairs;
}

inline void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw Error("save_matrix_csv: cannot write " + path);
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
}

// Matrix round-trip loader; no header handling, no standardization.
inline Eigen::MatrixXd load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("load_matrix_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v;
      if (!detail::parse_double(cells[c], &v))
        throw DatasetError("load_matrix_csv: non-numeric cell at line " +
                           std::to_string(lineno));
      row.push_back(v);
    }
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw DatasetError("load_matrix_csv: ragged row at line " +
                         std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
  return m;
}

}  // namespace dppmc
