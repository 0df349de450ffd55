#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>

#include "dppmc/common.hpp"
#include "dppmc/random.hpp"

namespace dppmc {

// Objective wrapper with an exact evaluation counter and optional
// multiplicative observation noise.
class Blackbox {
 public:
  using Fn = std::function<double(const Eigen::VectorXd&)>;

  Blackbox(Fn f, int dim) : f_(std::move(f)), dim_(dim) {
    if (dim_ <= 0) throw Error("Blackbox: dimension must be positive");
  }

  // Observed value becomes f + std * standard normal.
  void set_noise_std(double std_dev, std::uint64_t seed) {
    if (std_dev < 0.0) throw Error("Blackbox: noise std must be nonnegative");
    noise_std_ = std_dev;
    noise_rng_ = make_rng(seed, 0x6e6f697365ULL);
  }

  // Observed value becomes f + factor * |f| * standard normal.
  void set_relative_noise(double factor, std::uint64_t seed) {
    if (factor < 0.0) throw Error("Blackbox: noise factor must be nonnegative");
    noise_factor_ = factor;
    noise_rng_ = make_rng(seed, 0x6e6f697365ULL);
  }

  double operator()(const Eigen::VectorXd& x) {
    if (x.size() != dim_) throw Error("Blackbox: dimension mismatch");
    ++count_;
    double v = f_(x);
    if (noise_std_ > 0.0) v += noise_std_ * gaussian(noise_rng_);
    if (noise_factor_ > 0.0)
      v += noise_factor_ * std::abs(v) * gaussian(noise_rng_);
    return v;
  }

  long evaluations() const { return count_; }
  int dim() const { return dim_; }

 private:
  Fn f_;
  int dim_;
  long count_ = 0;
  double noise_std_ = 0.0;
  double noise_factor_ = 0.0;
  Rng noise_rng_;
};

inline double sphere(const Eigen::VectorXd& x) { return x.squaredNorm(); }

inline double cigar(const Eigen::VectorXd& x) {
  double tail = 0.0;
  for (Eigen::Index i = 1; i < x.size(); ++i) tail += x[i] * x[i];
  return x[0] * x[0] + 1e6 * tail;
}

inline double rosenbrock(const Eigen::VectorXd& x) {
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    const double b = 1.0 - x[i];
    total += 100.0 * a * a + b * b;
  }
  return total;
}

inline double rastrigin(const Eigen::VectorXd& x) {
  double total = 10.0 * static_cast<double>(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    total += x[i] * x[i] - 10.0 * std::cos(2.0 * M_PI * x[i]);
  return total;
}

inline Blackbox benchmark_function(const std::string& name, int dim) {
  if (name == "sphere") return Blackbox(sphere, dim);
  if (name == "cigar") return Blackbox(cigar, dim);
  if (name == "rosenbrock") return Blackbox(rosenbrock, dim);
  if (name == "rastrigin") return Blackbox(rastrigin, dim);
  throw Error("benchmark_function: unknown function '" + name + "'");
}

}  // namespace dppmc
