#pragma once

#include "hfdr/core.hpp"
#include "hfdr/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace test {

using hfdr::Index;
using hfdr::Matrix;
using hfdr::Vector;

inline Matrix gaussian_matrix(Index rows, Index cols, hfdr::Rng& rng) {
  std::normal_distribution<double> z;
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = z(rng);
  return m;
}

inline Vector gaussian_vector(Index n, hfdr::Rng& rng) { return gaussian_matrix(n, 1, rng).col(0); }

// n x d matrix with orthonormal columns.
inline Matrix orthonormal_columns(Index n, Index d, hfdr::Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(n, d, rng));
  return qr.householderQ() * Matrix::Identity(n, d);
}

// Sparse linear model: the first `signals` coefficients equal `strength`.
inline hfdr::Dataset linear_instance(Index n, Index d, Index signals, double strength, hfdr::Rng& rng,
                                     bool intercept = true) {
  Matrix x = gaussian_matrix(n, d, rng);
  Vector theta = Vector::Zero(d);
  theta.head(signals).setConstant(strength);
  Vector y = x * theta + gaussian_vector(n, rng);
  return hfdr::Dataset::regression(std::move(x), std::move(y), hfdr::Setting::gaussian_linear, {}, intercept);
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Asymptotic Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2),
// with the small-sample correction sqrt(n) + 0.12 + 0.11 / sqrt(n).
inline double ks_uniform_pvalue(std::vector<double> sample) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    stat = std::max({stat, sample[i] - lo, hi - sample[i]});
  }
  const double en = std::sqrt(n);
  const double lambda = (en + 0.12 + 0.11 / en) * stat;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace test
