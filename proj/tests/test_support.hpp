#pragma once

// Fixtures and brute-force oracles shared by the unit and acceptance tests.
// The oracles deliberately avoid the library's own helpers.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dencgp/data.hpp"

namespace testing_support {

inline const char* kColorCsv =
    "X1,X2,U1,Y\n"
    "0.47,-1.47,red,-1.5\n"
    "0.52,-0.79,green,0.20\n"
    "0.11,-2.67,green,0.48\n"
    "0.75,0.43,blue,1.82\n"
    "0.11,1.91,red,-4.2\n"
    "0.96,2.92,blue,2.34\n"
    "0.64,0.33,blue,4.51\n"
    "0.01,2.14,red,-3.7\n"
    "0.15,1.39,green,0.86\n"
    "0.63,-1.93,red,-2.9\n";

inline std::vector<dencgp::ColumnSchema> color_schema() {
  using dencgp::ColumnKind;
  return {{"X1", ColumnKind::continuous, std::nullopt},
          {"X2", ColumnKind::continuous, std::nullopt},
          {"U1", ColumnKind::categorical, std::nullopt},
          {"Y", ColumnKind::output, std::nullopt}};
}

inline dencgp::MixedDataset color_rows() { return dencgp::parse_csv(kColorCsv, color_schema()); }

// Same rows with the fruit classes as a class output.
inline dencgp::MixedDataset fruit_rows() {
  using dencgp::ColumnKind;
  const char* csv =
      "X1,X2,U1,C\n"
      "0.47,-1.47,red,apple\n"
      "0.52,-0.79,green,apple\n"
      "0.11,-2.67,green,banana\n"
      "0.75,0.43,blue,orange\n"
      "0.11,1.91,red,orange\n"
      "0.96,2.92,blue,banana\n"
      "0.64,0.33,blue,apple\n"
      "0.01,2.14,red,banana\n"
      "0.15,1.39,green,orange\n"
      "0.63,-1.93,red,banana\n";
  std::vector<dencgp::ColumnSchema> schema{
      {"X1", ColumnKind::continuous, std::nullopt},
      {"X2", ColumnKind::continuous, std::nullopt},
      {"U1", ColumnKind::categorical, std::nullopt},
      {"C", ColumnKind::output, std::vector<std::string>{"apple", "orange", "banana"}}};
  return dencgp::parse_csv(csv, schema);
}

/// Left-continuous quantile by ecdf counting: smallest sample v with
/// #{x <= v} / m >= t.
inline double quantile_by_counting(const std::vector<double>& xs, double t) {
  double best = std::numeric_limits<double>::infinity();
  const auto m = static_cast<double>(xs.size());
  for (double v : xs) {
    const auto below = std::count_if(xs.begin(), xs.end(), [&](double w) { return w <= v; });
    if (static_cast<double>(below) / m >= t - 1e-15) best = std::min(best, v);
  }
  return best;
}

inline double w2_grid_oracle(const std::vector<double>& a, const std::vector<double>& b, int q) {
  double s = 0.0;
  for (int k = 1; k <= q; ++k) {
    const double t = (k - 0.5) / q;
    const double d = quantile_by_counting(a, t) - quantile_by_counting(b, t);
    s += d * d;
  }
  return std::sqrt(s / q);
}

/// Half the energy distance from explicit double sums.
inline double half_energy_distance(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  const auto mean_dist = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    long double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < b.rows(); ++j) s += (a.row(i) - b.row(j)).norm();
    return static_cast<double>(s / static_cast<long double>(a.rows() * b.rows()));
  };
  return 0.5 * (2.0 * mean_dist(p, q) - mean_dist(p, p) - mean_dist(q, q));
}

/// MMD^2 from kernel double sums with k(x, y) = (|x| + |y| - |x - y|) / 2.
inline double mmd2_kernel_oracle(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  const auto k = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return 0.5 * (x.norm() + y.norm() - (x - y).norm());
  };
  const auto mean_k = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    long double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < b.rows(); ++j) s += k(a.row(i).transpose(), b.row(j).transpose());
    return static_cast<double>(s / static_cast<long double>(a.rows() * b.rows()));
  };
  return mean_k(p, p) + mean_k(q, q) - 2.0 * mean_k(p, q);
}

inline double matern52_oracle(double d, double ell) {
  const double r = std::sqrt(5.0) * d / ell;
  return (1.0 + r + 5.0 * d * d / (3.0 * ell * ell)) * std::exp(-r);
}

/// Gaussian log density via the explicit inverse and determinant.
inline double dense_lml_oracle(const Eigen::MatrixXd& K, const Eigen::VectorXd& y) {
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  const Eigen::MatrixXd inv = lu.inverse();
  const double n = static_cast<double>(y.size());
  return -0.5 * y.dot(inv * y) - 0.5 * std::log(lu.determinant()) - 0.5 * n * std::log(2.0 * M_PI);
}

/// Leave-one-out by removing row i and solving the reduced system.
inline void refit_loo_oracle(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, Eigen::VectorXd& mean,
                             Eigen::VectorXd& var) {
  const auto n = K.rows();
  mean.resize(n);
  var.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) keep.push_back(j);
    const auto m = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd Kr(m, m);
    Eigen::VectorXd kr(m), yr(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      kr(a) = K(keep[a], i);
      yr(a) = y(keep[a]);
      for (Eigen::Index b = 0; b < m; ++b) Kr(a, b) = K(keep[a], keep[b]);
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(Kr);
    mean(i) = kr.dot(lu.solve(yr));
    var(i) = K(i, i) - kr.dot(lu.solve(kr));
  }
}

inline double population_variance(const Eigen::VectorXd& y) {
  return (y.array() - y.mean()).square().mean();
}

}  // namespace testing_support

namespace testing_support {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace testing_support
