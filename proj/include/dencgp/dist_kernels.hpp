#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dencgp/encoders.hpp"
#include "json.hpp"

namespace dencgp {

enum class DistanceMetric { w2, sw2, mmd2, chi2, tv, hellinger2, euclid2 };

std::string to_string(DistanceMetric m);
DistanceMetric distance_metric_from_string(const std::string& s);

/// True for metrics whose stored value is a squared distance raised to β/2
/// inside the substitution kernel (w2, sw2); the others enter with exponent 1.
inline bool uses_beta(DistanceMetric m) { return m == DistanceMetric::w2 || m == DistanceMetric::sw2; }

enum class QuantileRule {
  automatic,  ///< order statistics when both sizes match and m <= n_quantiles
  grid,       ///< always the midpoint quantile grid
};

/// Order-r Wasserstein distance between two 1-D empirical measures,
/// estimated on the grid t_q = (q - 0.5) / n_quantiles with the generalized
/// inverse of the step ecdf.
double wasserstein_1d(const EmpiricalDistribution& p, const EmpiricalDistribution& q, double r = 2.0,
                      int n_quantiles = 100, QuantileRule rule = QuantileRule::automatic);

/// Directions drawn uniformly on S^{d-1}, one per row.
Eigen::MatrixXd sphere_directions(Eigen::Index d, int count, std::uint64_t seed);

/// Monte-Carlo sliced Wasserstein distance over `n_dirs` seeded directions.
/// In one dimension this is wasserstein_1d itself.
double sliced_wasserstein(const EmpiricalDistribution& p, const EmpiricalDistribution& q, double r = 2.0,
                          int n_dirs = 100, std::uint64_t seed = 0, int n_quantiles = 100,
                          QuantileRule rule = QuantileRule::automatic);

/// k(x, x') = (|x| + |x'| - |x - x'|) / 2.
double energy_base_kernel(std::span<const double> x, std::span<const double> x2);

/// V-statistic MMD^2 under the energy base kernel (half the energy distance).
double mmd_squared(const EmpiricalDistribution& p, const EmpiricalDistribution& q);

enum class HistogramDivergence { chi2, tv, hellinger2 };

double histogram_psi(const Histogram& a, const Histogram& b, HistogramDivergence kind);

struct EstimatorParams {
  double r = 2.0;
  int n_quantiles = 100;
  int n_dirs = 100;
  std::uint64_t seed = 0;
};

/// Squared distances between every pair of level payloads of one table.
struct LevelDistanceMatrix {
  DistanceMetric metric = DistanceMetric::w2;
  std::vector<std::string> labels;
  Eigen::MatrixXd D;

  Eigen::Index size() const { return D.rows(); }
  /// Median of D_ij^exponent over strictly positive off-diagonal entries
  /// (1 if there are none).
  double typical_scale(double exponent = 1.0) const;

  nlohmann::json to_json() const;
  static LevelDistanceMatrix from_json(const nlohmann::json& j);
};

bool metric_compatible(DistanceMetric metric, const EncodingTable& table);

LevelDistanceMatrix level_distance_matrix(const EncodingTable& table, DistanceMetric metric,
                                          const EstimatorParams& params = {});

/// Divides by the largest off-diagonal entry, for side-by-side comparisons.
Eigen::MatrixXd normalized(const LevelDistanceMatrix& m);

std::string distance_matrix_csv(const LevelDistanceMatrix& m, bool normalize);

struct SubstitutionKernelParams {
  double gamma = 1.0;
  double beta = 1.0;
};

/// T_ij = exp(-gamma * D_ij^e), e = beta / 2 for w2/sw2 and 1 otherwise.
Eigen::MatrixXd substitution_gram(const LevelDistanceMatrix& dist, const SubstitutionKernelParams& params);

double min_eigenvalue(const Eigen::MatrixXd& symmetric);

}  // namespace dencgp
