#include <gtest/gtest.h>

#include <cmath>

#include "dencgp/dist_kernels.hpp"
#include "dencgp/errors.hpp"
#include "dencgp/random.hpp"
#include "test_support.hpp"

using namespace dencgp;
namespace ts = testing_support;

namespace {

EmpiricalDistribution dist(std::vector<double> v) { return EmpiricalDistribution::from_values(v); }

std::vector<double> normal_sample(Engine& eng, int m, double shift = 0.0, double scale = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(m));
  for (auto& x : v) x = shift + scale * standard_normal(eng);
  return v;
}

Eigen::MatrixXd cloud(Engine& eng, Eigen::Index m, Eigen::Index d) {
  Eigen::MatrixXd s(m, d);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k < d; ++k) s(i, k) = standard_normal(eng);
  return s;
}

}  // namespace

TEST(Wasserstein1d, Identity) {
  Engine eng(1);
  const auto p = dist(normal_sample(eng, 17));
  EXPECT_EQ(wasserstein_1d(p, p), 0.0);
}

TEST(Wasserstein1d, PointMasses) { EXPECT_DOUBLE_EQ(wasserstein_1d(dist({0.0}), dist({1.0})), 1.0); }

TEST(Wasserstein1d, ShiftedPairs) { EXPECT_DOUBLE_EQ(wasserstein_1d(dist({0.0, 1.0}), dist({1.0, 2.0})), 1.0); }

TEST(Wasserstein1d, GridMatchesCountingOracle) {
  Engine eng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = normal_sample(eng, 1 + static_cast<int>(uniform_index(eng, 25)));
    const auto b = normal_sample(eng, 1 + static_cast<int>(uniform_index(eng, 25)), 0.5);
    const int q = 1 + static_cast<int>(uniform_index(eng, 60));
    EXPECT_NEAR(wasserstein_1d(dist(a), dist(b), 2.0, q, QuantileRule::grid), ts::w2_grid_oracle(a, b, q), 1e-12);
  }
}

TEST(Wasserstein1d, ExactOrderStatisticsForEqualSizes) {
  Engine eng(3);
  const auto a = normal_sample(eng, 20);
  const auto b = normal_sample(eng, 20, 1.0);
  auto sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double s = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) s += (sa[i] - sb[i]) * (sa[i] - sb[i]);
  EXPECT_NEAR(wasserstein_1d(dist(a), dist(b)), std::sqrt(s / 20.0), 1e-13);
}

TEST(Wasserstein1d, OrderOne) {
  EXPECT_DOUBLE_EQ(wasserstein_1d(dist({0.0, 0.0}), dist({0.0, 2.0}), 1.0), 1.0);
}

TEST(Wasserstein1d, MetricAxioms) {
  Engine eng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = dist(normal_sample(eng, 13));
    const auto q = dist(normal_sample(eng, 29, 0.3, 2.0));
    const auto r = dist(normal_sample(eng, 7, -1.0));
    const auto w = [](const auto& a, const auto& b) { return wasserstein_1d(a, b, 2.0, 100, QuantileRule::grid); };
    EXPECT_EQ(w(p, q), w(q, p));
    EXPECT_LE(w(p, r), w(p, q) + w(q, r) + 1e-9);
    EXPECT_GE(w(p, q), 0.0);
  }
}

TEST(Wasserstein1d, Errors) {
  EXPECT_THROW(wasserstein_1d(dist({1.0}), dist({2.0}), 0.5), ConfigError);
  EXPECT_THROW(wasserstein_1d(dist({1.0}), dist({2.0}), 2.0, 0), ConfigError);
  EXPECT_THROW(dist({}), DataError);
}

TEST(SlicedWasserstein, OneDimensionIsExact) {
  Engine eng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = dist(normal_sample(eng, 11));
    const auto q = dist(normal_sample(eng, 23, 1.0));
    for (int R : {1, 7, 100}) EXPECT_EQ(sliced_wasserstein(p, q, 2.0, R, 99), wasserstein_1d(p, q));
  }
}

TEST(SlicedWasserstein, TwoPointMassesConvergeToHalf) {
  Eigen::MatrixXd a(1, 2), b(1, 2);
  a << 0, 0;
  b << 1, 0;
  const double sw = sliced_wasserstein(EmpiricalDistribution(a), EmpiricalDistribution(b), 2.0, 20000, 7);
  EXPECT_NEAR(sw, 1.0 / std::sqrt(2.0), 0.01);
}

TEST(SlicedWasserstein, IdentityDeterminismAndErrors) {
  Engine eng(6);
  const EmpiricalDistribution p(cloud(eng, 12, 3)), q(cloud(eng, 9, 3));
  EXPECT_EQ(sliced_wasserstein(p, p, 2.0, 50, 1), 0.0);
  EXPECT_EQ(sliced_wasserstein(p, q, 2.0, 50, 1), sliced_wasserstein(p, q, 2.0, 50, 1));
  EXPECT_THROW(sliced_wasserstein(p, EmpiricalDistribution(cloud(eng, 4, 2)), 2.0, 10, 1), DataError);
  EXPECT_THROW(sliced_wasserstein(p, q, 2.0, 0, 1), ConfigError);
}

TEST(SphereDirections, UnitNorm) {
  const auto dirs = sphere_directions(4, 200, 3);
  for (Eigen::Index i = 0; i < dirs.rows(); ++i) EXPECT_NEAR(dirs.row(i).norm(), 1.0, 1e-14);
}

TEST(EnergyKernel, Values) {
  const double one[] = {1.0}, two[] = {2.0}, zero[] = {0.0, 0.0}, x[] = {3.0, -4.0};
  EXPECT_DOUBLE_EQ(energy_base_kernel(one, two), 1.0);
  EXPECT_EQ(energy_base_kernel(zero, x), 0.0);
  EXPECT_DOUBLE_EQ(energy_base_kernel(x, x), 5.0);
  EXPECT_THROW(energy_base_kernel(one, x), DataError);
}

TEST(MmdSquared, IdentityAndPointMasses) {
  Engine eng(7);
  const auto p = dist(normal_sample(eng, 15));
  EXPECT_NEAR(mmd_squared(p, p), 0.0, 1e-15);
  EXPECT_EQ(mmd_squared(dist({0.0}), dist({1.0})), 1.0);
}

TEST(MmdSquared, MatchesDoubleSumOracles) {
  Engine eng(8);
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(trial % 3);
    const auto m1 = 1 + static_cast<Eigen::Index>(uniform_index(eng, 6));
    const auto m2 = 1 + static_cast<Eigen::Index>(uniform_index(eng, 6));
    const auto a = cloud(eng, m1, d), b = cloud(eng, m2, d);
    const double got = mmd_squared(EmpiricalDistribution(a), EmpiricalDistribution(b));
    EXPECT_NEAR(got, ts::mmd2_kernel_oracle(a, b), 1e-10);
    EXPECT_NEAR(got, ts::half_energy_distance(a, b), 1e-10);
    EXPECT_NEAR(got, mmd_squared(EmpiricalDistribution(b), EmpiricalDistribution(a)), 1e-14);
    EXPECT_GE(got, -1e-12);
  }
}

TEST(HistogramPsi, DisjointAndEqual) {
  const Histogram a{Eigen::Vector2d(1, 0)}, b{Eigen::Vector2d(0, 1)}, h{Eigen::Vector2d(0.5, 0.5)};
  EXPECT_DOUBLE_EQ(histogram_psi(a, b, HistogramDivergence::tv), 2.0);
  EXPECT_DOUBLE_EQ(histogram_psi(a, b, HistogramDivergence::hellinger2), 2.0);
  EXPECT_DOUBLE_EQ(histogram_psi(a, b, HistogramDivergence::chi2), 2.0);
  for (auto k : {HistogramDivergence::tv, HistogramDivergence::hellinger2, HistogramDivergence::chi2}) {
    EXPECT_EQ(histogram_psi(h, h, k), 0.0);
    EXPECT_EQ(histogram_psi(a, a, k), 0.0);  // exercises the 0/0 bins of chi2
  }
  EXPECT_THROW(histogram_psi(a, Histogram{Eigen::Vector3d(1, 0, 0)}, HistogramDivergence::tv), DataError);
}

TEST(HistogramPsi, SymmetricOnRandomHistograms) {
  Engine eng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd p(4), q(4);
    for (int k = 0; k < 4; ++k) {
      p(k) = uniform01(eng);
      q(k) = uniform01(eng);
    }
    const Histogram a{p / p.sum()}, b{q / q.sum()};
    for (auto k : {HistogramDivergence::tv, HistogramDivergence::hellinger2, HistogramDivergence::chi2})
      EXPECT_NEAR(histogram_psi(a, b, k), histogram_psi(b, a, k), 1e-15);
  }
}

TEST(LevelDistanceMatrix, TrivialTables) {
  std::vector<ColumnSchema> schema{{"u", ColumnKind::categorical, std::nullopt},
                                   {"y", ColumnKind::output, std::nullopt}};
  const auto single = parse_csv("u,y\na,1\na,2\n", schema);
  const auto m1 = level_distance_matrix(distributional_encoding(single, 0, {0}), DistanceMetric::w2);
  EXPECT_EQ(m1.size(), 1);
  EXPECT_EQ(m1.D(0, 0), 0.0);
  const auto twins = parse_csv("u,y\na,1\nb,1\na,2\nb,2\n", schema);
  const auto m2 = level_distance_matrix(distributional_encoding(twins, 0, {0}), DistanceMetric::mmd2);
  EXPECT_EQ(m2.D(0, 1), 0.0);
}

TEST(LevelDistanceMatrix, Compatibility) {
  const auto ds = ts::color_rows();
  const auto mean = mean_encoding(ds, 0, 0);
  const auto distr = distributional_encoding(ds, 0, {0});
  EXPECT_THROW(level_distance_matrix(mean, DistanceMetric::w2), ConfigError);
  EXPECT_THROW(level_distance_matrix(distr, DistanceMetric::euclid2), ConfigError);
  EXPECT_THROW(level_distance_matrix(distr, DistanceMetric::chi2), ConfigError);
  EXPECT_NO_THROW(level_distance_matrix(mean, DistanceMetric::euclid2));
}

TEST(LevelDistanceMatrix, ColorExampleValues) {
  const auto distr = distributional_encoding(ts::color_rows(), 0, {0});
  const auto m = level_distance_matrix(distr, DistanceMetric::w2);
  const auto red = *distr.find("red"), green = *distr.find("green");
  // unequal sizes (4 vs 3): midpoint grid with 100 points
  const double w = ts::w2_grid_oracle({-1.5, -4.2, -3.7, -2.9}, {0.20, 0.48, 0.86}, 100);
  EXPECT_NEAR(m.D(red, green), w * w, 1e-12);
  EXPECT_EQ(m.D(red, green), m.D(green, red));
}

TEST(LevelDistanceMatrix, BeamW2AgreesWithMeanOrdering) {
  // Beam-bending style table: level responses scale like 1/I.
  const std::vector<double> inertia{0.0491, 0.0833, 0.0449, 0.0633, 0.0373, 0.0167};
  std::vector<ColumnSchema> schema{{"I", ColumnKind::categorical, std::nullopt},
                                   {"y", ColumnKind::output, std::nullopt}};
  Engine eng(10);
  std::string csv = "I,y\n";
  // The same (L, h) draws in every level make each level a rescaled copy.
  for (int rep = 0; rep < 15; ++rep) {
    const double L = 10 + 10 * uniform01(eng), h = 1 + uniform01(eng);
    for (std::size_t l = 0; l < inertia.size(); ++l)
      csv += "I" + std::to_string(l) + "," + ts::fmt(L * L * L / (3e9 * std::pow(h, 4) * inertia[l])) + "\n";
  }
  const auto ds = parse_csv(csv, schema);
  const auto m = normalized(level_distance_matrix(distributional_encoding(ds, 0, {0}), DistanceMetric::w2));
  const auto means = mean_encoding(ds, 0, 0);
  // Distances from the level with the largest mean grow as means decrease.
  std::vector<std::pair<double, Eigen::Index>> order;
  for (Eigen::Index l = 0; l < 6; ++l) order.emplace_back(std::get<Eigen::VectorXd>(means.payloads[l])(0), l);
  std::sort(order.rbegin(), order.rend());
  const auto top = order.front().second;
  for (std::size_t k = 1; k + 1 < order.size(); ++k)
    EXPECT_LE(m(top, order[k].second), m(top, order[k + 1].second));
  EXPECT_DOUBLE_EQ(m.maxCoeff(), 1.0);
}

TEST(SubstitutionGram, LimitsAndDiagonal) {
  LevelDistanceMatrix z{DistanceMetric::w2, {"a", "b", "c"}, Eigen::MatrixXd::Zero(3, 3)};
  EXPECT_EQ(substitution_gram(z, {1.0, 1.0}), Eigen::MatrixXd::Ones(3, 3));
  LevelDistanceMatrix d{DistanceMetric::mmd2, {"a", "b"}, Eigen::Matrix2d{{0, 0.5}, {0.5, 0}}};
  const auto big = substitution_gram(d, {1e6, 1.0});
  EXPECT_EQ(big(0, 0), 1.0);
  EXPECT_LT(big(0, 1), 1e-100);
  EXPECT_THROW(substitution_gram(d, {0.0, 1.0}), ConfigError);
  EXPECT_THROW(substitution_gram(d, {1.0, 2.5}), ConfigError);
}

TEST(SubstitutionGram, ExponentPerMetric) {
  // D stores squared distances: w2 uses (D)^(beta/2), mmd2 ignores beta.
  LevelDistanceMatrix w{DistanceMetric::w2, {"a", "b"}, Eigen::Matrix2d{{0, 4}, {4, 0}}};
  EXPECT_NEAR(substitution_gram(w, {0.5, 1.0})(0, 1), std::exp(-0.5 * 2.0), 1e-15);
  LevelDistanceMatrix m{DistanceMetric::mmd2, {"a", "b"}, Eigen::Matrix2d{{0, 4}, {4, 0}}};
  EXPECT_NEAR(substitution_gram(m, {0.5, 1.0})(0, 1), std::exp(-0.5 * 4.0), 1e-15);
}

TEST(SubstitutionGram, StrictlyDecreasingInGamma) {
  Engine eng(11);
  LevelDistanceMatrix d{DistanceMetric::w2, {"a", "b", "c"}, Eigen::Matrix3d{{0, 0.3, 2}, {0.3, 0, 1}, {2, 1, 0}}};
  double prev_gamma = 1e-3;
  auto prev = substitution_gram(d, {prev_gamma, 1.0});
  for (double g = 2e-3; g < 10; g *= 2) {
    const auto t = substitution_gram(d, {g, 1.0});
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) EXPECT_LT(t(i, j), prev(i, j));
    prev = t;
  }
}

TEST(SubstitutionGram, PsdOnRandomTables) {
  Engine eng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index L = 2 + static_cast<Eigen::Index>(uniform_index(eng, 8));
    std::vector<ColumnSchema> schema{{"u", ColumnKind::categorical, std::nullopt},
                                     {"y", ColumnKind::output, std::nullopt}};
    std::string csv = "u,y\n";
    for (Eigen::Index l = 0; l < L; ++l) {
      const auto m = 1 + uniform_index(eng, 20);
      const double shift = 2 * standard_normal(eng), scale = 0.2 + uniform01(eng);
      for (std::uint64_t i = 0; i < m; ++i)
        csv += "L" + std::to_string(l) + "," + std::to_string(shift + scale * standard_normal(eng)) + "\n";
    }
    const auto table = distributional_encoding(parse_csv(csv, schema), 0, {0});
    for (auto metric : {DistanceMetric::w2, DistanceMetric::mmd2, DistanceMetric::sw2}) {
      const auto D = level_distance_matrix(table, metric, {2.0, 100, 50, 3});
      for (double beta : {0.5, 1.0, 2.0}) {
        const double gamma = std::pow(10.0, -3.0 + 6.0 * uniform01(eng));
        EXPECT_GE(min_eigenvalue(substitution_gram(D, {gamma, beta})), -1e-8);
      }
    }
  }
}

TEST(DistanceExport, CsvAndJson) {
  const auto m = level_distance_matrix(distributional_encoding(ts::color_rows(), 0, {0}), DistanceMetric::w2);
  const auto csv = distance_matrix_csv(m, true);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "level,red,green,blue");
  const auto back = LevelDistanceMatrix::from_json(m.to_json());
  EXPECT_EQ(back.labels, m.labels);
  EXPECT_LT((back.D - m.D).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(normalized(m).maxCoeff(), 1.0, 1e-15);
}
