#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dencgp/benchfns.hpp"
#include "dencgp/errors.hpp"
#include "dencgp/random.hpp"

using namespace dencgp;

namespace {

// Second implementations, written from the closed forms with named inputs.
double beam_oracle(double L, double h, double I) { return std::pow(L, 3) / (3e9 * std::pow(h, 4) * I); }

double borehole_oracle(const double* c, double rw, double Hl, double lead, double small) {
  const double r = c[0], Hu = c[1], Tu = c[2], Tl = c[3], L = c[4], Kw = c[5];
  const double log_ratio = std::log(r) - std::log(rw);
  const double bracket = small + 2 * L * Tu / (log_ratio * rw * rw * Kw) + Tu / Tl;
  return lead * Tu * (Hu - Hl) / (log_ratio * bracket);
}

double otl_oracle(const double* c, double Rf, double B) {
  const double Rb1 = c[0], Rb2 = c[1], Rc1 = c[2], Rc2 = c[3];
  const double Vb1 = 12 * Rb2 / (Rb1 + Rb2);
  const double common = B * (Rc2 + 9) + Rf;
  return (B * (Vb1 + 0.74) * (Rc2 + 9) + 11.35 * Rf) / common + 0.74 * B * Rf / Rc1;
}

double piston_oracle(const double* c, double P0, double k) {
  const double M = c[0], S = c[1], V0 = c[2], Ta = c[3], T0 = c[4];
  const double A = P0 * M / S + 19.62 * M / S - k * V0 / S;
  const double V = S / (2 * k) * (A + std::sqrt(A * A + 4 * k * P0 * V0 * T0 / Ta));
  return 2 * M_PI * std::sqrt(M / (k + S * S * P0 * V0 * Ta / (V * V * T0)));
}

double oracle(TestFunction f, const double* c, const std::vector<double>& lv) {
  switch (f) {
    case TestFunction::beam: return beam_oracle(c[0], c[1], lv[0]);
    case TestFunction::borehole: return borehole_oracle(c, lv[0], lv[1], 2 * M_PI, 1e-3);
    case TestFunction::borehole_lowfi: return borehole_oracle(c, lv[0], lv[1], 10, 1.5e-3);
    case TestFunction::otl: return otl_oracle(c, lv[0], lv[1]);
    case TestFunction::piston: return piston_oracle(c, lv[0], lv[1]);
  }
  return NAN;
}

}  // namespace

TEST(TestFunctions, BeamHandValue) {
  const auto& spec = test_function_spec(TestFunction::beam);
  const std::vector<double> x{15.0, 1.5}, lv{0.0491};
  EXPECT_NEAR(eval_function(spec, x, lv), 3375.0 / (3e9 * 5.0625 * 0.0491), 1e-18);
}

TEST(TestFunctions, SpecsMatchTheInputTable) {
  EXPECT_EQ(test_function_spec(TestFunction::beam).combinations(), 6);
  EXPECT_EQ(test_function_spec(TestFunction::borehole).combinations(), 12);
  EXPECT_EQ(test_function_spec(TestFunction::otl).combinations(), 24);
  EXPECT_EQ(test_function_spec(TestFunction::piston).combinations(), 15);
  EXPECT_EQ(test_function_spec(TestFunction::beam).default_n, 90);
  EXPECT_EQ(test_function_spec(TestFunction::borehole).default_n, 180);
  EXPECT_EQ(test_function_spec(TestFunction::otl).default_n, 120);
  EXPECT_EQ(test_function_spec(TestFunction::piston).default_n, 225);
  EXPECT_EQ(test_function_spec(TestFunction::otl).categorical[1].values.back(), 300.0);
}

TEST(TestFunctions, AgreeWithSecondImplementation) {
  for (auto f : {TestFunction::beam, TestFunction::borehole, TestFunction::borehole_lowfi, TestFunction::otl,
                 TestFunction::piston}) {
    const auto& spec = test_function_spec(f);
    const auto d = monte_carlo_design(spec, 1000, 77);
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      std::vector<double> c(d.x.cols()), lv;
      for (Eigen::Index s = 0; s < d.x.cols(); ++s) c[s] = d.x(i, s);
      for (Eigen::Index t = 0; t < d.u.cols(); ++t) lv.push_back(spec.categorical[t].values[d.u(i, t)]);
      const double got = eval_function(spec, c, lv), want = oracle(f, c.data(), lv);
      ASSERT_NEAR(got, want, 1e-12 * std::abs(want)) << to_string(f) << " row " << i;
      ASSERT_TRUE(std::isfinite(got));
    }
  }
}

TEST(TestFunctions, LowFidelityDiffersFromBorehole) {
  const auto& spec = test_function_spec(TestFunction::borehole);
  const std::vector<double> x{25000, 1050, 89, 89, 1400, 10950}, lv{0.1, 740};
  const double hi = eval_function(spec, x, lv);
  const double lo = eval_function(test_function_spec(TestFunction::borehole_lowfi), x, lv);
  EXPECT_GT(std::abs(hi - lo), 1e-3 * std::abs(hi));
}

TEST(TestFunctions, RejectsOutOfRangeInputs) {
  const auto& spec = test_function_spec(TestFunction::beam);
  EXPECT_THROW(eval_function(spec, std::vector<double>{25.0, 1.5}, std::vector<double>{0.0491}), DataError);
  EXPECT_THROW(eval_function(spec, std::vector<double>{15.0, 1.5}, std::vector<double>{0.05}), DataError);
  EXPECT_THROW(eval_function(spec, std::vector<double>{15.0}, std::vector<double>{0.0491}), DataError);
  EXPECT_EQ(test_function_from_string("piston"), TestFunction::piston);
  EXPECT_THROW(test_function_from_string("rosenbrock"), ConfigError);
}

TEST(SlicedDesign, EqualSlicesAndLatinProjection) {
  const auto& spec = test_function_spec(TestFunction::beam);
  const auto d = sliced_design(spec, 90, 3);
  ASSERT_EQ(d.rows(), 90);
  std::vector<int> counts(6, 0);
  for (Eigen::Index i = 0; i < 90; ++i) ++counts[d.u(i, 0)];
  for (int c : counts) EXPECT_EQ(c, 15);
  for (int level = 0; level < 6; ++level)
    for (Eigen::Index s = 0; s < 2; ++s) {
      const auto& r = spec.continuous[s];
      std::set<int> cells;
      for (Eigen::Index i = 0; i < 90; ++i) {
        if (d.u(i, 0) != level) continue;
        const double t = (d.x(i, s) - r.lo) / (r.hi - r.lo);
        ASSERT_GE(t, 0.0);
        ASSERT_LT(t, 1.0);
        cells.insert(static_cast<int>(std::floor(t * 15)));
      }
      EXPECT_EQ(cells.size(), 15u);
    }
}

TEST(SlicedDesign, DeterministicAndSeedSensitive) {
  const auto& spec = test_function_spec(TestFunction::otl);
  const auto a = sliced_design(spec, 120, 9), b = sliced_design(spec, 120, 9), c = sliced_design(spec, 120, 10);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.u, b.u);
  EXPECT_NE(a.x, c.x);
}

TEST(SlicedDesign, RoundsUpAndRejectsTooSmall) {
  const auto& spec = test_function_spec(TestFunction::borehole);
  EXPECT_EQ(sliced_design(spec, 25, 1).rows(), 36);
  EXPECT_THROW(sliced_design(spec, 11, 1), ConfigError);
}

TEST(MakeDataset, SchemaAndValues) {
  const auto& spec = test_function_spec(TestFunction::borehole);
  const auto d = sliced_design(spec, 24, 4);
  const auto ds = make_dataset(spec, d, {TestFunction::borehole, TestFunction::borehole_lowfi}, {"y1", "y2"});
  EXPECT_EQ(ds.n_continuous(), 6);
  EXPECT_EQ(ds.n_categorical(), 2);
  EXPECT_EQ(ds.n_outputs(), 2);
  EXPECT_EQ(ds.levels(1).size(), 4u);
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    std::vector<double> x(6), lv{spec.categorical[0].values[d.u(i, 0)], spec.categorical[1].values[d.u(i, 1)]};
    for (int s = 0; s < 6; ++s) x[s] = d.x(i, s);
    EXPECT_NEAR(ds.y()(i, 1), oracle(TestFunction::borehole_lowfi, x.data(), lv), 1e-12 * std::abs(ds.y()(i, 1)));
  }
}

TEST(Rrmse, Identities) {
  Eigen::VectorXd t(4);
  t << 1, 2, 3, 4;
  EXPECT_EQ(rrmse(t, t), 0.0);
  const Eigen::VectorXd m = Eigen::VectorXd::Constant(4, t.mean());
  EXPECT_NEAR(rrmse(m, t), 1.0, 1e-15);
  EXPECT_NEAR(rrmse((t.array() + 0.5).matrix(), t), 0.5 / std::sqrt(1.25), 1e-15);
  EXPECT_THROW(rrmse(t, Eigen::VectorXd::Constant(4, 2.0)), DataError);
  EXPECT_THROW(rrmse(t, Eigen::VectorXd::Zero(3)), DataError);
}

namespace {
BenchmarkConfig small_beam(int reps) {
  BenchmarkConfig c;
  c.function = TestFunction::beam;
  c.methods = {"mean", "w2"};
  c.n_test = 200;
  c.replications = reps;
  c.seed = 42;
  c.optimizer.starts = 2;
  c.optimizer.max_evals = 150;
  return c;
}
}  // namespace

TEST(Benchmark, DeterministicAcrossRunsAndThreads) {
  auto c = small_beam(3);
  const auto a = run_benchmark(c);
  const auto b = run_benchmark(c);
  c.jobs = 2;
  const auto threaded = run_benchmark(c);
  EXPECT_EQ(a.records_csv(), b.records_csv());
  EXPECT_EQ(a.records_csv(), threaded.records_csv());
  EXPECT_EQ(a.records.size(), 6u);
  EXPECT_FALSE(a.any_failed());
}

TEST(Benchmark, SingleReplicationAggregates) {
  const auto r = run_benchmark(small_beam(1));
  const auto& agg = r.aggregate("w2");
  EXPECT_EQ(agg.count, 1);
  EXPECT_EQ(agg.std, 0.0);
  EXPECT_EQ(agg.median, agg.mean);
  EXPECT_GT(agg.median, 0.0);
  const auto j = r.to_json();
  EXPECT_TRUE(j.contains("config"));
  EXPECT_THROW(r.aggregate("mmd"), ConfigError);
}

TEST(Benchmark, ConfigValidation) {
  auto c = small_beam(1);
  c.methods = {"replace"};
  EXPECT_THROW(c.validate(), ConfigError);
  c.experiment = Experiment::auxiliary;
  EXPECT_THROW(c.validate(), ConfigError);  // auxiliary needs borehole
  c.function = TestFunction::borehole;
  EXPECT_NO_THROW(c.validate());
  c.replications = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  const auto back = BenchmarkConfig::from_json(small_beam(2).to_json());
  EXPECT_EQ(back.to_json(), small_beam(2).to_json());
}
