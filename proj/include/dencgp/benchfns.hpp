#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dencgp/data.hpp"
#include "dencgp/gp.hpp"
#include "json.hpp"

namespace dencgp {

enum class TestFunction { beam, borehole, borehole_lowfi, otl, piston };

std::string to_string(TestFunction f);
TestFunction test_function_from_string(const std::string& s);

struct ContinuousRange {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
};

struct LevelSet {
  std::string name;
  std::vector<std::string> labels;
  std::vector<double> values;
};

struct TestFunctionSpec {
  TestFunction function = TestFunction::beam;
  std::vector<ContinuousRange> continuous;
  std::vector<LevelSet> categorical;
  Eigen::Index default_n = 0;

  Eigen::Index combinations() const;
};

const TestFunctionSpec& test_function_spec(TestFunction f);

/// Evaluates the closed-form function at continuous values `x` and level
/// values `levels` (the numeric values, not indices).
double eval_function(const TestFunctionSpec& spec, std::span<const double> x, std::span<const double> levels);

/// Inputs of a design: raw continuous values and level indices into the spec.
struct Design {
  Eigen::MatrixXd x;
  IndexMatrix u;

  Eigen::Index rows() const { return x.rows(); }
};

/// Independent Latin hypercubes, one per level combination, equal sizes.
/// n is rounded up to a multiple of the number of combinations.
Design sliced_design(const TestFunctionSpec& spec, Eigen::Index n, std::uint64_t seed);

/// Uniform Monte-Carlo inputs with uniformly drawn levels.
Design monte_carlo_design(const TestFunctionSpec& spec, Eigen::Index n, std::uint64_t seed);

/// Evaluates `outputs` (functions sharing the spec's inputs) on the design.
MixedDataset make_dataset(const TestFunctionSpec& spec, const Design& design,
                          const std::vector<TestFunction>& outputs, const std::vector<std::string>& output_names);

/// sqrt(mean squared error) / population std of the truth.
double rrmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

enum class Experiment { standard, multi_output, auxiliary };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);

struct BenchmarkConfig {
  Experiment experiment = Experiment::standard;
  TestFunction function = TestFunction::beam;
  std::vector<std::string> methods;
  Eigen::Index n = 0;  ///< 0 selects the function's default size
  Eigen::Index n_test = 3000;
  Eigen::Index n_aux = 180;
  int replications = 50;
  std::uint64_t seed = 0;
  int jobs = 1;
  KernelSettings kernel{};
  OptimizerSettings optimizer{};

  void validate() const;
  nlohmann::json to_json() const;
  static BenchmarkConfig from_json(const nlohmann::json& j);
};

struct BenchmarkRecord {
  int replication = 0;
  std::uint64_t seed = 0;
  std::string method;
  std::string output;
  double rrmse = 0.0;
  double fit_seconds = 0.0;
  bool ok = true;
  std::string error;
};

struct BenchmarkAggregate {
  std::string method;
  std::string output;
  int count = 0;
  int failed = 0;
  double median = 0.0;
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::vector<BenchmarkRecord> records;
  std::vector<BenchmarkAggregate> aggregates;

  bool any_failed() const;
  const BenchmarkAggregate& aggregate(const std::string& method, const std::string& output = "y") const;
  /// Deterministic per-record table (no timings).
  std::string records_csv() const;
  nlohmann::json to_json() const;
};

BenchmarkReport run_benchmark(const BenchmarkConfig& config);

}  // namespace dencgp
