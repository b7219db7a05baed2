#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dencgp/data.hpp"
#include "dencgp/dist_kernels.hpp"
#include "dencgp/encoders.hpp"
#include "json.hpp"

namespace dencgp {

enum class ContinuousKernel { matern52, gaussian };

std::string to_string(ContinuousKernel k);
ContinuousKernel continuous_kernel_from_string(const std::string& s);

/// Matérn 5/2 correlation at distance d >= 0 with lengthscale ell > 0.
double matern52(double d, double ell);
double gaussian_kernel(double d, double ell);

/// How one categorical input enters the kernel.
enum class EncodingMethod { one_hot, mean, mean_std, w2, sw2, mmd, hist_chi2, hist_tv, hist_hellinger };

std::string to_string(EncodingMethod m);
EncodingMethod encoding_method_from_string(const std::string& s);

/// One kernel factor built from one categorical input.
struct FactorSpec {
  std::string input;                      ///< categorical column name
  EncodingMethod method = EncodingMethod::w2;
  std::vector<std::string> outputs;       ///< encoded outputs; empty means the target
  std::optional<std::string> partition_x; ///< interaction partition against this continuous input
  Eigen::Index bins = 2;

  nlohmann::json to_json() const;
  static FactorSpec from_json(const nlohmann::json& j);
};

struct EncodingPlan {
  std::vector<FactorSpec> factors;

  /// "U1=w2,U2=mmd" (one factor per entry, target output).
  static EncodingPlan parse(const std::string& text);
  std::string describe() const;
  nlohmann::json to_json() const;
  static EncodingPlan from_json(const nlohmann::json& j);
};

/// Responses from a related source, used to enrich or replace the
/// distributional encoding of one categorical input.
struct AuxiliaryData {
  std::string input;   ///< categorical column shared with the training data
  std::string output;  ///< response column of the auxiliary data
  AuxMode mode = AuxMode::concat;
  MixedDataset data;
};

struct KernelSettings {
  ContinuousKernel continuous = ContinuousKernel::matern52;
  double beta = 1.0;
  EstimatorParams estimator{};
  bool noiseless = true;  ///< fixes the nugget ratio at 1e-8 instead of learning it

  nlohmann::json to_json() const;
  static KernelSettings from_json(const nlohmann::json& j);
};

struct OptimizerSettings {
  int starts = 8;
  int max_evals = 400;  ///< per start
  double tolerance = 1e-7;

  nlohmann::json to_json() const;
  static OptimizerSettings from_json(const nlohmann::json& j);
};

struct CategoricalKernelParams {
  DistanceMetric metric = DistanceMetric::w2;
  double gamma = 1.0;
  double beta = 1.0;
};

/// Product kernel hyperparameters. `lengthscales` covers the original
/// continuous inputs followed by the virtual features of summary encodings;
/// `categorical` has one entry per distance-based factor.
struct KernelConfig {
  ContinuousKernel continuous_kernel = ContinuousKernel::matern52;
  std::vector<double> lengthscales;
  std::vector<CategoricalKernelParams> categorical;
  double signal_variance = 1.0;
  double nugget = 1e-8;

  void validate() const;
  nlohmann::json to_json() const;
  static KernelConfig from_json(const nlohmann::json& j);
};

/// Kernel-ready rows: continuous features (original then virtual) and the
/// table index of every distance-based factor.
struct FeatureRows {
  Eigen::MatrixXd cont;
  IndexMatrix levels;

  Eigen::Index rows() const { return cont.rows(); }
};

/// [K]_ij = sigma^2 prod_s k(|a_is - b_js|; ell_s) prod_t T_t[a_it, b_jt].
Eigen::MatrixXd assemble_gram(const FeatureRows& a, const FeatureRows& b, const KernelConfig& config,
                              std::span<const LevelDistanceMatrix> dists);

/// Gaussian log density of y under N(0, K + eta^2 I).
double log_marginal_likelihood(const KernelConfig& config, const FeatureRows& train, const Eigen::VectorXd& y,
                               std::span<const LevelDistanceMatrix> dists);

/// An encoding frozen at fit time.
struct FrozenFactor {
  FactorSpec spec;
  EncodingTable table;
  std::optional<LevelDistanceMatrix> dist;  ///< distance-based factors only
  double gamma_scale = 1.0;                 ///< typical D^e, normalizes the gamma search box
};

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

struct LooResult {
  Eigen::VectorXd mean;      ///< original output scale
  Eigen::VectorXd variance;  ///< original output scale squared
  double mse_standardized = 0.0;
};

struct FitOptions {
  EncodingPlan plan;
  std::string target;  ///< output column; empty selects the first real output
  KernelSettings kernel{};
  OptimizerSettings optimizer{};
  std::uint64_t seed = 0;
  std::vector<AuxiliaryData> auxiliary;
};

class GPModel {
 public:
  const KernelConfig& config() const { return config_; }
  const std::vector<FrozenFactor>& factors() const { return factors_; }
  const Standardizer& standardizer() const { return standardizer_; }
  const std::vector<ColumnSchema>& schema() const { return schema_; }
  const FeatureRows& train_rows() const { return train_; }
  const Eigen::VectorXd& train_targets() const { return y_; }  ///< standardized
  const Eigen::MatrixXd& cholesky() const { return chol_; }
  const Eigen::VectorXd& dual_weights() const { return alpha_; }
  Eigen::Index target() const { return target_; }
  double log_likelihood() const { return log_likelihood_; }
  const KernelSettings& kernel_settings() const { return kernel_; }
  const EncodingPlan& plan() const { return plan_; }
  std::uint64_t seed() const { return seed_; }
  std::vector<double> start_objectives() const { return start_log_likelihoods_; }

  std::vector<LevelDistanceMatrix> distance_matrices() const;

  /// Rows of a raw (unstandardized) dataset with this model's schema, mapped
  /// through the frozen encodings. Throws DataError on an unseen level.
  FeatureRows encode(const MixedDataset& raw) const;

  /// Same hyperparameters with encodings merged with auxiliary data; the
  /// Cholesky factor is recomputed, nothing is re-optimized.
  GPModel with_auxiliary(const std::vector<AuxiliaryData>& aux) const;

  nlohmann::json to_json() const;
  static GPModel from_json(const nlohmann::json& j);

 private:
  friend GPModel fit(const MixedDataset& train, const FitOptions& options);
  void factorize();

  std::vector<ColumnSchema> schema_;
  Standardizer standardizer_;
  Eigen::Index target_ = 0;
  EncodingPlan plan_;
  KernelSettings kernel_;
  std::uint64_t seed_ = 0;
  std::vector<FrozenFactor> factors_;
  FeatureRows train_;
  Eigen::VectorXd y_;
  KernelConfig config_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  double log_likelihood_ = 0.0;
  std::vector<double> start_log_likelihoods_;
};

/// Maximum likelihood fit with multi-start Nelder-Mead in log space.
GPModel fit(const MixedDataset& train, const FitOptions& options);

Prediction predict(const GPModel& model, const MixedDataset& test, bool include_noise = false);

/// Closed-form leave-one-out predictions at the fitted hyperparameters.
LooResult loo_residuals(const GPModel& model);

struct CandidateSet {
  std::string input;
  std::vector<EncodingMethod> methods;
};

struct SelectionEntry {
  EncodingPlan plan;
  double loo_mse = 0.0;
  bool ok = true;
  std::string error;
};

struct SelectionResult {
  EncodingPlan best;
  std::size_t best_index = 0;
  std::vector<SelectionEntry> scores;
};

/// Fits every combination of candidate encodings and keeps the one with the
/// smallest leave-one-out MSE (standardized outputs, first listed on ties).
SelectionResult select_encoding_by_loo(const MixedDataset& train, const std::vector<CandidateSet>& candidates,
                                       const FitOptions& base, std::size_t max_combinations = 256);

}  // namespace dencgp
