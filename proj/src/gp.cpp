#include "dencgp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>

#include "dencgp/errors.hpp"
#include "dencgp/optimize.hpp"
#include "dencgp/random.hpp"

namespace dencgp {

namespace {
constexpr double kSqrt5 = 2.23606797749978969640917366873127623544;
constexpr double kLog2Pi = 1.83787706640934548356065947281123527972;
constexpr double kBoxLo = -4.605170185988091;  // log 1e-2
constexpr double kBoxHi = 4.605170185988091;   // log 1e2
constexpr double kNuggetLo = -18.420680743952367;  // log 1e-8
constexpr double kNuggetHi = 0.0;
constexpr double kNoiselessRatio = 1e-8;
constexpr std::string_view kModelFormat = "dencgp-model/1";
}  // namespace

std::string to_string(ContinuousKernel k) { return k == ContinuousKernel::matern52 ? "matern52" : "gaussian"; }

ContinuousKernel continuous_kernel_from_string(const std::string& s) {
  if (s == "matern52") return ContinuousKernel::matern52;
  if (s == "gaussian") return ContinuousKernel::gaussian;
  throw ConfigError("unknown continuous kernel '" + s + "'");
}

double matern52(double d, double ell) {
  const double a = kSqrt5 * d / ell;
  return (1.0 + a + a * a / 3.0) * std::exp(-a);
}

double gaussian_kernel(double d, double ell) {
  const double a = d / ell;
  return std::exp(-0.5 * a * a);
}

std::string to_string(EncodingMethod m) {
  switch (m) {
    case EncodingMethod::one_hot: return "onehot";
    case EncodingMethod::mean: return "mean";
    case EncodingMethod::mean_std: return "mean_std";
    case EncodingMethod::w2: return "w2";
    case EncodingMethod::sw2: return "sw2";
    case EncodingMethod::mmd: return "mmd";
    case EncodingMethod::hist_chi2: return "hist_chi2";
    case EncodingMethod::hist_tv: return "hist_tv";
    case EncodingMethod::hist_hellinger: return "hist_hellinger";
  }
  return "?";
}

EncodingMethod encoding_method_from_string(const std::string& s) {
  for (auto m : {EncodingMethod::one_hot, EncodingMethod::mean, EncodingMethod::mean_std, EncodingMethod::w2,
                 EncodingMethod::sw2, EncodingMethod::mmd, EncodingMethod::hist_chi2, EncodingMethod::hist_tv,
                 EncodingMethod::hist_hellinger})
    if (to_string(m) == s) return m;
  if (s == "one_hot" || s == "dirac") return EncodingMethod::one_hot;
  throw ConfigError("unknown encoding method '" + s + "'");
}

namespace {

bool is_distribution_method(EncodingMethod m) {
  return m == EncodingMethod::w2 || m == EncodingMethod::sw2 || m == EncodingMethod::mmd;
}
bool is_summary_method(EncodingMethod m) { return m == EncodingMethod::mean || m == EncodingMethod::mean_std; }

DistanceMetric metric_for(EncodingMethod m) {
  switch (m) {
    case EncodingMethod::one_hot: return DistanceMetric::euclid2;
    case EncodingMethod::w2: return DistanceMetric::w2;
    case EncodingMethod::sw2: return DistanceMetric::sw2;
    case EncodingMethod::mmd: return DistanceMetric::mmd2;
    case EncodingMethod::hist_chi2: return DistanceMetric::chi2;
    case EncodingMethod::hist_tv: return DistanceMetric::tv;
    case EncodingMethod::hist_hellinger: return DistanceMetric::hellinger2;
    default: throw ConfigError("summary encodings have no distance metric");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

nlohmann::json FactorSpec::to_json() const {
  nlohmann::json j{{"input", input}, {"method", to_string(method)}, {"outputs", outputs}};
  if (partition_x) j["partition"] = {{"x", *partition_x}, {"bins", bins}};
  return j;
}

FactorSpec FactorSpec::from_json(const nlohmann::json& j) {
  FactorSpec f;
  f.input = j.at("input").get<std::string>();
  f.method = encoding_method_from_string(j.at("method").get<std::string>());
  if (j.contains("outputs")) f.outputs = j.at("outputs").get<std::vector<std::string>>();
  if (j.contains("partition")) {
    f.partition_x = j.at("partition").at("x").get<std::string>();
    f.bins = j.at("partition").value("bins", Eigen::Index{2});
  }
  return f;
}

EncodingPlan EncodingPlan::parse(const std::string& text) {
  EncodingPlan plan;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("plan entry '" + item + "' is not INPUT=METHOD");
    FactorSpec f;
    f.input = item.substr(0, eq);
    f.method = encoding_method_from_string(item.substr(eq + 1));
    plan.factors.push_back(std::move(f));
  }
  return plan;
}

std::string EncodingPlan::describe() const {
  std::string s;
  for (const auto& f : factors) {
    if (!s.empty()) s += ',';
    s += f.input + '=' + to_string(f.method);
    if (!f.outputs.empty()) {
      s += '[';
      for (std::size_t k = 0; k < f.outputs.size(); ++k) s += (k ? "+" : "") + f.outputs[k];
      s += ']';
    }
    if (f.partition_x) s += '@' + *f.partition_x + '/' + std::to_string(f.bins);
  }
  return s;
}

nlohmann::json EncodingPlan::to_json() const {
  auto j = nlohmann::json::array();
  for (const auto& f : factors) j.push_back(f.to_json());
  return j;
}

EncodingPlan EncodingPlan::from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse(j.get<std::string>());
  if (j.is_object()) {
    EncodingPlan plan;
    for (const auto& [input, method] : j.items())
      plan.factors.push_back({input, encoding_method_from_string(method.get<std::string>()), {}, std::nullopt, 2});
    return plan;
  }
  EncodingPlan plan;
  for (const auto& f : j) plan.factors.push_back(FactorSpec::from_json(f));
  return plan;
}

nlohmann::json KernelSettings::to_json() const {
  return {{"continuous", to_string(continuous)}, {"beta", beta},
          {"n_quantiles", estimator.n_quantiles}, {"n_dirs", estimator.n_dirs},
          {"sw_seed", estimator.seed}, {"noiseless", noiseless}};
}

KernelSettings KernelSettings::from_json(const nlohmann::json& j) {
  KernelSettings k;
  k.continuous = continuous_kernel_from_string(j.value("continuous", std::string("matern52")));
  k.beta = j.value("beta", 1.0);
  k.estimator.n_quantiles = j.value("n_quantiles", 100);
  k.estimator.n_dirs = j.value("n_dirs", 100);
  k.estimator.seed = j.value("sw_seed", std::uint64_t{0});
  k.noiseless = j.value("noiseless", true);
  if (!(k.beta >= 0.0 && k.beta <= 2.0)) throw ConfigError("beta must lie in [0, 2]");
  return k;
}

nlohmann::json OptimizerSettings::to_json() const {
  return {{"starts", starts}, {"max_evals", max_evals}, {"tolerance", tolerance}};
}

OptimizerSettings OptimizerSettings::from_json(const nlohmann::json& j) {
  OptimizerSettings o;
  o.starts = j.value("starts", 8);
  o.max_evals = j.value("max_evals", 400);
  o.tolerance = j.value("tolerance", 1e-7);
  if (o.starts < 1 || o.max_evals < 1) throw ConfigError("optimizer needs positive starts and max_evals");
  return o;
}

void KernelConfig::validate() const {
  for (double l : lengthscales)
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("lengthscales must be positive");
  for (const auto& c : categorical) {
    if (!(c.gamma > 0.0) || !std::isfinite(c.gamma)) throw ConfigError("gamma must be positive");
    if (!(c.beta >= 0.0 && c.beta <= 2.0)) throw ConfigError("beta must lie in [0, 2]");
  }
  if (!(signal_variance > 0.0)) throw ConfigError("signal variance must be positive");
  if (!(nugget >= 0.0)) throw ConfigError("nugget must be nonnegative");
}

nlohmann::json KernelConfig::to_json() const {
  auto cats = nlohmann::json::array();
  for (const auto& c : categorical)
    cats.push_back({{"metric", to_string(c.metric)}, {"gamma", c.gamma}, {"beta", c.beta}});
  return {{"continuous_kernel", to_string(continuous_kernel)},
          {"lengthscales", lengthscales},
          {"categorical", std::move(cats)},
          {"signal_variance", signal_variance},
          {"nugget", nugget}};
}

KernelConfig KernelConfig::from_json(const nlohmann::json& j) {
  KernelConfig c;
  c.continuous_kernel = continuous_kernel_from_string(j.at("continuous_kernel").get<std::string>());
  c.lengthscales = j.at("lengthscales").get<std::vector<double>>();
  for (const auto& e : j.at("categorical"))
    c.categorical.push_back({distance_metric_from_string(e.at("metric").get<std::string>()),
                             e.at("gamma").get<double>(), e.at("beta").get<double>()});
  c.signal_variance = j.at("signal_variance").get<double>();
  c.nugget = j.at("nugget").get<double>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Eigen::MatrixXd> category_grams(const KernelConfig& config, std::span<const LevelDistanceMatrix> dists) {
  if (dists.size() != config.categorical.size())
    throw ConfigError("one distance matrix per categorical kernel factor is required");
  std::vector<Eigen::MatrixXd> T;
  for (std::size_t t = 0; t < dists.size(); ++t)
    T.push_back(substitution_gram(dists[t], {config.categorical[t].gamma, config.categorical[t].beta}));
  return T;
}

}  // namespace

Eigen::MatrixXd assemble_gram(const FeatureRows& a, const FeatureRows& b, const KernelConfig& config,
                              std::span<const LevelDistanceMatrix> dists) {
  config.validate();
  const auto p = static_cast<Eigen::Index>(config.lengthscales.size());
  if (a.cont.cols() != p || b.cont.cols() != p) throw ConfigError("one lengthscale per continuous feature is required");
  if (a.levels.cols() != static_cast<Eigen::Index>(dists.size()) || b.levels.cols() != a.levels.cols())
    throw ConfigError("level columns disagree with the categorical factors");
  const auto T = category_grams(config, dists);
  for (std::size_t t = 0; t < T.size(); ++t) {
    const auto L = T[t].rows();
    const auto col = static_cast<Eigen::Index>(t);
    if ((a.levels.col(col).array() < 0).any() || (a.levels.col(col).array() >= L).any() ||
        (b.levels.col(col).array() < 0).any() || (b.levels.col(col).array() >= L).any())
      throw DataError("level index without an encoding payload");
  }
  const auto k1 = config.continuous_kernel == ContinuousKernel::matern52 ? matern52 : gaussian_kernel;
  Eigen::MatrixXd K(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      double v = config.signal_variance;
      for (Eigen::Index s = 0; s < p; ++s)
        v *= k1(std::abs(a.cont(i, s) - b.cont(j, s)), config.lengthscales[static_cast<std::size_t>(s)]);
      for (std::size_t t = 0; t < T.size(); ++t) {
        const auto c = static_cast<Eigen::Index>(t);
        v *= T[t](a.levels(i, c), b.levels(j, c));
      }
      K(i, j) = v;
    }
  }
  return K;
}

double log_marginal_likelihood(const KernelConfig& config, const FeatureRows& train, const Eigen::VectorXd& y,
                               std::span<const LevelDistanceMatrix> dists) {
  Eigen::MatrixXd K = assemble_gram(train, train, config, dists);
  K.diagonal().array() += config.nugget;
  const auto n = static_cast<double>(y.size());
  for (double jitter : {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter * config.signal_variance;
    Eigen::LLT<Eigen::MatrixXd> llt(Kj);
    if (llt.info() != Eigen::Success) continue;
    const Eigen::VectorXd alpha = llt.solve(y);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double v = -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * n * kLog2Pi;
    if (std::isfinite(v)) return v;
  }
  throw NumericalError("Gram matrix is not positive definite after jitter escalation");
}

// ---------------------------------------------------------------------------

namespace {

/// Correlation matrix R (unit signal variance) on the training rows with the
/// pairwise absolute differences precomputed once.
class GramCache {
 public:
  GramCache(const FeatureRows& rows, ContinuousKernel kernel) : rows_(rows), kernel_(kernel) {
    const auto n = rows.rows();
    const auto p = rows.cont.cols();
    diffs_.resize(p, n * (n - 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = j + 1; i < n; ++i, ++k)
        diffs_.col(k) = (rows.cont.row(i) - rows.cont.row(j)).cwiseAbs().transpose();
  }

  Eigen::MatrixXd correlation(const std::vector<double>& lengthscales, const std::vector<Eigen::MatrixXd>& T) const {
    const auto n = rows_.rows();
    const auto p = rows_.cont.cols();
    Eigen::ArrayXd inv(p);
    for (Eigen::Index s = 0; s < p; ++s)
      inv(s) = (kernel_ == ContinuousKernel::matern52 ? kSqrt5 : 1.0) / lengthscales[static_cast<std::size_t>(s)];
    Eigen::MatrixXd R(n, n);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      R(j, j) = 1.0;
      for (Eigen::Index i = j + 1; i < n; ++i, ++k) {
        double v = 1.0;
        if (kernel_ == ContinuousKernel::matern52) {
          double poly = 1.0, expo = 0.0;
          for (Eigen::Index s = 0; s < p; ++s) {
            const double a = diffs_(s, k) * inv(s);
            poly *= 1.0 + a + a * a / 3.0;
            expo += a;
          }
          v = poly * std::exp(-expo);
        } else {
          double expo = 0.0;
          for (Eigen::Index s = 0; s < p; ++s) {
            const double a = diffs_(s, k) * inv(s);
            expo += a * a;
          }
          v = std::exp(-0.5 * expo);
        }
        for (std::size_t t = 0; t < T.size(); ++t) {
          const auto c = static_cast<Eigen::Index>(t);
          v *= T[t](rows_.levels(i, c), rows_.levels(j, c));
        }
        R(i, j) = v;
      }
    }
    return R;
  }

 private:
  const FeatureRows& rows_;
  ContinuousKernel kernel_;
  Eigen::MatrixXd diffs_;
};

struct ProfiledFit {
  double log_likelihood = -std::numeric_limits<double>::infinity();
  double sigma2 = 0.0;
  double jitter = 0.0;
};

// Profile sigma^2 out of N(0, sigma^2 (R + tau I)).
ProfiledFit profiled_likelihood(const Eigen::MatrixXd& R, double tau, const Eigen::VectorXd& y) {
  const auto n = static_cast<double>(y.size());
  for (double jitter : {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    Eigen::MatrixXd A = R;
    A.diagonal().array() += tau + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) continue;
    const Eigen::VectorXd z = llt.matrixL().solve(y);
    const double sigma2 = z.squaredNorm() / n;
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) continue;
    const double half_logdet = llt.matrixLLT().diagonal().array().log().sum();
    ProfiledFit out;
    out.sigma2 = sigma2;
    out.jitter = jitter;
    out.log_likelihood = -0.5 * n * std::log(sigma2) - half_logdet - 0.5 * n * (1.0 + kLog2Pi);
    if (std::isfinite(out.log_likelihood)) return out;
  }
  return {};
}

}  // namespace

// ---------------------------------------------------------------------------

namespace {

struct Resolved {
  Eigen::Index input = 0;
  std::vector<Eigen::Index> outputs;
  std::optional<Eigen::Index> partition_x;
};

Resolved resolve(const FactorSpec& spec, const MixedDataset& ds, Eigen::Index target) {
  Resolved r;
  const auto t = ds.find_categorical(spec.input);
  if (!t) throw ConfigError("unknown categorical input '" + spec.input + "'");
  r.input = *t;
  if (spec.outputs.empty()) {
    r.outputs.push_back(target);
  } else {
    for (const auto& name : spec.outputs) {
      const auto k = ds.find_output(name);
      if (!k) throw ConfigError("unknown output '" + name + "'");
      r.outputs.push_back(*k);
    }
  }
  if (spec.partition_x) {
    const auto x = ds.find_continuous(*spec.partition_x);
    if (!x) throw ConfigError("unknown continuous input '" + *spec.partition_x + "'");
    r.partition_x = *x;
  }
  return r;
}

EncodingTable build_table(const FactorSpec& spec, const Resolved& r, const MixedDataset& std_train) {
  if (r.partition_x) {
    if (!is_distribution_method(spec.method) || r.outputs.size() != 1)
      throw ConfigError("interaction partitions need a univariate distributional encoding");
    return interaction_partition_encoding(std_train, r.input, *r.partition_x, spec.bins, r.outputs.front(),
                                          EmptyCellPolicy::merge_adjacent);
  }
  switch (spec.method) {
    case EncodingMethod::one_hot: return one_hot_encoding(std_train, r.input);
    case EncodingMethod::mean: return mean_encoding(std_train, r.input, r.outputs.front());
    case EncodingMethod::mean_std: return mean_std_encoding(std_train, r.input, r.outputs.front());
    case EncodingMethod::w2:
      if (r.outputs.size() != 1) throw ConfigError("w2 needs a single output; use sw2 or mmd for several");
      [[fallthrough]];
    case EncodingMethod::sw2:
    case EncodingMethod::mmd: return distributional_encoding(std_train, r.input, r.outputs);
    case EncodingMethod::hist_chi2:
    case EncodingMethod::hist_tv:
    case EncodingMethod::hist_hellinger: return histogram_encoding(std_train, r.input, r.outputs.front());
  }
  throw ConfigError("unsupported encoding method");
}

// Auxiliary responses on the training output scale of `out`.
EncodingTable auxiliary_table(const AuxiliaryData& aux, const Standardizer& st, Eigen::Index out) {
  const auto t = aux.data.find_categorical(aux.input);
  if (!t) throw ConfigError("auxiliary data lacks categorical input '" + aux.input + "'");
  const auto k = aux.data.find_output(aux.output);
  if (!k) throw ConfigError("auxiliary data lacks output '" + aux.output + "'");
  Eigen::MatrixXd y = aux.data.y();
  y.col(*k) = (y.col(*k).array() - st.y_mean(out)) / st.y_sd(out);
  const auto scaled = aux.data.with_values(aux.data.x(), std::move(y));
  auto table = distributional_encoding(scaled, *t, {*k});
  return table;
}

double kernel_exponent(DistanceMetric metric, double beta) { return uses_beta(metric) ? beta / 2.0 : 1.0; }

void apply_auxiliary(FrozenFactor& f, Eigen::Index out, const std::vector<AuxiliaryData>& aux,
                     const Standardizer& st, const KernelSettings& ks) {
  bool touched = false;
  for (const auto& a : aux) {
    if (a.input != f.spec.input || !is_distribution_method(f.spec.method)) continue;
    if (f.table.payload_dim() != 1) throw ConfigError("auxiliary data supports univariate encodings only");
    f.table = merge_auxiliary(f.table, auxiliary_table(a, st, out), a.mode);
    touched = true;
  }
  if (touched && f.dist) {
    f.dist = level_distance_matrix(f.table, f.dist->metric, ks.estimator);
  }
  (void)ks;
}

Eigen::Index resolve_target(const MixedDataset& ds, const std::string& name) {
  if (name.empty()) {
    for (Eigen::Index k = 0; k < ds.n_outputs(); ++k)
      if (!ds.output_column(k).is_class_output()) return k;
    throw ConfigError("dataset has no real-valued output to model");
  }
  const auto k = ds.find_output(name);
  if (!k) throw ConfigError("unknown target output '" + name + "'");
  if (ds.output_column(*k).is_class_output()) throw ConfigError("target '" + name + "' holds class labels");
  return *k;
}

// Standardized continuous block of a raw dataset (outputs untouched).
Eigen::MatrixXd standardized_x(const MixedDataset& raw, const Standardizer& st) {
  Eigen::MatrixXd x = raw.x();
  if (x.cols() != st.x_mean.size()) throw DataError("dataset has a different number of continuous inputs");
  for (Eigen::Index s = 0; s < x.cols(); ++s) x.col(s) = (x.col(s).array() - st.x_mean(s)) / st.x_sd(s);
  return x;
}

FeatureRows encode_rows(const MixedDataset& std_ds, const std::vector<FrozenFactor>& factors) {
  Eigen::Index virt = 0, ncat = 0;
  for (const auto& f : factors) {
    if (f.dist)
      ++ncat;
    else
      virt += f.table.payload_dim();
  }
  const auto n = std_ds.rows();
  const auto p = std_ds.n_continuous();
  FeatureRows rows;
  rows.cont.resize(n, p + virt);
  rows.cont.leftCols(p) = std_ds.x();
  rows.levels.resize(n, ncat);
  Eigen::Index vc = p, cc = 0;
  for (const auto& f : factors) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto idx = f.table.index_of_row(std_ds, i);
      if (!idx) {
        const auto t = f.table.input_index;
        throw DataError("unseen level '" + std_ds.levels(t)[static_cast<std::size_t>(std_ds.u()(i, t))] +
                        "' in input '" + std_ds.categorical_column(t).name + "' has no encoding");
      }
      if (f.dist) {
        rows.levels(i, cc) = static_cast<int>(*idx);
      } else {
        const auto& v = std::get<Eigen::VectorXd>(f.table.payloads[static_cast<std::size_t>(*idx)]);
        rows.cont.block(i, vc, 1, v.size()) = v.transpose();
      }
    }
    if (f.dist)
      ++cc;
    else
      vc += f.table.payload_dim();
  }
  return rows;
}

}  // namespace

std::vector<LevelDistanceMatrix> GPModel::distance_matrices() const {
  std::vector<LevelDistanceMatrix> out;
  for (const auto& f : factors_)
    if (f.dist) out.push_back(*f.dist);
  return out;
}

FeatureRows GPModel::encode(const MixedDataset& raw) const {
  if (raw.n_categorical() != static_cast<Eigen::Index>(std::count_if(schema_.begin(), schema_.end(), [](const auto& c) {
        return c.kind == ColumnKind::categorical;
      })))
    throw DataError("dataset has a different number of categorical inputs");
  const auto scaled = raw.with_values(standardized_x(raw, standardizer_), raw.y());
  return encode_rows(scaled, factors_);
}

void GPModel::factorize() {
  const auto dists = distance_matrices();
  Eigen::MatrixXd K = assemble_gram(train_, train_, config_, dists);
  K.diagonal().array() += config_.nugget;
  for (double jitter : {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter * config_.signal_variance;
    Eigen::LLT<Eigen::MatrixXd> llt(Kj);
    if (llt.info() != Eigen::Success) continue;
    if (jitter > 0.0) {
      std::clog << "warning: added jitter " << jitter << " * signal variance to the Gram diagonal\n";
      config_.nugget += jitter * config_.signal_variance;
    }
    chol_ = llt.matrixL();
    alpha_ = llt.solve(y_);
    const auto n = static_cast<double>(y_.size());
    log_likelihood_ = -0.5 * y_.dot(alpha_) - chol_.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
    return;
  }
  throw NumericalError("Gram matrix is not positive definite after jitter escalation");
}

GPModel fit(const MixedDataset& train, const FitOptions& options) {
  if (train.rows() < 1) throw DataError("empty training set");
  if (options.plan.factors.empty() && train.n_continuous() == 0)
    throw ConfigError("nothing to model: no continuous inputs and an empty encoding plan");

  GPModel model;
  model.schema_ = train.schema();
  model.target_ = resolve_target(train, options.target);
  model.plan_ = options.plan;
  model.kernel_ = options.kernel;
  model.seed_ = options.seed;

  auto [std_train, st] = standardize(train);
  model.standardizer_ = st;
  model.y_ = std_train.y().col(model.target_);

  for (const auto& spec : options.plan.factors) {
    const auto r = resolve(spec, std_train, model.target_);
    FrozenFactor f;
    f.spec = spec;
    f.table = build_table(spec, r, std_train);
    if (!is_summary_method(spec.method)) {
      const auto metric = metric_for(spec.method);
      if (!metric_compatible(metric, f.table))
        throw ConfigError("encoding " + to_string(spec.method) + " does not fit input '" + spec.input + "'");
      f.dist = level_distance_matrix(f.table, metric, options.kernel.estimator);
    }
    apply_auxiliary(f, r.outputs.front(), options.auxiliary, st, options.kernel);
    if (f.dist) f.gamma_scale = f.dist->typical_scale(kernel_exponent(f.dist->metric, options.kernel.beta));
    model.factors_.push_back(std::move(f));
  }
  model.train_ = encode_rows(std_train, model.factors_);

  const auto p = model.train_.cont.cols();
  std::vector<const FrozenFactor*> dist_factors;
  for (const auto& f : model.factors_)
    if (f.dist) dist_factors.push_back(&f);
  const auto q = static_cast<Eigen::Index>(dist_factors.size());
  const bool learn_nugget = !options.kernel.noiseless;
  const Eigen::Index dim = p + q + (learn_nugget ? 1 : 0);

  Eigen::VectorXd lo(dim), hi(dim);
  lo.head(p + q).setConstant(kBoxLo);
  hi.head(p + q).setConstant(kBoxHi);
  if (learn_nugget) {
    lo(dim - 1) = kNuggetLo;
    hi(dim - 1) = kNuggetHi;
  }

  const auto dists = model.distance_matrices();
  GramCache cache(model.train_, options.kernel.continuous);

  const auto unpack = [&](const Eigen::VectorXd& theta) {
    KernelConfig c;
    c.continuous_kernel = options.kernel.continuous;
    for (Eigen::Index s = 0; s < p; ++s) c.lengthscales.push_back(std::exp(theta(s)));
    for (Eigen::Index t = 0; t < q; ++t) {
      const auto* f = dist_factors[static_cast<std::size_t>(t)];
      c.categorical.push_back({f->dist->metric, std::exp(theta(p + t)) / f->gamma_scale, options.kernel.beta});
    }
    c.nugget = learn_nugget ? std::exp(theta(dim - 1)) : kNoiselessRatio;  // ratio to sigma^2 here
    return c;
  };
  const auto evaluate = [&](const Eigen::VectorXd& theta) -> ProfiledFit {
    const auto c = unpack(theta);
    std::vector<Eigen::MatrixXd> T;
    for (Eigen::Index t = 0; t < q; ++t)
      T.push_back(substitution_gram(dists[static_cast<std::size_t>(t)],
                                    {c.categorical[static_cast<std::size_t>(t)].gamma, c.categorical[static_cast<std::size_t>(t)].beta}));
    return profiled_likelihood(cache.correlation(c.lengthscales, T), c.nugget, model.y_);
  };
  const auto objective = [&](const Eigen::VectorXd& theta) {
    const auto r = evaluate(theta);
    return std::isfinite(r.log_likelihood) ? -r.log_likelihood : std::numeric_limits<double>::infinity();
  };

  Engine eng(options.seed);
  Eigen::VectorXd best_theta;
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < options.optimizer.starts; ++s) {
    Eigen::VectorXd x0(dim);
    if (s == 0) {
      x0.setZero();
      if (learn_nugget) x0(dim - 1) = std::log(1e-4);
    } else {
      for (Eigen::Index k = 0; k < dim; ++k) {
        const double w = hi(k) - lo(k);
        x0(k) = lo(k) + 0.25 * w + 0.5 * w * uniform01(eng);
      }
    }
    const double f0 = objective(x0);
    model.start_log_likelihoods_.push_back(-f0);
    if (dim == 0) {
      best_theta = x0;
      best = f0;
      break;
    }
    const auto res = nelder_mead(objective, x0, lo, hi,
                                 {options.optimizer.max_evals, options.optimizer.tolerance, 0.1});
    if (res.value < best) {
      best = res.value;
      best_theta = res.x;
    }
  }
  if (!std::isfinite(best)) throw NumericalError("likelihood is not finite at any optimizer start");

  const auto c = unpack(best_theta);
  const auto pf = evaluate(best_theta);
  model.config_ = c;
  model.config_.signal_variance = pf.sigma2;
  model.config_.nugget = (c.nugget + pf.jitter) * pf.sigma2;
  model.factorize();
  return model;
}

GPModel GPModel::with_auxiliary(const std::vector<AuxiliaryData>& aux) const {
  GPModel m = *this;
  for (auto& f : m.factors_) {
    // Outputs were resolved against the training schema at fit time.
    Eigen::Index out = target_;
    if (!f.spec.outputs.empty()) {
      for (std::size_t k = 0, idx = 0; k < schema_.size(); ++k) {
        if (schema_[k].kind != ColumnKind::output) continue;
        if (schema_[k].name == f.spec.outputs.front()) out = static_cast<Eigen::Index>(idx);
        ++idx;
      }
    }
    apply_auxiliary(f, out, aux, standardizer_, kernel_);
  }
  m.factorize();
  return m;
}

Prediction predict(const GPModel& model, const MixedDataset& test, bool include_noise) {
  const auto rows = model.encode(test);
  const auto dists = model.distance_matrices();
  const Eigen::MatrixXd Ks = assemble_gram(rows, model.train_rows(), model.config(), dists);
  const auto& cfg = model.config();
  Prediction out;
  const Eigen::VectorXd mean_std = Ks * model.dual_weights();
  const Eigen::MatrixXd V = model.cholesky().triangularView<Eigen::Lower>().solve(Ks.transpose());
  Eigen::VectorXd var = (cfg.signal_variance - V.colwise().squaredNorm().array()).matrix();
  if (include_noise) var.array() += cfg.nugget;
  for (Eigen::Index i = 0; i < var.size(); ++i) {
    if (var(i) < -1e-8 * cfg.signal_variance)
      std::clog << "warning: negative posterior variance " << var(i) << " clipped at 0\n";
    var(i) = std::max(var(i), 0.0);
  }
  const auto k = model.target();
  const auto& st = model.standardizer();
  out.mean = (mean_std.array() * st.y_sd(k) + st.y_mean(k)).matrix();
  out.variance = (var.array() * st.y_sd(k) * st.y_sd(k)).matrix();
  return out;
}

LooResult loo_residuals(const GPModel& model) {
  const auto& L = model.cholesky();
  const auto n = L.rows();
  const Eigen::MatrixXd Linv = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::VectorXd diag = Linv.colwise().squaredNorm().transpose();  // diag of (K + eta^2 I)^{-1}
  const auto& y = model.train_targets();
  const auto& alpha = model.dual_weights();
  const auto k = model.target();
  const auto& st = model.standardizer();
  LooResult out;
  out.mean.resize(n);
  out.variance.resize(n);
  double sse = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double resid = alpha(i) / diag(i);
    sse += resid * resid;
    out.mean(i) = (y(i) - resid) * st.y_sd(k) + st.y_mean(k);
    out.variance(i) = st.y_sd(k) * st.y_sd(k) / diag(i);
  }
  out.mse_standardized = sse / static_cast<double>(n);
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json GPModel::to_json() const {
  auto factors = nlohmann::json::array();
  for (const auto& f : factors_) {
    nlohmann::json jf{{"spec", f.spec.to_json()}, {"table", f.table.to_json()}, {"gamma_scale", f.gamma_scale}};
    if (f.dist) jf["distances"] = f.dist->to_json();
    factors.push_back(std::move(jf));
  }
  const auto n = chol_.rows();
  std::vector<double> packed;
  packed.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) packed.push_back(chol_(i, j));
  std::vector<double> cont(static_cast<std::size_t>(train_.cont.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cont.data(), train_.cont.rows(),
                                                                                     train_.cont.cols()) = train_.cont;
  std::vector<int> levels(static_cast<std::size_t>(train_.levels.size()));
  Eigen::Map<Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(levels.data(), train_.levels.rows(),
                                                                                  train_.levels.cols()) = train_.levels;
  return {{"format", kModelFormat},
          {"schema", schema_to_json(schema_)},
          {"standardizer", standardizer_.to_json()},
          {"target", target_},
          {"plan", plan_.to_json()},
          {"kernel_settings", kernel_.to_json()},
          {"seed", seed_},
          {"config", config_.to_json()},
          {"factors", std::move(factors)},
          {"train", {{"rows", train_.cont.rows()}, {"cont_cols", train_.cont.cols()},
                     {"level_cols", train_.levels.cols()}, {"cont", cont}, {"levels", levels}}},
          {"y", std::vector<double>(y_.data(), y_.data() + y_.size())},
          {"cholesky_lower_packed", packed},
          {"dual_weights", std::vector<double>(alpha_.data(), alpha_.data() + alpha_.size())},
          {"log_likelihood", log_likelihood_}};
}

GPModel GPModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat)
      throw ConfigError("unsupported model format '" + j.at("format").get<std::string>() + "'");
    GPModel m;
    m.schema_ = schema_from_json(j.at("schema"));
    m.standardizer_ = Standardizer::from_json(j.at("standardizer"));
    m.target_ = j.at("target").get<Eigen::Index>();
    m.plan_ = EncodingPlan::from_json(j.at("plan"));
    m.kernel_ = KernelSettings::from_json(j.at("kernel_settings"));
    m.seed_ = j.at("seed").get<std::uint64_t>();
    m.config_ = KernelConfig::from_json(j.at("config"));
    for (const auto& jf : j.at("factors")) {
      FrozenFactor f;
      f.spec = FactorSpec::from_json(jf.at("spec"));
      f.table = EncodingTable::from_json(jf.at("table"));
      f.gamma_scale = jf.at("gamma_scale").get<double>();
      if (jf.contains("distances")) f.dist = LevelDistanceMatrix::from_json(jf.at("distances"));
      m.factors_.push_back(std::move(f));
    }
    const auto& tr = j.at("train");
    const auto n = tr.at("rows").get<Eigen::Index>();
    const auto pc = tr.at("cont_cols").get<Eigen::Index>();
    const auto lc = tr.at("level_cols").get<Eigen::Index>();
    const auto cont = tr.at("cont").get<std::vector<double>>();
    const auto levels = tr.at("levels").get<std::vector<int>>();
    if (static_cast<Eigen::Index>(cont.size()) != n * pc || static_cast<Eigen::Index>(levels.size()) != n * lc)
      throw ConfigError("training block shape mismatch");
    m.train_.cont = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cont.data(), n, pc);
    m.train_.levels = Eigen::Map<const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(levels.data(), n, lc);
    const auto y = j.at("y").get<std::vector<double>>();
    m.y_ = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    const auto packed = j.at("cholesky_lower_packed").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(packed.size()) != n * (n + 1) / 2) throw ConfigError("cholesky shape mismatch");
    m.chol_ = Eigen::MatrixXd::Zero(n, n);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c <= i; ++c) m.chol_(i, c) = packed[k++];
    const auto alpha = j.at("dual_weights").get<std::vector<double>>();
    m.alpha_ = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
    m.log_likelihood_ = j.at("log_likelihood").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

SelectionResult select_encoding_by_loo(const MixedDataset& train, const std::vector<CandidateSet>& candidates,
                                       const FitOptions& base, std::size_t max_combinations) {
  if (candidates.empty()) throw ConfigError("no candidate encodings given");
  std::size_t total = 1;
  for (const auto& c : candidates) {
    if (c.methods.empty()) throw ConfigError("empty candidate list for input '" + c.input + "'");
    total *= c.methods.size();
    if (total > max_combinations)
      throw ConfigError("encoding search exceeds the budget of " + std::to_string(max_combinations) + " combinations");
  }
  SelectionResult result;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> choice(candidates.size(), 0);
  for (std::size_t combo = 0; combo < total; ++combo) {
    // Mixed radix, last input fastest, so the first-listed combination comes first.
    std::size_t rem = combo;
    for (std::size_t k = candidates.size(); k-- > 0;) {
      choice[k] = rem % candidates[k].methods.size();
      rem /= candidates[k].methods.size();
    }
    FitOptions opts = base;
    opts.plan.factors.clear();
    for (std::size_t k = 0; k < candidates.size(); ++k)
      opts.plan.factors.push_back({candidates[k].input, candidates[k].methods[choice[k]], {}, std::nullopt, 2});
    SelectionEntry entry;
    entry.plan = opts.plan;
    try {
      const auto model = fit(train, opts);
      entry.loo_mse = loo_residuals(model).mse_standardized;
    } catch (const Error& e) {
      entry.ok = false;
      entry.error = e.what();
      entry.loo_mse = std::numeric_limits<double>::infinity();
    }
    if (entry.ok && entry.loo_mse < best) {
      best = entry.loo_mse;
      result.best = entry.plan;
      result.best_index = result.scores.size();
    }
    result.scores.push_back(std::move(entry));
  }
  if (!std::isfinite(best)) throw NumericalError("every candidate encoding failed to fit");
  return result;
}

}  // namespace dencgp
