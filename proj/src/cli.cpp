#include "dencgp/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "dencgp/benchfns.hpp"
#include "dencgp/data.hpp"
#include "dencgp/dist_kernels.hpp"
#include "dencgp/encoders.hpp"
#include "dencgp/errors.hpp"
#include "dencgp/gp.hpp"
#include "dencgp/sensitivity.hpp"

namespace dencgp {

namespace {

namespace fs = std::filesystem;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string g4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw ConfigError("failed writing '" + p.string() + "'");
}

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + p.string() + "' is not valid JSON: " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

/// Options that a --config JSON file may also set; explicit flags win.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& key, T& target, const std::string& help) {
    auto* opt = app->add_option("--" + key, target, help);
    setters_.emplace_back(key, opt, [&target](const nlohmann::json& j) { target = j.get<T>(); });
    return opt;
  }
  CLI::Option* add_flag(CLI::App* app, const std::string& key, bool& target, const std::string& help) {
    auto* opt = app->add_flag("--" + key, target, help);
    setters_.emplace_back(key, opt, [&target](const nlohmann::json& j) { target = j.get<bool>(); });
    return opt;
  }

  void apply(const std::string& config_path) {
    if (config_path.empty()) return;
    const auto j = read_json(config_path);
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
      bool known = false;
      for (auto& [k, opt, set] : setters_) {
        if (k != key) continue;
        known = true;
        if (opt->count() == 0) {
          try {
            set(value);
          } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
          }
        }
      }
      if (!known) extra_[key] = value;
    }
  }

  /// Keys the command does not map to a flag (for nested settings).
  const nlohmann::json& extra() const { return extra_; }

 private:
  std::vector<std::tuple<std::string, CLI::Option*, std::function<void(const nlohmann::json&)>>> setters_;
  nlohmann::json extra_ = nlohmann::json::object();
};

struct DataArgs {
  std::string data;
  std::string schema;
};

// Test files often lack the response; fill absent output columns with zeros.
MixedDataset load_inputs(const std::string& path, const std::vector<ColumnSchema>& schema) {
  std::string text = read_file(path);
  const auto eol = text.find('\n');
  std::string header = text.substr(0, eol);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto names = split_list(header);
  std::string add_header, add_row;
  for (const auto& c : schema) {
    if (c.kind != ColumnKind::output || c.is_class_output()) continue;
    if (std::find(names.begin(), names.end(), c.name) != names.end()) continue;
    add_header += "," + c.name;
    add_row += ",0";
  }
  if (add_header.empty()) return parse_csv(text, schema);
  std::stringstream in(text), out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << line << (first ? add_header : add_row) << '\n';
    first = false;
  }
  try {
    return parse_csv(out.str(), schema);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

KernelSettings kernel_from(const nlohmann::json& extra, const std::string& continuous, double beta, bool noisy,
                           int n_quantiles, int n_dirs, std::uint64_t sw_seed) {
  KernelSettings k = extra.contains("kernel") ? KernelSettings::from_json(extra.at("kernel")) : KernelSettings{};
  k.continuous = continuous_kernel_from_string(continuous);
  k.beta = beta;
  k.noiseless = !noisy;
  k.estimator.n_quantiles = n_quantiles;
  k.estimator.n_dirs = n_dirs;
  k.estimator.seed = sw_seed;
  if (!(beta >= 0.0 && beta <= 2.0)) throw ConfigError("beta must lie in [0, 2]");
  return k;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string config, train, schema, plan = "", candidates = "mean,mean_std,w2,mmd", target, out = "out";
  std::string continuous = "matern52";
  double beta = 1.0;
  bool noisy = false;
  int starts = 8, max_evals = 400, n_quantiles = 100, n_dirs = 100;
  std::uint64_t seed = 0, sw_seed = 0;
};

int cmd_fit(FitArgs& a, Overrides& ov) {
  ov.apply(a.config);
  if (a.train.empty() || a.schema.empty()) throw ConfigError("fit needs --train and --schema");
  const auto schema = load_schema(a.schema);
  const auto train = load_csv(a.train, schema);

  FitOptions opts;
  opts.target = a.target;
  opts.seed = a.seed;
  opts.kernel = kernel_from(ov.extra(), a.continuous, a.beta, a.noisy, a.n_quantiles, a.n_dirs, a.sw_seed);
  opts.optimizer.starts = a.starts;
  opts.optimizer.max_evals = a.max_evals;
  if (opts.optimizer.starts < 1 || opts.optimizer.max_evals < 1) throw ConfigError("starts and max-evals must be positive");

  nlohmann::json selection;
  if (a.plan == "bestloo") {
    std::vector<CandidateSet> cands;
    std::vector<EncodingMethod> methods;
    for (const auto& m : split_list(a.candidates)) methods.push_back(encoding_method_from_string(m));
    for (Eigen::Index t = 0; t < train.n_categorical(); ++t) cands.push_back({train.categorical_column(t).name, methods});
    const auto sel = select_encoding_by_loo(train, cands, opts);
    opts.plan = sel.best;
    std::cout << "encoding selection by leave-one-out MSE (standardized)\n";
    selection = nlohmann::json::array();
    for (std::size_t i = 0; i < sel.scores.size(); ++i) {
      const auto& e = sel.scores[i];
      std::cout << (i == sel.best_index ? "* " : "  ") << e.plan.describe() << "  "
                << (e.ok ? g4(e.loo_mse) : "failed: " + e.error) << '\n';
      selection.push_back({{"plan", e.plan.describe()}, {"loo_mse", e.ok ? nlohmann::json(e.loo_mse) : nlohmann::json()},
                           {"ok", e.ok}, {"error", e.error}});
    }
  } else if (ov.extra().contains("plan_spec")) {
    opts.plan = EncodingPlan::from_json(ov.extra().at("plan_spec"));
  } else {
    opts.plan = EncodingPlan::parse(a.plan);
  }

  const auto model = fit(train, opts);
  const auto loo = loo_residuals(model);
  const auto k = model.target();
  const Eigen::VectorXd resid = loo.mean - train.y().col(k);
  const double loo_rmse = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));

  const fs::path out(a.out);
  write_file(out / "model.json", model.to_json().dump(1));
  nlohmann::json resolved{{"command", "fit"},  {"train", a.train},   {"schema", a.schema},
                          {"plan", opts.plan.describe()},          {"target", train.output_column(k).name},
                          {"seed", a.seed},    {"kernel", opts.kernel.to_json()},
                          {"optimizer", opts.optimizer.to_json()}, {"out", a.out}};
  nlohmann::json summary{{"config", resolved},
                         {"log_likelihood", model.log_likelihood()},
                         {"hyperparameters", model.config().to_json()},
                         {"loo_rmse", loo_rmse},
                         {"loo_mse_standardized", loo.mse_standardized}};
  if (!selection.is_null()) summary["selection"] = selection;
  write_file(out / "fit_summary.json", summary.dump(2));

  std::cout << "plan: " << opts.plan.describe() << "  (seed " << a.seed << ")\n";
  std::cout << "log marginal likelihood: " << g4(model.log_likelihood()) << '\n';
  std::cout << "signal variance: " << g4(model.config().signal_variance) << "  nugget: " << g4(model.config().nugget)
            << '\n';
  std::cout << "lengthscales:";
  for (double l : model.config().lengthscales) std::cout << ' ' << g4(l);
  std::cout << '\n';
  for (const auto& c : model.config().categorical)
    std::cout << "categorical " << to_string(c.metric) << ": gamma " << g4(c.gamma) << " beta " << g4(c.beta) << '\n';
  std::cout << "LOO RMSE: " << g4(loo_rmse) << '\n';
  std::cout << "wrote " << (out / "model.json").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string config, model, test, aux, aux_mode = "replace", aux_inputs, aux_output, out = "out";
  bool noise = false;
  std::uint64_t seed = 0;
};

int cmd_predict(PredictArgs& a, Overrides& ov) {
  ov.apply(a.config);
  if (a.model.empty() || a.test.empty()) throw ConfigError("predict needs --model and --test");
  auto model = GPModel::from_json(read_json(a.model));
  const auto& schema = model.schema();
  std::string target_name;
  for (std::size_t c = 0, k = 0; c < schema.size(); ++c) {
    if (schema[c].kind != ColumnKind::output) continue;
    if (static_cast<Eigen::Index>(k++) == model.target()) target_name = schema[c].name;
  }
  if (!a.aux.empty()) {
    const auto aux_data = load_inputs(a.aux, schema);
    const AuxMode mode = aux_mode_from_string(a.aux_mode);
    std::vector<std::string> inputs = split_list(a.aux_inputs);
    if (inputs.empty())
      for (const auto& f : model.factors())
        if (f.table.is_distributional() && !f.table.partition) inputs.push_back(f.spec.input);
    std::vector<AuxiliaryData> aux;
    for (const auto& in : inputs) aux.push_back({in, a.aux_output.empty() ? target_name : a.aux_output, mode, aux_data});
    model = model.with_auxiliary(aux);
  }
  const auto test = load_inputs(a.test, schema);
  const auto pred = predict(model, test, a.noise);
  std::string csv = "row,mean,variance\n";
  for (Eigen::Index i = 0; i < pred.mean.size(); ++i)
    csv += std::to_string(i) + ',' + g17(pred.mean(i)) + ',' + g17(pred.variance(i)) + '\n';
  const fs::path out(a.out);
  write_file(out / "predictions.csv", csv);
  nlohmann::json resolved{{"command", "predict"}, {"model", a.model},       {"test", a.test},
                          {"aux", a.aux},         {"aux_mode", a.aux_mode}, {"aux_inputs", a.aux_inputs},
                          {"noise", a.noise},     {"seed", a.seed},         {"out", a.out}};
  write_file(out / "predict_config.json", resolved.dump(2));
  std::cout << "predicted " << pred.mean.size() << " rows; wrote " << (out / "predictions.csv").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string config, experiment = "standard", function = "beam", methods = "mean,mean_std,w2,mmd", out = "out";
  Eigen::Index n = 0, n_test = 3000, n_aux = 180;
  int replications = 50, jobs = 1, starts = 8, max_evals = 400;
  std::uint64_t seed = 0;
};

int cmd_benchmark(BenchArgs& a, Overrides& ov) {
  ov.apply(a.config);
  BenchmarkConfig c;
  if (ov.extra().contains("kernel")) c.kernel = KernelSettings::from_json(ov.extra().at("kernel"));
  c.experiment = experiment_from_string(a.experiment);
  c.function = test_function_from_string(a.function);
  c.methods = split_list(a.methods);
  c.n = a.n;
  c.n_test = a.n_test;
  c.n_aux = a.n_aux;
  c.replications = a.replications;
  c.seed = a.seed;
  c.jobs = a.jobs;
  c.optimizer.starts = a.starts;
  c.optimizer.max_evals = a.max_evals;
  const auto report = run_benchmark(c);
  const fs::path out(a.out);
  write_file(out / "records.csv", report.records_csv());
  auto j = report.to_json();
  j["config"]["out"] = a.out;
  write_file(out / "report.json", j.dump(2));
  std::cout << "method,output,median,mean,std,count,failed\n";
  for (const auto& ag : report.aggregates)
    std::cout << ag.method << ',' << ag.output << ',' << g4(ag.median) << ',' << g4(ag.mean) << ',' << g4(ag.std)
              << ',' << ag.count << ',' << ag.failed << '\n';
  if (report.any_failed()) {
    std::cerr << "error: some replications failed; see report.json\n";
    return 3;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct SobolArgs {
  std::string config, data, schema, output, format = "csv", out;
  double main_threshold = 0.05, interaction_threshold = 0.05;
  Eigen::Index bins = 2;
  std::uint64_t seed = 0;
};

int cmd_sobol(SobolArgs& a, Overrides& ov) {
  ov.apply(a.config);
  if (a.data.empty() || a.schema.empty()) throw ConfigError("sobol needs --data and --schema");
  if (a.format != "csv" && a.format != "json") throw ConfigError("format must be csv or json");
  const auto ds = load_csv(a.data, load_schema(a.schema));
  Eigen::Index k = 0;
  if (!a.output.empty()) {
    const auto f = ds.find_output(a.output);
    if (!f) throw ConfigError("unknown output '" + a.output + "'");
    k = *f;
  }
  const auto est = sobol_estimates(ds, k);
  nlohmann::json resolved{{"command", "sobol"},
                          {"data", a.data},
                          {"schema", a.schema},
                          {"output", ds.output_column(k).name},
                          {"main_threshold", a.main_threshold},
                          {"interaction_threshold", a.interaction_threshold},
                          {"bins", a.bins},
                          {"seed", a.seed}};
  nlohmann::json j = est.to_json();
  j["config"] = resolved;
  if (ds.n_categorical() > 0)
    j["interaction_plan"] = build_interaction_plan(ds, k, a.main_threshold, a.interaction_threshold, a.bins).to_json();
  std::string text;
  if (a.format == "json") {
    text = j.dump(2) + "\n";
  } else {
    text = "input,order,index\n";
    for (const auto& [name, s] : est.first_order) text += name + ",1," + g17(s) + '\n';
    for (const auto& [p, s] : est.second_order) text += p.first + ":" + p.second + ",2," + g17(s) + '\n';
  }
  std::cout << text;
  if (!a.out.empty()) {
    const fs::path out(a.out);
    write_file(out / ("sobol." + a.format), text);
    write_file(out / "sobol_config.json", j.dump(2));
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ExportArgs {
  std::string config, data, schema, input, method = "w2", outputs, distance, out = "out";
  bool normalize = false;
  int n_quantiles = 100, n_dirs = 100;
  std::uint64_t seed = 0;
};

int cmd_encode_export(ExportArgs& a, Overrides& ov) {
  ov.apply(a.config);
  if (a.data.empty() || a.schema.empty() || a.input.empty())
    throw ConfigError("encode-export needs --data, --schema and --input");
  const auto ds = load_csv(a.data, load_schema(a.schema));
  const auto t = ds.find_categorical(a.input);
  if (!t) throw ConfigError("unknown categorical input '" + a.input + "'");
  std::vector<Eigen::Index> outs;
  for (const auto& name : split_list(a.outputs)) {
    const auto k = ds.find_output(name);
    if (!k) throw ConfigError("unknown output '" + name + "'");
    outs.push_back(*k);
  }
  if (outs.empty()) outs.push_back(0);
  const auto method = encoding_method_from_string(a.method);
  EncodingTable table;
  DistanceMetric metric = DistanceMetric::w2;
  switch (method) {
    case EncodingMethod::one_hot: table = one_hot_encoding(ds, *t); metric = DistanceMetric::euclid2; break;
    case EncodingMethod::mean: table = mean_encoding(ds, *t, outs.front()); metric = DistanceMetric::euclid2; break;
    case EncodingMethod::mean_std: table = mean_std_encoding(ds, *t, outs.front()); metric = DistanceMetric::euclid2; break;
    case EncodingMethod::w2: table = distributional_encoding(ds, *t, outs); metric = DistanceMetric::w2; break;
    case EncodingMethod::sw2: table = distributional_encoding(ds, *t, outs); metric = DistanceMetric::sw2; break;
    case EncodingMethod::mmd: table = distributional_encoding(ds, *t, outs); metric = DistanceMetric::mmd2; break;
    case EncodingMethod::hist_chi2: table = histogram_encoding(ds, *t, outs.front()); metric = DistanceMetric::chi2; break;
    case EncodingMethod::hist_tv: table = histogram_encoding(ds, *t, outs.front()); metric = DistanceMetric::tv; break;
    case EncodingMethod::hist_hellinger:
      table = histogram_encoding(ds, *t, outs.front());
      metric = DistanceMetric::hellinger2;
      break;
  }
  if (!a.distance.empty()) metric = distance_metric_from_string(a.distance);
  if (!metric_compatible(metric, table))
    throw ConfigError("distance " + to_string(metric) + " does not apply to a " + to_string(table.kind) + " encoding");

  nlohmann::json enc = table.to_json();
  enc["input"] = a.input;
  const EstimatorParams params{2.0, a.n_quantiles, a.n_dirs, a.seed};
  const auto dist = level_distance_matrix(table, metric, params);
  nlohmann::json dj = dist.to_json();
  if (a.normalize) {
    const auto nm = normalized(dist);
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < nm.rows(); ++i) {
      Eigen::VectorXd r = nm.row(i).transpose();
      rows.push_back(std::vector<double>(r.data(), r.data() + r.size()));
    }
    dj["normalized"] = rows;
  }
  nlohmann::json resolved{{"command", "encode-export"}, {"data", a.data},       {"schema", a.schema},
                          {"input", a.input},           {"method", a.method},   {"outputs", a.outputs},
                          {"distance", to_string(metric)}, {"normalize", a.normalize},
                          {"n_quantiles", a.n_quantiles}, {"n_dirs", a.n_dirs}, {"seed", a.seed}};
  enc["config"] = resolved;
  dj["config"] = resolved;
  const fs::path out(a.out);
  write_file(out / "encoding.json", enc.dump(2));
  write_file(out / "distances.json", dj.dump(2));
  write_file(out / "distances.csv", distance_matrix_csv(dist, a.normalize));
  std::cout << distance_matrix_csv(dist, a.normalize);
  return 0;
}

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::data: return 3;
    case ErrorCategory::numerical: return 4;
  }
  return 3;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Gaussian process regression with distributional encodings of categorical inputs"};
  app.require_subcommand(1);
  int unused_jobs = 1;  // --jobs is shared by every subcommand

  FitArgs fa;
  Overrides fo;
  auto* fit_cmd = app.add_subcommand("fit", "fit a GP model and write model.json");
  fit_cmd->add_option("--config", fa.config, "JSON config; explicit flags win");
  fo.add(fit_cmd, "train", fa.train, "training CSV");
  fo.add(fit_cmd, "schema", fa.schema, "schema JSON");
  fo.add(fit_cmd, "plan", fa.plan, "INPUT=METHOD,... or bestloo");
  fo.add(fit_cmd, "candidates", fa.candidates, "methods tried by bestloo");
  fo.add(fit_cmd, "target", fa.target, "output column to model");
  fo.add(fit_cmd, "continuous", fa.continuous, "matern52 or gaussian");
  fo.add(fit_cmd, "beta", fa.beta, "substitution kernel exponent in [0, 2]");
  fo.add_flag(fit_cmd, "noisy", fa.noisy, "learn the nugget instead of fixing it at 1e-8");
  fo.add(fit_cmd, "starts", fa.starts, "optimizer starts");
  fo.add(fit_cmd, "max-evals", fa.max_evals, "objective evaluations per start");
  fo.add(fit_cmd, "n-quantiles", fa.n_quantiles, "Wasserstein quantile grid size");
  fo.add(fit_cmd, "n-dirs", fa.n_dirs, "sliced Wasserstein directions");
  fo.add(fit_cmd, "sw-seed", fa.sw_seed, "seed of the sliced Wasserstein directions");
  fo.add(fit_cmd, "seed", fa.seed, "optimizer seed");
  fo.add(fit_cmd, "out", fa.out, "output directory");
  fo.add(fit_cmd, "jobs", unused_jobs, "unused by fit");

  PredictArgs pa;
  Overrides po;
  auto* pred_cmd = app.add_subcommand("predict", "predict with a saved model");
  pred_cmd->add_option("--config", pa.config, "JSON config; explicit flags win");
  po.add(pred_cmd, "model", pa.model, "model.json from fit");
  po.add(pred_cmd, "test", pa.test, "CSV of inputs");
  po.add(pred_cmd, "aux", pa.aux, "auxiliary CSV used to encode levels");
  po.add(pred_cmd, "aux-mode", pa.aux_mode, "concat or replace");
  po.add(pred_cmd, "aux-inputs", pa.aux_inputs, "categorical inputs receiving the auxiliary data");
  po.add(pred_cmd, "aux-output", pa.aux_output, "response column of the auxiliary CSV");
  po.add_flag(pred_cmd, "noise", pa.noise, "add the nugget to predictive variances");
  po.add(pred_cmd, "seed", pa.seed, "recorded only");
  po.add(pred_cmd, "out", pa.out, "output directory");
  po.add(pred_cmd, "jobs", unused_jobs, "unused by predict");

  BenchArgs ba;
  Overrides bo;
  auto* bench_cmd = app.add_subcommand("benchmark", "replicated test-function benchmark");
  bench_cmd->add_option("--config", ba.config, "JSON config; explicit flags win");
  bo.add(bench_cmd, "experiment", ba.experiment, "standard, multi_output or auxiliary");
  bo.add(bench_cmd, "function", ba.function, "beam, borehole, otl or piston");
  bo.add(bench_cmd, "methods", ba.methods, "comma-separated method list");
  bo.add(bench_cmd, "n", ba.n, "training size (0: function default)");
  bo.add(bench_cmd, "n-test", ba.n_test, "Monte-Carlo test size");
  bo.add(bench_cmd, "n-aux", ba.n_aux, "auxiliary design size");
  bo.add(bench_cmd, "replications", ba.replications, "number of replications");
  bo.add(bench_cmd, "starts", ba.starts, "optimizer starts");
  bo.add(bench_cmd, "max-evals", ba.max_evals, "objective evaluations per start");
  bo.add(bench_cmd, "seed", ba.seed, "master seed");
  bo.add(bench_cmd, "jobs", ba.jobs, "worker threads");
  bo.add(bench_cmd, "out", ba.out, "output directory");

  SobolArgs sa;
  Overrides so;
  auto* sobol_cmd = app.add_subcommand("sobol", "rank-based Sobol indices and the interaction plan");
  sobol_cmd->add_option("--config", sa.config, "JSON config; explicit flags win");
  so.add(sobol_cmd, "data", sa.data, "CSV");
  so.add(sobol_cmd, "schema", sa.schema, "schema JSON");
  so.add(sobol_cmd, "output", sa.output, "output column (default: first)");
  so.add(sobol_cmd, "main-threshold", sa.main_threshold, "first-order threshold");
  so.add(sobol_cmd, "interaction-threshold", sa.interaction_threshold, "second-order threshold");
  so.add(sobol_cmd, "bins", sa.bins, "partition bins");
  so.add(sobol_cmd, "format", sa.format, "csv or json");
  so.add(sobol_cmd, "seed", sa.seed, "recorded only");
  so.add(sobol_cmd, "out", sa.out, "output directory (optional)");
  so.add(sobol_cmd, "jobs", unused_jobs, "unused by sobol");

  ExportArgs ea;
  Overrides eo;
  auto* export_cmd = app.add_subcommand("encode-export", "export a level encoding and its distance matrix");
  export_cmd->add_option("--config", ea.config, "JSON config; explicit flags win");
  eo.add(export_cmd, "data", ea.data, "CSV");
  eo.add(export_cmd, "schema", ea.schema, "schema JSON");
  eo.add(export_cmd, "input", ea.input, "categorical input");
  eo.add(export_cmd, "method", ea.method, "encoding method");
  eo.add(export_cmd, "outputs", ea.outputs, "encoded outputs (default: first)");
  eo.add(export_cmd, "distance", ea.distance, "override the distance metric");
  eo.add_flag(export_cmd, "normalize", ea.normalize, "divide by the largest off-diagonal entry");
  eo.add(export_cmd, "n-quantiles", ea.n_quantiles, "Wasserstein quantile grid size");
  eo.add(export_cmd, "n-dirs", ea.n_dirs, "sliced Wasserstein directions");
  eo.add(export_cmd, "seed", ea.seed, "sliced Wasserstein seed");
  eo.add(export_cmd, "out", ea.out, "output directory");
  eo.add(export_cmd, "jobs", unused_jobs, "unused by encode-export");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fa, fo);
    if (pred_cmd->parsed()) return cmd_predict(pa, po);
    if (bench_cmd->parsed()) return cmd_benchmark(ba, bo);
    if (sobol_cmd->parsed()) return cmd_sobol(sa, so);
    if (export_cmd->parsed()) return cmd_encode_export(ea, eo);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace dencgp
