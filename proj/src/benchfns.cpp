#include "dencgp/benchfns.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <thread>

#include "dencgp/errors.hpp"
#include "dencgp/random.hpp"

namespace dencgp {

std::string to_string(TestFunction f) {
  switch (f) {
    case TestFunction::beam: return "beam";
    case TestFunction::borehole: return "borehole";
    case TestFunction::borehole_lowfi: return "borehole_lowfi";
    case TestFunction::otl: return "otl";
    case TestFunction::piston: return "piston";
  }
  return "?";
}

TestFunction test_function_from_string(const std::string& s) {
  for (auto f : {TestFunction::beam, TestFunction::borehole, TestFunction::borehole_lowfi, TestFunction::otl,
                 TestFunction::piston})
    if (to_string(f) == s) return f;
  throw ConfigError("unknown test function '" + s + "'");
}

namespace {

LevelSet levels(std::string name, std::vector<std::string> labels) {
  LevelSet s{std::move(name), std::move(labels), {}};
  for (const auto& l : s.labels) s.values.push_back(std::stod(l));
  return s;
}

TestFunctionSpec make_spec(TestFunction f) {
  TestFunctionSpec s;
  s.function = f;
  switch (f) {
    case TestFunction::beam:
      s.continuous = {{"L", 10, 20}, {"h", 1, 2}};
      s.categorical = {levels("I", {"0.0491", "0.0833", "0.0449", "0.0633", "0.0373", "0.0167"})};
      s.default_n = 90;
      break;
    case TestFunction::borehole:
    case TestFunction::borehole_lowfi:
      s.continuous = {{"r", 100, 50000}, {"Hu", 990, 1110}, {"Tu", 63.07, 115.6},
                      {"Tl", 63.1, 116},  {"L", 1120, 1680}, {"Kw", 9855, 12045}};
      s.categorical = {levels("rw", {"0.05", "0.10", "0.15"}), levels("Hl", {"700", "740", "780", "820"})};
      s.default_n = 180;
      break;
    case TestFunction::otl:
      s.continuous = {{"Rb1", 50, 150}, {"Rb2", 25, 70}, {"Rc1", 1.2, 2.5}, {"Rc2", 0.25, 1.20}};
      s.categorical = {levels("Rf", {"0.5", "1.2", "2.1", "2.9"}),
                       levels("B", {"50", "100", "150", "200", "250", "300"})};
      s.default_n = 120;
      break;
    case TestFunction::piston:
      s.continuous = {{"R", 30, 60}, {"S", 0.005, 0.020}, {"V0", 0.002, 0.010}, {"Ta", 290, 296}, {"T0", 340, 360}};
      s.categorical = {levels("P0", {"9000", "10000", "11000"}),
                       levels("k", {"1000", "2000", "3000", "4000", "5000"})};
      s.default_n = 225;
      break;
  }
  return s;
}

double borehole_value(std::span<const double> x, std::span<const double> lv, double lead, double constant) {
  const double r = x[0], hu = x[1], tu = x[2], tl = x[3], len = x[4], kw = x[5];
  const double rw = lv[0], hl = lv[1];
  const double lg = std::log(r / rw);
  return lead * tu * (hu - hl) / (lg * (constant + 2.0 * len * tu / (lg * rw * rw * kw) + tu / tl));
}

}  // namespace

Eigen::Index TestFunctionSpec::combinations() const {
  Eigen::Index c = 1;
  for (const auto& l : categorical) c *= static_cast<Eigen::Index>(l.values.size());
  return c;
}

const TestFunctionSpec& test_function_spec(TestFunction f) {
  static const TestFunctionSpec specs[] = {make_spec(TestFunction::beam), make_spec(TestFunction::borehole),
                                           make_spec(TestFunction::borehole_lowfi), make_spec(TestFunction::otl),
                                           make_spec(TestFunction::piston)};
  return specs[static_cast<int>(f)];
}

double eval_function(const TestFunctionSpec& spec, std::span<const double> x, std::span<const double> lv) {
  if (x.size() != spec.continuous.size() || lv.size() != spec.categorical.size())
    throw DataError("wrong number of inputs for " + to_string(spec.function));
  for (std::size_t s = 0; s < x.size(); ++s) {
    const auto& c = spec.continuous[s];
    const double slack = 1e-12 * std::max(std::abs(c.lo), std::abs(c.hi));
    if (!(x[s] >= c.lo - slack && x[s] <= c.hi + slack))
      throw DataError("input " + c.name + " = " + std::to_string(x[s]) + " outside [" + std::to_string(c.lo) + ", " +
                      std::to_string(c.hi) + "]");
  }
  for (std::size_t t = 0; t < lv.size(); ++t) {
    const auto& v = spec.categorical[t].values;
    if (std::find(v.begin(), v.end(), lv[t]) == v.end())
      throw DataError("input " + spec.categorical[t].name + " = " + std::to_string(lv[t]) + " is not a declared level");
  }
  constexpr double pi = std::numbers::pi;
  switch (spec.function) {
    case TestFunction::beam: return x[0] * x[0] * x[0] / (3e9 * std::pow(x[1], 4) * lv[0]);
    case TestFunction::borehole: return borehole_value(x, lv, 2.0 * pi, 1e-3);
    case TestFunction::borehole_lowfi: return borehole_value(x, lv, 10.0, 1.5e-3);
    case TestFunction::otl: {
      const double rb1 = x[0], rb2 = x[1], rc1 = x[2], rc2 = x[3], rf = lv[0], b = lv[1];
      const double vb1 = 12.0 * rb2 / (rb1 + rb2);
      const double den = b * (rc2 + 9.0) + rf;
      return b * (vb1 + 0.74) * (rc2 + 9.0) / den + 11.35 * rf / den + 0.74 * b * rf / rc1;
    }
    case TestFunction::piston: {
      const double m = x[0], s = x[1], v0 = x[2], ta = x[3], t0 = x[4], p0 = lv[0], k = lv[1];
      const double a = (p0 * m + 19.62 * m - k * v0) / s;
      const double v = s / (2.0 * k) * (a + std::sqrt(a * a + 4.0 * k * p0 * v0 * t0 / ta));
      return 2.0 * pi * std::sqrt(m / (k + s * s * p0 * v0 / (v * v) * ta / t0));
    }
  }
  throw ConfigError("unknown test function");
}

namespace {

// Level indices of combination c, first categorical input slowest.
std::vector<int> combination(const TestFunctionSpec& spec, Eigen::Index c) {
  std::vector<int> idx(spec.categorical.size());
  for (std::size_t t = spec.categorical.size(); t-- > 0;) {
    const auto L = static_cast<Eigen::Index>(spec.categorical[t].values.size());
    idx[t] = static_cast<int>(c % L);
    c /= L;
  }
  return idx;
}

}  // namespace

Design sliced_design(const TestFunctionSpec& spec, Eigen::Index n, std::uint64_t seed) {
  const auto combos = spec.combinations();
  if (n < combos)
    throw ConfigError("design size " + std::to_string(n) + " is below the " + std::to_string(combos) +
                      " level combinations");
  const auto m = (n + combos - 1) / combos;
  if (m * combos != n)
    std::clog << "warning: design size " << n << " rounded up to " << m * combos << " (multiple of " << combos
              << " level combinations)\n";
  const auto d = static_cast<Eigen::Index>(spec.continuous.size());
  Design out;
  out.x.resize(m * combos, d);
  out.u.resize(m * combos, static_cast<Eigen::Index>(spec.categorical.size()));
  Engine eng(seed);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
  for (Eigen::Index c = 0; c < combos; ++c) {
    const auto lv = combination(spec, c);
    for (Eigen::Index s = 0; s < d; ++s) {
      std::iota(perm.begin(), perm.end(), Eigen::Index{0});
      shuffle(std::span<Eigen::Index>(perm), eng);
      const auto& r = spec.continuous[static_cast<std::size_t>(s)];
      for (Eigen::Index i = 0; i < m; ++i) {
        const double t = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + uniform01(eng)) / static_cast<double>(m);
        out.x(c * m + i, s) = r.lo + t * (r.hi - r.lo);
      }
    }
    for (Eigen::Index i = 0; i < m; ++i)
      for (std::size_t t = 0; t < lv.size(); ++t) out.u(c * m + i, static_cast<Eigen::Index>(t)) = lv[t];
  }
  return out;
}

Design monte_carlo_design(const TestFunctionSpec& spec, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("test size must be positive");
  Design out;
  out.x.resize(n, static_cast<Eigen::Index>(spec.continuous.size()));
  out.u.resize(n, static_cast<Eigen::Index>(spec.categorical.size()));
  Engine eng(seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < spec.continuous.size(); ++s) {
      const auto& r = spec.continuous[s];
      out.x(i, static_cast<Eigen::Index>(s)) = r.lo + uniform01(eng) * (r.hi - r.lo);
    }
    for (std::size_t t = 0; t < spec.categorical.size(); ++t)
      out.u(i, static_cast<Eigen::Index>(t)) = static_cast<int>(uniform_index(eng, spec.categorical[t].values.size()));
  }
  return out;
}

MixedDataset make_dataset(const TestFunctionSpec& spec, const Design& design, const std::vector<TestFunction>& outputs,
                          const std::vector<std::string>& output_names) {
  if (outputs.empty() || outputs.size() != output_names.size()) throw ConfigError("one name per output is required");
  std::vector<ColumnSchema> schema;
  for (const auto& c : spec.continuous) schema.push_back({c.name, ColumnKind::continuous, std::nullopt});
  for (const auto& l : spec.categorical) schema.push_back({l.name, ColumnKind::categorical, l.labels});
  for (const auto& name : output_names) schema.push_back({name, ColumnKind::output, std::nullopt});
  Eigen::MatrixXd y(design.rows(), static_cast<Eigen::Index>(outputs.size()));
  std::vector<double> x(spec.continuous.size()), lv(spec.categorical.size());
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    for (std::size_t s = 0; s < x.size(); ++s) x[s] = design.x(i, static_cast<Eigen::Index>(s));
    for (std::size_t t = 0; t < lv.size(); ++t)
      lv[t] = spec.categorical[t].values[static_cast<std::size_t>(design.u(i, static_cast<Eigen::Index>(t)))];
    for (std::size_t k = 0; k < outputs.size(); ++k)
      y(i, static_cast<Eigen::Index>(k)) = eval_function(test_function_spec(outputs[k]), x, lv);
  }
  return MixedDataset(std::move(schema), design.x, design.u, std::move(y));
}

double rrmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size() || truth.size() == 0) throw DataError("rrmse needs equal nonzero lengths");
  const double sd = std::sqrt((truth.array() - truth.mean()).square().mean());
  if (!(sd > 0.0)) throw DataError("rrmse is undefined for a constant truth");
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(truth.size())) / sd;
}

// ---------------------------------------------------------------------------

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::standard: return "standard";
    case Experiment::multi_output: return "multi_output";
    case Experiment::auxiliary: return "auxiliary";
  }
  return "?";
}

Experiment experiment_from_string(const std::string& s) {
  for (auto e : {Experiment::standard, Experiment::multi_output, Experiment::auxiliary})
    if (to_string(e) == s) return e;
  throw ConfigError("unknown experiment '" + s + "'");
}

namespace {

const std::vector<std::string>& allowed_methods(Experiment e) {
  static const std::vector<std::string> standard{"onehot", "mean", "mean_std", "w2", "sw2", "mmd", "bestloo"};
  static const std::vector<std::string> multi{"multi_1d_mmd", "2d_mmd"};
  static const std::vector<std::string> aux{"hf_only", "concat", "replace"};
  return e == Experiment::standard ? standard : e == Experiment::multi_output ? multi : aux;
}

}  // namespace

void BenchmarkConfig::validate() const {
  if (methods.empty()) throw ConfigError("benchmark needs at least one method");
  const auto& ok = allowed_methods(experiment);
  for (const auto& m : methods)
    if (std::find(ok.begin(), ok.end(), m) == ok.end())
      throw ConfigError("method '" + m + "' is not available in the " + to_string(experiment) + " experiment");
  if (experiment != Experiment::standard && function != TestFunction::borehole)
    throw ConfigError("the " + to_string(experiment) + " experiment runs on borehole");
  if (function == TestFunction::borehole_lowfi && experiment == Experiment::standard)
    throw ConfigError("borehole_lowfi is only used as an auxiliary or second output");
  if (n < 0 || n_test < 1 || n_aux < 1) throw ConfigError("sizes must be positive");
  if (replications < 1) throw ConfigError("replications must be positive");
  if (jobs < 1) throw ConfigError("jobs must be positive");
}

nlohmann::json BenchmarkConfig::to_json() const {
  return {{"experiment", to_string(experiment)},
          {"function", to_string(function)},
          {"methods", methods},
          {"n", n == 0 ? test_function_spec(function).default_n : n},
          {"n_test", n_test},
          {"n_aux", n_aux},
          {"replications", replications},
          {"seed", seed},
          {"jobs", jobs},
          {"kernel", kernel.to_json()},
          {"optimizer", optimizer.to_json()}};
}

BenchmarkConfig BenchmarkConfig::from_json(const nlohmann::json& j) {
  try {
    BenchmarkConfig c;
    c.experiment = experiment_from_string(j.value("experiment", std::string("standard")));
    c.function = test_function_from_string(j.value("function", std::string("beam")));
    if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
    c.n = j.value("n", Eigen::Index{0});
    c.n_test = j.value("n_test", Eigen::Index{3000});
    c.n_aux = j.value("n_aux", Eigen::Index{180});
    c.replications = j.value("replications", 50);
    c.seed = j.value("seed", std::uint64_t{0});
    c.jobs = j.value("jobs", 1);
    if (j.contains("kernel")) c.kernel = KernelSettings::from_json(j.at("kernel"));
    if (j.contains("optimizer")) c.optimizer = OptimizerSettings::from_json(j.at("optimizer"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed benchmark config: ") + e.what());
  }
}

bool BenchmarkReport::any_failed() const {
  return std::any_of(records.begin(), records.end(), [](const auto& r) { return !r.ok; });
}

const BenchmarkAggregate& BenchmarkReport::aggregate(const std::string& method, const std::string& output) const {
  for (const auto& a : aggregates)
    if (a.method == method && a.output == output) return a;
  throw ConfigError("no aggregate for method '" + method + "' and output '" + output + "'");
}

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string BenchmarkReport::records_csv() const {
  std::string out = "replication,seed,method,output,rrmse,status\n";
  for (const auto& r : records)
    out += std::to_string(r.replication) + ',' + std::to_string(r.seed) + ',' + r.method + ',' + r.output + ',' +
           (r.ok ? g17(r.rrmse) : std::string("nan")) + ',' + (r.ok ? "ok" : "failed") + '\n';
  return out;
}

nlohmann::json BenchmarkReport::to_json() const {
  auto recs = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json jr{{"replication", r.replication}, {"seed", r.seed},  {"method", r.method},
                      {"output", r.output},           {"ok", r.ok},      {"fit_seconds", r.fit_seconds}};
    if (r.ok)
      jr["rrmse"] = r.rrmse;
    else
      jr["error"] = r.error;
    recs.push_back(std::move(jr));
  }
  auto aggs = nlohmann::json::array();
  for (const auto& a : aggregates)
    aggs.push_back({{"method", a.method}, {"output", a.output}, {"count", a.count}, {"failed", a.failed},
                    {"median", a.median}, {"mean", a.mean}, {"std", a.std}});
  return {{"config", config.to_json()},
          {"metadata",
           {{"rrmse_normalizer", "population standard deviation of the test outputs"},
            {"test_levels", "uniform over levels, independent per categorical input"},
            {"design", "independent Latin hypercube per level combination"},
            {"replication_seed_rule", "splitmix64(master seed, replication index)"}}},
          {"records", std::move(recs)},
          {"aggregates", std::move(aggs)}};
}

namespace {

struct MethodRun {
  std::string method;
  std::string output;
  FitOptions options;
  std::vector<CandidateSet> candidates;  // non-empty for bestloo
};

EncodingPlan uniform_plan(const TestFunctionSpec& spec, EncodingMethod m, std::vector<std::string> outputs = {}) {
  EncodingPlan plan;
  for (const auto& l : spec.categorical) plan.factors.push_back({l.name, m, outputs, std::nullopt, 2});
  return plan;
}

std::vector<BenchmarkRecord> run_replication(const BenchmarkConfig& cfg, int rep) {
  const auto rep_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
  const auto& spec = test_function_spec(cfg.function);
  const auto n = cfg.n == 0 ? spec.default_n : cfg.n;
  const auto train_design = sliced_design(spec, n, derive_seed(rep_seed, 0));
  const auto test_design = monte_carlo_design(spec, cfg.n_test, derive_seed(rep_seed, 1));

  FitOptions base;
  base.kernel = cfg.kernel;
  base.optimizer = cfg.optimizer;
  base.seed = derive_seed(rep_seed, 3);

  std::vector<TestFunction> outs{cfg.function};
  std::vector<std::string> out_names{"y"};
  if (cfg.experiment == Experiment::multi_output) {
    outs = {TestFunction::borehole, TestFunction::borehole_lowfi};
    out_names = {"y1", "y2"};
  }
  const auto train = make_dataset(spec, train_design, outs, out_names);
  const auto test = make_dataset(spec, test_design, outs, out_names);

  std::vector<MethodRun> runs;
  for (const auto& m : cfg.methods) {
    if (cfg.experiment == Experiment::standard) {
      MethodRun r{m, "y", base, {}};
      if (m == "bestloo") {
        for (const auto& l : spec.categorical)
          r.candidates.push_back({l.name, {EncodingMethod::mean, EncodingMethod::mean_std, EncodingMethod::w2,
                                           EncodingMethod::mmd}});
      } else {
        r.options.plan = uniform_plan(spec, encoding_method_from_string(m));
      }
      runs.push_back(std::move(r));
    } else if (cfg.experiment == Experiment::multi_output) {
      for (const auto& o : out_names) {
        MethodRun r{m, o, base, {}};
        r.options.target = o;
        r.options.plan = uniform_plan(spec, EncodingMethod::mmd,
                                      m == "2d_mmd" ? out_names : std::vector<std::string>{o});
        runs.push_back(std::move(r));
      }
    } else {
      MethodRun r{m, "y", base, {}};
      r.options.plan = uniform_plan(spec, EncodingMethod::w2);
      if (m != "hf_only") {
        const auto aux_design = sliced_design(spec, cfg.n_aux, derive_seed(rep_seed, 2));
        const auto aux = make_dataset(spec, aux_design, {TestFunction::borehole_lowfi}, {"y"});
        const auto mode = m == "concat" ? AuxMode::concat : AuxMode::replace;
        for (const auto& l : spec.categorical) r.options.auxiliary.push_back({l.name, "y", mode, aux});
      }
      runs.push_back(std::move(r));
    }
  }

  std::vector<BenchmarkRecord> records;
  for (const auto& r : runs) {
    BenchmarkRecord rec;
    rec.replication = rep;
    rec.seed = rep_seed;
    rec.method = r.method;
    rec.output = r.output;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      FitOptions opts = r.options;
      if (!r.candidates.empty()) opts.plan = select_encoding_by_loo(train, r.candidates, opts).best;
      const auto model = fit(train, opts);
      rec.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const auto k = *test.find_output(r.output);
      rec.rrmse = rrmse(predict(model, test).mean, test.y().col(k));
    } catch (const Error& e) {
      rec.ok = false;
      rec.error = e.what();
      rec.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkConfig& config) {
  config.validate();
  BenchmarkReport report;
  report.config = config;
  std::vector<std::vector<BenchmarkRecord>> per_rep(static_cast<std::size_t>(config.replications));
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int rep = next++; rep < config.replications; rep = next++)
      per_rep[static_cast<std::size_t>(rep)] = run_replication(config, rep);
  };
  const int jobs = std::min(config.jobs, config.replications);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& recs : per_rep)
    for (auto& r : recs) report.records.push_back(std::move(r));

  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& r : report.records)
    if (std::find(keys.begin(), keys.end(), std::pair{r.method, r.output}) == keys.end())
      keys.emplace_back(r.method, r.output);
  for (const auto& [method, output] : keys) {
    BenchmarkAggregate a;
    a.method = method;
    a.output = output;
    std::vector<double> v;
    for (const auto& r : report.records) {
      if (r.method != method || r.output != output) continue;
      if (r.ok)
        v.push_back(r.rrmse);
      else
        ++a.failed;
    }
    a.count = static_cast<int>(v.size());
    if (!v.empty()) {
      a.median = median(v);
      a.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - a.mean) * (x - a.mean);
      a.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    } else {
      a.median = a.mean = a.std = std::numeric_limits<double>::quiet_NaN();
    }
    report.aggregates.push_back(std::move(a));
  }
  return report;
}

}  // namespace dencgp
