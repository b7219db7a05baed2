#include "dencgp/sensitivity.hpp"

#include <algorithm>
#include <numeric>

#include "dencgp/errors.hpp"

namespace dencgp {

namespace {

// Centered copy of y and its population variance.
std::pair<Eigen::VectorXd, double> centered(const Eigen::VectorXd& y) {
  if (y.size() < 1) throw DataError("empty output vector");
  Eigen::VectorXd c = y.array() - y.mean();
  const double var = c.squaredNorm() / static_cast<double>(y.size());
  if (!(var > 1e-300 * (1.0 + y.squaredNorm()))) throw DataError("output is constant; Sobol indices are undefined");
  return {std::move(c), var};
}

double successor_sum(const Eigen::VectorXd& c, const std::vector<Eigen::Index>& rows, const Eigen::VectorXd& x) {
  Eigen::VectorXd xs(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) xs(static_cast<Eigen::Index>(k)) = x(rows[k]);
  const auto sigma = rank_successor(xs);
  double s = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) s += c(rows[k]) * c(rows[static_cast<std::size_t>(sigma[k])]);
  return s;
}

std::map<int, std::vector<Eigen::Index>> groups(const Eigen::VectorXi& u) {
  std::map<int, std::vector<Eigen::Index>> g;
  for (Eigen::Index i = 0; i < u.size(); ++i) g[u(i)].push_back(i);
  return g;
}

double first_categorical_centered(const Eigen::VectorXi& u, const Eigen::VectorXd& c) {
  double v = 0.0;
  for (const auto& [level, rows] : groups(u)) {
    double m = 0.0;
    for (auto i : rows) m += c(i);
    v += m * m / static_cast<double>(rows.size());
  }
  return v / static_cast<double>(c.size());
}

}  // namespace

std::vector<Eigen::Index> rank_successor(const Eigen::VectorXd& x) {
  const auto n = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x(a) < x(b); });
  std::vector<Eigen::Index> sigma(static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < order.size(); ++r) sigma[static_cast<std::size_t>(order[r])] = order[(r + 1) % order.size()];
  return sigma;
}

double sobol_first_continuous(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw DataError("x and y lengths differ");
  if (y.size() < 3) throw DataError("rank estimator needs at least 3 samples");
  const auto [c, var] = centered(y);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(y.size()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  return successor_sum(c, all, x) / static_cast<double>(y.size()) / var;
}

double sobol_first_categorical(const Eigen::VectorXi& u, const Eigen::VectorXd& y) {
  if (u.size() != y.size()) throw DataError("u and y lengths differ");
  const auto [c, var] = centered(y);
  return first_categorical_centered(u, c) / var;
}

double sobol_second_mixed(const Eigen::VectorXd& x, const Eigen::VectorXi& u, const Eigen::VectorXd& y) {
  if (x.size() != y.size() || u.size() != y.size()) throw DataError("x, u and y lengths differ");
  const auto [c, var] = centered(y);
  const auto g = groups(u);
  double joint = 0.0;
  for (const auto& [level, rows] : g) {
    if (rows.size() < 3) throw DataError("level " + std::to_string(level) + " has fewer than 3 samples");
    joint += successor_sum(c, rows, x);
  }
  const auto n = static_cast<double>(y.size());
  std::vector<Eigen::Index> all(static_cast<std::size_t>(y.size()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  const double vx = successor_sum(c, all, x) / n;
  const double vu = first_categorical_centered(u, c);
  return (joint / n - vx - vu) / var;
}

nlohmann::json SobolEstimates::to_json() const {
  auto rows = nlohmann::json::array();
  for (const auto& [name, s] : first_order) rows.push_back({{"input", name}, {"order", 1}, {"index", s}});
  for (const auto& [pair, s] : second_order)
    rows.push_back({{"input", pair.first + ":" + pair.second}, {"order", 2}, {"index", s}});
  return {{"output_variance", output_variance}, {"indices", std::move(rows)}};
}

SobolEstimates sobol_estimates(const MixedDataset& ds, Eigen::Index k) {
  if (k < 0 || k >= ds.n_outputs()) throw ConfigError("output index out of range");
  if (ds.output_column(k).is_class_output()) throw ConfigError("Sobol indices need a real-valued output");
  const Eigen::VectorXd y = ds.y().col(k);
  SobolEstimates est;
  est.output_variance = centered(y).second;
  for (Eigen::Index s = 0; s < ds.n_continuous(); ++s)
    est.first_order[ds.continuous_column(s).name] = sobol_first_continuous(ds.x().col(s), y);
  for (Eigen::Index t = 0; t < ds.n_categorical(); ++t) {
    const Eigen::VectorXi u = ds.u().col(t);
    est.first_order[ds.categorical_column(t).name] = sobol_first_categorical(u, y);
    const auto g = groups(u);
    const bool enough = std::all_of(g.begin(), g.end(), [](const auto& e) { return e.second.size() >= 3; });
    if (!enough) continue;
    for (Eigen::Index s = 0; s < ds.n_continuous(); ++s)
      est.second_order[{ds.categorical_column(t).name, ds.continuous_column(s).name}] =
          sobol_second_mixed(ds.x().col(s), u, y);
  }
  return est;
}

std::string to_string(InteractionAction a) {
  switch (a) {
    case InteractionAction::standard_encoding: return "standard_encoding";
    case InteractionAction::partitioned: return "partitioned";
    case InteractionAction::none_significant: return "none_significant";
  }
  return "?";
}

nlohmann::json InteractionPlan::to_json() const {
  auto d = nlohmann::json::array();
  for (const auto& e : decisions)
    d.push_back({{"input", e.input}, {"action", to_string(e.action)}, {"partition_x", e.partition_x},
                 {"main_effect", e.main_effect}});
  return {{"main_threshold", main_threshold}, {"interaction_threshold", interaction_threshold}, {"bins", bins},
          {"decisions", std::move(d)}};
}

InteractionPlan build_interaction_plan(const MixedDataset& ds, Eigen::Index k, double main_threshold,
                                       double interaction_threshold, Eigen::Index bins) {
  if (!(main_threshold > 0.0 && main_threshold < 1.0) || !(interaction_threshold > 0.0 && interaction_threshold < 1.0))
    throw ConfigError("thresholds must lie in (0, 1)");
  if (bins < 1) throw ConfigError("bin count must be positive");
  const Eigen::VectorXd y = ds.y().col(k);
  InteractionPlan plan;
  plan.main_threshold = main_threshold;
  plan.interaction_threshold = interaction_threshold;
  plan.bins = bins;
  for (Eigen::Index t = 0; t < ds.n_categorical(); ++t) {
    InteractionDecision d;
    d.input = ds.categorical_column(t).name;
    const Eigen::VectorXi u = ds.u().col(t);
    d.main_effect = sobol_first_categorical(u, y);
    if (d.main_effect >= main_threshold) {
      d.action = InteractionAction::standard_encoding;
    } else {
      for (Eigen::Index s = 0; s < ds.n_continuous(); ++s)
        if (sobol_second_mixed(ds.x().col(s), u, y) >= interaction_threshold)
          d.partition_x.push_back(ds.continuous_column(s).name);
      d.action = d.partition_x.empty() ? InteractionAction::none_significant : InteractionAction::partitioned;
    }
    plan.decisions.push_back(std::move(d));
  }
  return plan;
}

}  // namespace dencgp
