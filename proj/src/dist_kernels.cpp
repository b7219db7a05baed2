#include "dencgp/dist_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "dencgp/errors.hpp"
#include "dencgp/random.hpp"

namespace dencgp {

std::string to_string(DistanceMetric m) {
  switch (m) {
    case DistanceMetric::w2: return "w2";
    case DistanceMetric::sw2: return "sw2";
    case DistanceMetric::mmd2: return "mmd2";
    case DistanceMetric::chi2: return "chi2";
    case DistanceMetric::tv: return "tv";
    case DistanceMetric::hellinger2: return "hellinger2";
    case DistanceMetric::euclid2: return "euclid2";
  }
  return "?";
}

DistanceMetric distance_metric_from_string(const std::string& s) {
  for (auto m : {DistanceMetric::w2, DistanceMetric::sw2, DistanceMetric::mmd2, DistanceMetric::chi2,
                 DistanceMetric::tv, DistanceMetric::hellinger2, DistanceMetric::euclid2})
    if (to_string(m) == s) return m;
  if (s == "mmd") return DistanceMetric::mmd2;
  if (s == "hellinger") return DistanceMetric::hellinger2;
  throw ConfigError("unknown distance metric '" + s + "'");
}

namespace {

// Mean of |F_a^{-1}(t) - F_b^{-1}(t)|^r over the quantile grid (or the
// order statistics when that is exact and allowed).
double mean_quantile_gap_pow(const std::vector<double>& a, const std::vector<double>& b, double r,
                             int n_quantiles, QuantileRule rule) {
  const auto pow_r = [r](double v) { return r == 2.0 ? v * v : std::pow(v, r); };
  if (rule == QuantileRule::automatic && a.size() == b.size() &&
      a.size() <= static_cast<std::size_t>(n_quantiles)) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += pow_r(std::abs(a[i] - b[i]));
    return acc / static_cast<double>(a.size());
  }
  const auto quantile = [](const std::vector<double>& s, double t) {
    // inf { x : F(x) >= t } for the step ecdf of s
    auto k = static_cast<std::size_t>(std::ceil(t * static_cast<double>(s.size())));
    k = std::clamp<std::size_t>(k, 1, s.size());
    return s[k - 1];
  };
  double acc = 0.0;
  for (int q = 1; q <= n_quantiles; ++q) {
    const double t = (static_cast<double>(q) - 0.5) / static_cast<double>(n_quantiles);
    acc += pow_r(std::abs(quantile(a, t) - quantile(b, t)));
  }
  return acc / static_cast<double>(n_quantiles);
}

void check_r(double r) {
  if (!(r >= 1.0)) throw ConfigError("Wasserstein order must be >= 1");
}

std::vector<double> projected_sorted(const EmpiricalDistribution& p, const Eigen::VectorXd& dir) {
  Eigen::VectorXd proj = p.samples() * dir;
  std::vector<double> v(proj.data(), proj.data() + proj.size());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

double wasserstein_1d(const EmpiricalDistribution& p, const EmpiricalDistribution& q, double r,
                      int n_quantiles, QuantileRule rule) {
  check_r(r);
  if (n_quantiles < 1) throw ConfigError("n_quantiles must be positive");
  if (p.dim() != 1 || q.dim() != 1) throw DataError("wasserstein_1d needs univariate distributions");
  const double m = mean_quantile_gap_pow(p.sorted(), q.sorted(), r, n_quantiles, rule);
  return r == 2.0 ? std::sqrt(m) : std::pow(m, 1.0 / r);
}

Eigen::MatrixXd sphere_directions(Eigen::Index d, int count, std::uint64_t seed) {
  if (d < 1 || count < 1) throw ConfigError("need a positive dimension and direction count");
  Engine eng(seed);
  Eigen::MatrixXd dirs(count, d);
  for (int i = 0; i < count; ++i) {
    double norm = 0.0;
    do {
      for (Eigen::Index k = 0; k < d; ++k) dirs(i, k) = standard_normal(eng);
      norm = dirs.row(i).norm();
    } while (norm < 1e-12);
    dirs.row(i) /= norm;
  }
  return dirs;
}

double sliced_wasserstein(const EmpiricalDistribution& p, const EmpiricalDistribution& q, double r,
                          int n_dirs, std::uint64_t seed, int n_quantiles, QuantileRule rule) {
  check_r(r);
  if (p.dim() != q.dim()) throw DataError("sliced_wasserstein: dimension mismatch");
  if (n_dirs < 1) throw ConfigError("n_dirs must be positive");
  // S^0 = {-1, +1} and W_r is invariant under a common reflection.
  if (p.dim() == 1) return wasserstein_1d(p, q, r, n_quantiles, rule);
  const auto dirs = sphere_directions(p.dim(), n_dirs, seed);
  double acc = 0.0;
  for (int i = 0; i < n_dirs; ++i) {
    const Eigen::VectorXd dir = dirs.row(i).transpose();
    acc += mean_quantile_gap_pow(projected_sorted(p, dir), projected_sorted(q, dir), r, n_quantiles, rule);
  }
  const double m = acc / n_dirs;
  return r == 2.0 ? std::sqrt(m) : std::pow(m, 1.0 / r);
}

double energy_base_kernel(std::span<const double> x, std::span<const double> x2) {
  if (x.size() != x2.size()) throw DataError("energy_base_kernel: dimension mismatch");
  double nx = 0.0, ny = 0.0, nd = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    nx += x[k] * x[k];
    ny += x2[k] * x2[k];
    nd += (x[k] - x2[k]) * (x[k] - x2[k]);
  }
  return 0.5 * (std::sqrt(nx) + std::sqrt(ny) - std::sqrt(nd));
}

namespace {

// Sum over i < j of |z_i - z_j| for sorted z.
double pairwise_abs_sum_sorted(const std::vector<double>& z) {
  double acc = 0.0;
  const auto m = static_cast<double>(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) acc += z[j] * (2.0 * static_cast<double>(j) - m + 1.0);
  return acc;
}

double sum_pair_norms(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) acc += (a.row(i) - b.row(j)).norm();
  return acc;
}

}  // namespace

double mmd_squared(const EmpiricalDistribution& p, const EmpiricalDistribution& q) {
  if (p.dim() != q.dim()) throw DataError("mmd_squared: dimension mismatch");
  const auto m = static_cast<double>(p.size());
  const auto n = static_cast<double>(q.size());
  // The norm terms of the energy kernel cancel, leaving
  // E|X - Y| - E|X - X'| / 2 - E|Y - Y'| / 2.
  double value = 0.0;
  if (p.dim() == 1) {
    const auto& a = p.sorted();
    const auto& b = q.sorted();
    std::vector<double> u;
    u.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
    const double sa = pairwise_abs_sum_sorted(a);
    const double sb = pairwise_abs_sum_sorted(b);
    const double cross = pairwise_abs_sum_sorted(u) - sa - sb;
    value = cross / (m * n) - sa / (m * m) - sb / (n * n);
  } else {
    const double cross = sum_pair_norms(p.samples(), q.samples());
    const double within_p = sum_pair_norms(p.samples(), p.samples());
    const double within_q = sum_pair_norms(q.samples(), q.samples());
    value = cross / (m * n) - 0.5 * within_p / (m * m) - 0.5 * within_q / (n * n);
  }
  return std::max(value, 0.0);
}

double histogram_psi(const Histogram& a, const Histogram& b, HistogramDivergence kind) {
  if (a.freqs.size() != b.freqs.size()) throw DataError("histogram_psi: length mismatch");
  double acc = 0.0;
  for (Eigen::Index m = 0; m < a.freqs.size(); ++m) {
    const double x = a.freqs(m), y = b.freqs(m);
    switch (kind) {
      case HistogramDivergence::chi2:
        if (x + y > 0.0) acc += (x - y) * (x - y) / (x + y);
        break;
      case HistogramDivergence::tv: acc += std::abs(x - y); break;
      case HistogramDivergence::hellinger2: {
        const double h = std::sqrt(x) - std::sqrt(y);
        acc += h * h;
        break;
      }
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------

double LevelDistanceMatrix::typical_scale(double exponent) const {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < D.rows(); ++i)
    for (Eigen::Index j = i + 1; j < D.cols(); ++j)
      if (D(i, j) > 0.0) v.push_back(std::pow(D(i, j), exponent));
  if (v.empty()) return 1.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

nlohmann::json LevelDistanceMatrix::to_json() const {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(D.cols()));
    for (Eigen::Index j = 0; j < D.cols(); ++j) r[static_cast<std::size_t>(j)] = D(i, j);
    rows.push_back(std::move(r));
  }
  return {{"metric", to_string(metric)}, {"labels", labels}, {"D", std::move(rows)}};
}

LevelDistanceMatrix LevelDistanceMatrix::from_json(const nlohmann::json& j) {
  LevelDistanceMatrix m;
  m.metric = distance_metric_from_string(j.at("metric").get<std::string>());
  m.labels = j.at("labels").get<std::vector<std::string>>();
  const auto L = static_cast<Eigen::Index>(m.labels.size());
  m.D.resize(L, L);
  const auto& rows = j.at("D");
  if (static_cast<Eigen::Index>(rows.size()) != L) throw ConfigError("distance matrix shape mismatch");
  for (Eigen::Index i = 0; i < L; ++i) {
    const auto r = rows[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(r.size()) != L) throw ConfigError("distance matrix shape mismatch");
    for (Eigen::Index k = 0; k < L; ++k) m.D(i, k) = r[static_cast<std::size_t>(k)];
  }
  return m;
}

bool metric_compatible(DistanceMetric metric, const EncodingTable& table) {
  switch (metric) {
    case DistanceMetric::w2: return table.kind == EncodingKind::distributional_1d;
    case DistanceMetric::sw2:
    case DistanceMetric::mmd2: return table.is_distributional();
    case DistanceMetric::chi2:
    case DistanceMetric::tv:
    case DistanceMetric::hellinger2: return table.kind == EncodingKind::histogram;
    case DistanceMetric::euclid2: return table.is_summary();
  }
  return false;
}

LevelDistanceMatrix level_distance_matrix(const EncodingTable& table, DistanceMetric metric,
                                          const EstimatorParams& params) {
  if (!metric_compatible(metric, table))
    throw ConfigError("metric " + to_string(metric) + " does not apply to " + to_string(table.kind) +
                      " encodings");
  const auto L = table.size();
  LevelDistanceMatrix out;
  out.metric = metric;
  out.labels = table.labels;
  out.D = Eigen::MatrixXd::Zero(L, L);

  const auto& pl = table.payloads;
  const auto at = [&](Eigen::Index i) -> const LevelPayload& { return pl[static_cast<std::size_t>(i)]; };

  // Mixing exact order-statistic pairs with grid pairs breaks the common
  // quantile embedding the kernel relies on, so the rule is table-wide.
  QuantileRule rule = QuantileRule::automatic;
  if (metric == DistanceMetric::w2 || metric == DistanceMetric::sw2) {
    const auto first = std::get<EmpiricalDistribution>(at(0)).size();
    for (Eigen::Index i = 1; i < L; ++i)
      if (std::get<EmpiricalDistribution>(at(i)).size() != first) rule = QuantileRule::grid;
  }

  std::vector<std::vector<std::vector<double>>> projected;  // [level][direction]
  if (metric == DistanceMetric::sw2) {
    const auto d = table.payload_dim();
    if (d == 1) {
      for (Eigen::Index i = 0; i < L; ++i)
        projected.push_back({std::get<EmpiricalDistribution>(at(i)).sorted()});
    } else {
      const auto dirs = sphere_directions(d, params.n_dirs, params.seed);
      for (Eigen::Index i = 0; i < L; ++i) {
        std::vector<std::vector<double>> per_dir;
        for (Eigen::Index k = 0; k < dirs.rows(); ++k)
          per_dir.push_back(projected_sorted(std::get<EmpiricalDistribution>(at(i)), dirs.row(k).transpose()));
        projected.push_back(std::move(per_dir));
      }
    }
  }

  for (Eigen::Index i = 0; i < L; ++i) {
    for (Eigen::Index j = i + 1; j < L; ++j) {
      double v = 0.0;
      switch (metric) {
        case DistanceMetric::w2: {
          const double w = wasserstein_1d(std::get<EmpiricalDistribution>(at(i)),
                                          std::get<EmpiricalDistribution>(at(j)), 2.0, params.n_quantiles, rule);
          v = w * w;
          break;
        }
        case DistanceMetric::sw2: {
          const auto& a = projected[static_cast<std::size_t>(i)];
          const auto& b = projected[static_cast<std::size_t>(j)];
          double acc = 0.0;
          for (std::size_t k = 0; k < a.size(); ++k)
            acc += mean_quantile_gap_pow(a[k], b[k], 2.0, params.n_quantiles, rule);
          v = acc / static_cast<double>(a.size());
          break;
        }
        case DistanceMetric::mmd2:
          v = mmd_squared(std::get<EmpiricalDistribution>(at(i)), std::get<EmpiricalDistribution>(at(j)));
          break;
        case DistanceMetric::chi2:
          v = histogram_psi(std::get<Histogram>(at(i)), std::get<Histogram>(at(j)), HistogramDivergence::chi2);
          break;
        case DistanceMetric::tv:
          v = histogram_psi(std::get<Histogram>(at(i)), std::get<Histogram>(at(j)), HistogramDivergence::tv);
          break;
        case DistanceMetric::hellinger2:
          v = histogram_psi(std::get<Histogram>(at(i)), std::get<Histogram>(at(j)),
                            HistogramDivergence::hellinger2);
          break;
        case DistanceMetric::euclid2:
          v = (std::get<Eigen::VectorXd>(at(i)) - std::get<Eigen::VectorXd>(at(j))).squaredNorm();
          break;
      }
      out.D(i, j) = out.D(j, i) = v;
    }
  }
  return out;
}

Eigen::MatrixXd normalized(const LevelDistanceMatrix& m) {
  double mx = 0.0;
  for (Eigen::Index i = 0; i < m.D.rows(); ++i)
    for (Eigen::Index j = 0; j < m.D.cols(); ++j)
      if (i != j) mx = std::max(mx, m.D(i, j));
  return mx > 0.0 ? Eigen::MatrixXd(m.D / mx) : m.D;
}

std::string distance_matrix_csv(const LevelDistanceMatrix& m, bool normalize) {
  const Eigen::MatrixXd D = normalize ? normalized(m) : m.D;
  std::ostringstream out;
  out << std::setprecision(17) << "level";
  for (const auto& l : m.labels) out << ',' << l;
  out << '\n';
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    out << m.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < D.cols(); ++j) out << ',' << D(i, j);
    out << '\n';
  }
  return out.str();
}

Eigen::MatrixXd substitution_gram(const LevelDistanceMatrix& dist, const SubstitutionKernelParams& params) {
  if (!(params.gamma > 0.0) || !std::isfinite(params.gamma)) throw ConfigError("gamma must be positive");
  if (!(params.beta >= 0.0 && params.beta <= 2.0)) throw ConfigError("beta must lie in [0, 2]");
  const auto L = dist.size();
  const double e = uses_beta(dist.metric) ? params.beta / 2.0 : 1.0;
  Eigen::MatrixXd T(L, L);
  for (Eigen::Index i = 0; i < L; ++i) {
    T(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < L; ++j) {
      const double d = std::max(dist.D(i, j), 0.0);
      const double base = e == 1.0 ? d : (d == 0.0 ? 0.0 : std::pow(d, e));
      T(i, j) = T(j, i) = std::exp(-params.gamma * base);
    }
  }
  return T;
}

double min_eigenvalue(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace dencgp
