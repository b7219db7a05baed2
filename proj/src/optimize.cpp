#include "dencgp/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dencgp/errors.hpp"

namespace dencgp {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const NelderMeadSettings& settings) {
  const auto n = x0.size();
  if (lo.size() != n || hi.size() != n) throw ConfigError("bounds must match the start point");
  if ((lo.array() > hi.array()).any()) throw ConfigError("lower bound above upper bound");

  NelderMeadResult res;
  const auto project = [&](Eigen::VectorXd x) { return x.cwiseMax(lo).cwiseMin(hi).eval(); };
  const auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.push_back(project(x0));
  values.push_back(eval(simplex[0]));
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::VectorXd v = simplex[0];
    const double step = settings.initial_step * std::max(hi(k) - lo(k), 1e-12);
    v(k) += (v(k) + step <= hi(k)) ? step : -step;
    simplex.push_back(project(v));
    values.push_back(eval(simplex.back()));
  }

  std::vector<std::size_t> order(simplex.size());
  while (res.evals < settings.max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    const auto best = order.front(), worst = order.back(), second = order[order.size() - 2];
    const double spread = values[worst] - values[best];
    if (std::isfinite(spread) && spread <= settings.tolerance * (1.0 + std::abs(values[best]))) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += simplex[order[k]];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = project(centroid + (centroid - simplex[worst]));
    const double fr = eval(xr);
    if (fr < values[best]) {
      const Eigen::VectorXd xe = project(centroid + 2.0 * (centroid - simplex[worst]));
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = xr;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const Eigen::VectorXd xc =
        outside ? project(centroid + 0.5 * (xr - centroid)) : project(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = xc;
      values[worst] = fc;
      continue;
    }
    for (std::size_t k = 1; k < order.size(); ++k) {
      auto& v = simplex[order[k]];
      v = project(simplex[best] + 0.5 * (v - simplex[best]));
      values[order[k]] = eval(v);
    }
  }

  const auto it = std::min_element(values.begin(), values.end());
  res.x = simplex[static_cast<std::size_t>(it - values.begin())];
  res.value = *it;
  return res;
}

}  // namespace dencgp
