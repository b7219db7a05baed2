#pragma once

#include <Eigen/Dense>

#include <functional>

namespace dencgp {

struct NelderMeadSettings {
  int max_evals = 400;
  double tolerance = 1e-7;   ///< relative spread of simplex values
  double initial_step = 0.1; ///< fraction of each box side
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evals = 0;
  bool converged = false;
};

/// Minimizes f over the box [lo, hi]; trial points are projected onto the
/// box. A non-finite value is treated as +inf.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const NelderMeadSettings& settings = {});

}  // namespace dencgp
