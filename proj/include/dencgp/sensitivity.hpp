#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dencgp/data.hpp"
#include "json.hpp"

namespace dencgp {

/// Rank-successor permutation: sigma(i) is the row holding the next larger
/// x (wrapping around), ties ordered by row index.
std::vector<Eigen::Index> rank_successor(const Eigen::VectorXd& x);

/// Var(E[Y|X]) / Var(Y) from the rank estimator. Requires n >= 3.
double sobol_first_continuous(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Var(E[Y|U]) / Var(Y) from group means.
double sobol_first_categorical(const Eigen::VectorXi& u, const Eigen::VectorXd& y);

/// Second-order index of the (X, U) pair; each level needs at least 3 rows.
double sobol_second_mixed(const Eigen::VectorXd& x, const Eigen::VectorXi& u, const Eigen::VectorXd& y);

struct SobolEstimates {
  std::map<std::string, double> first_order;
  std::map<std::pair<std::string, std::string>, double> second_order;  ///< (categorical, continuous)
  double output_variance = 0.0;

  nlohmann::json to_json() const;
};

/// All first-order indices and every (categorical, continuous) second-order
/// index of output column k. Pairs are skipped when some level has fewer
/// than 3 rows.
SobolEstimates sobol_estimates(const MixedDataset& ds, Eigen::Index k);

enum class InteractionAction { standard_encoding, partitioned, none_significant };

std::string to_string(InteractionAction a);

struct InteractionDecision {
  std::string input;
  InteractionAction action = InteractionAction::none_significant;
  std::vector<std::string> partition_x;  ///< continuous inputs with a strong interaction
  double main_effect = 0.0;
};

struct InteractionPlan {
  std::vector<InteractionDecision> decisions;
  double main_threshold = 0.05;
  double interaction_threshold = 0.05;
  Eigen::Index bins = 2;

  nlohmann::json to_json() const;
};

InteractionPlan build_interaction_plan(const MixedDataset& ds, Eigen::Index k, double main_threshold = 0.05,
                                       double interaction_threshold = 0.05, Eigen::Index bins = 2);

}  // namespace dencgp
