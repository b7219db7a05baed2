#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dencgp/data.hpp"
#include "json.hpp"

namespace dencgp {

/// Uniformly weighted sample set of m points in R^d. For d == 1 a sorted copy
/// of the samples is kept alongside.
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(Eigen::MatrixXd samples);
  static EmpiricalDistribution from_values(const std::vector<double>& values);

  const Eigen::MatrixXd& samples() const { return samples_; }
  const std::vector<double>& sorted() const;  ///< d == 1 only
  Eigen::Index size() const { return samples_.rows(); }
  Eigen::Index dim() const { return samples_.cols(); }

  friend bool operator==(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
    return a.samples_ == b.samples_;
  }

 private:
  Eigen::MatrixXd samples_;
  std::vector<double> sorted_;
};

/// Class frequencies, nonnegative and summing to one.
struct Histogram {
  Eigen::VectorXd freqs;

  friend bool operator==(const Histogram& a, const Histogram& b) { return a.freqs == b.freqs; }
};

enum class EncodingKind { one_hot, mean, mean_std, distributional_1d, distributional_md, histogram };

std::string to_string(EncodingKind kind);
EncodingKind encoding_kind_from_string(const std::string& s);

/// Summary vectors (one_hot, mean, mean_std), distributions or histograms.
using LevelPayload = std::variant<Eigen::VectorXd, EmpiricalDistribution, Histogram>;

/// Cells of an interaction encoding: level l and quantile bin s of a
/// continuous input map to cell l * bins + s.
struct QuantilePartition {
  Eigen::Index x_index = 0;
  std::vector<double> edges;  ///< S - 1 interior cut points, nondecreasing
  Eigen::Index bins() const { return static_cast<Eigen::Index>(edges.size()) + 1; }
  /// Bin of x under the [q_{s-1}, q_s) convention, last bin closed.
  Eigen::Index bin_of(double x) const;
};

/// Per-level encodings of one categorical input, keyed by level label.
struct EncodingTable {
  Eigen::Index input_index = 0;
  EncodingKind kind = EncodingKind::mean;
  std::vector<std::string> labels;
  std::vector<LevelPayload> payloads;
  std::vector<std::size_t> counts;
  std::optional<QuantilePartition> partition;
  std::vector<std::string> cell_levels;  ///< partitioned only: cell = position here * bins + bin

  Eigen::Index size() const { return static_cast<Eigen::Index>(labels.size()); }
  std::optional<Eigen::Index> find(const std::string& label) const;

  bool is_summary() const {
    return kind == EncodingKind::one_hot || kind == EncodingKind::mean ||
           kind == EncodingKind::mean_std;
  }
  bool is_distributional() const {
    return kind == EncodingKind::distributional_1d || kind == EncodingKind::distributional_md;
  }
  /// Dimension of the sample space (distributional) or summary vector length.
  Eigen::Index payload_dim() const;
  /// Smallest per-level payload size; a diagnostic, not a constraint.
  std::size_t min_count() const;

  /// Table index of row i of `ds` (label lookup, partition cell if any).
  /// Returns nullopt for a label missing from the table.
  std::optional<Eigen::Index> index_of_row(const MixedDataset& ds, Eigen::Index i) const;

  nlohmann::json to_json() const;
  static EncodingTable from_json(const nlohmann::json& j);
};

EncodingTable one_hot_encoding(const MixedDataset& ds, Eigen::Index t);
EncodingTable mean_encoding(const MixedDataset& ds, Eigen::Index t, Eigen::Index out);
EncodingTable mean_std_encoding(const MixedDataset& ds, Eigen::Index t, Eigen::Index out);
EncodingTable distributional_encoding(const MixedDataset& ds, Eigen::Index t,
                                      const std::vector<Eigen::Index>& outs);
EncodingTable histogram_encoding(const MixedDataset& ds, Eigen::Index t, Eigen::Index out);

enum class AuxMode { concat, replace };
std::string to_string(AuxMode mode);
AuxMode aux_mode_from_string(const std::string& s);

/// Combines a training table with one built from auxiliary data. Levels that
/// only the auxiliary table knows become part of the result.
EncodingTable merge_auxiliary(const EncodingTable& base, const EncodingTable& aux, AuxMode mode);

enum class EmptyCellPolicy { error, merge_adjacent };

/// Distributional encoding of (level, quantile bin of x) cells.
EncodingTable interaction_partition_encoding(const MixedDataset& ds, Eigen::Index t,
                                             Eigen::Index x_index, Eigen::Index bins,
                                             Eigen::Index out = 0,
                                             EmptyCellPolicy policy = EmptyCellPolicy::error);

}  // namespace dencgp
