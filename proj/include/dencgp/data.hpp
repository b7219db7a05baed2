#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace dencgp {

using IndexMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

enum class ColumnKind { continuous, categorical, output };

/// One column of a dataset. For categorical columns `levels` is the level
/// vocabulary. An output column with `levels` set holds class labels.
struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::optional<std::vector<std::string>> levels;

  bool is_class_output() const { return kind == ColumnKind::output && levels.has_value(); }
};

std::string to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& s);

std::vector<ColumnSchema> schema_from_json(const nlohmann::json& j);
nlohmann::json schema_to_json(const std::vector<ColumnSchema>& schema);
std::vector<ColumnSchema> load_schema(const std::filesystem::path& path);

/// Rows of continuous features `x` (n x p), categorical level indices `u`
/// (n x q) and outputs `y` (n x d). Class outputs are stored as class indices.
/// Immutable once constructed; the constructor validates every invariant.
class MixedDataset {
 public:
  MixedDataset(std::vector<ColumnSchema> schema, Eigen::MatrixXd x, IndexMatrix u,
               Eigen::MatrixXd y);

  const std::vector<ColumnSchema>& schema() const { return schema_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const IndexMatrix& u() const { return u_; }
  const Eigen::MatrixXd& y() const { return y_; }

  Eigen::Index rows() const { return y_.rows(); }
  Eigen::Index n_continuous() const { return x_.cols(); }
  Eigen::Index n_categorical() const { return u_.cols(); }
  Eigen::Index n_outputs() const { return y_.cols(); }

  const ColumnSchema& continuous_column(Eigen::Index s) const;
  const ColumnSchema& categorical_column(Eigen::Index t) const;
  const ColumnSchema& output_column(Eigen::Index k) const;
  const std::vector<std::string>& levels(Eigen::Index t) const;

  /// Index of a named column within its block, e.g. "U1" -> categorical 0.
  std::optional<Eigen::Index> find_continuous(const std::string& name) const;
  std::optional<Eigen::Index> find_categorical(const std::string& name) const;
  std::optional<Eigen::Index> find_output(const std::string& name) const;

  /// Subset of rows, schema and vocabularies unchanged.
  MixedDataset subset(const std::vector<Eigen::Index>& rows) const;

  /// Same data with blocks replaced (schema kept). Used by standardization.
  MixedDataset with_values(Eigen::MatrixXd x, Eigen::MatrixXd y) const;

 private:
  std::vector<ColumnSchema> schema_;
  std::vector<std::size_t> cont_cols_, cat_cols_, out_cols_;
  Eigen::MatrixXd x_;
  IndexMatrix u_;
  Eigen::MatrixXd y_;
};

enum class VocabularyPolicy {
  open,    ///< unseen labels are appended to the vocabulary
  strict,  ///< unseen labels are an error when a vocabulary is declared
};

/// Reads a comma-separated file with a header row. Columns are matched by
/// name; extra columns in the file are ignored. Levels not declared in the
/// schema are frozen in first-appearance order.
MixedDataset load_csv(const std::filesystem::path& path, const std::vector<ColumnSchema>& schema,
                      VocabularyPolicy policy = VocabularyPolicy::open);
MixedDataset parse_csv(const std::string& text, const std::vector<ColumnSchema>& schema,
                       VocabularyPolicy policy = VocabularyPolicy::open);

/// Writes the dataset back as CSV in schema order (17 significant digits).
std::string to_csv(const MixedDataset& ds);

/// Per-column affine maps bringing continuous columns and real outputs to
/// mean 0 and sample standard deviation 1. Class outputs pass through.
struct Standardizer {
  Eigen::VectorXd x_mean, x_sd;
  Eigen::VectorXd y_mean, y_sd;

  MixedDataset apply(const MixedDataset& ds) const;
  MixedDataset invert(const MixedDataset& ds) const;

  double output_to_raw(Eigen::Index k, double v) const { return v * y_sd(k) + y_mean(k); }
  double output_to_standard(Eigen::Index k, double v) const { return (v - y_mean(k)) / y_sd(k); }

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);
};

struct Standardized {
  MixedDataset data;
  Standardizer standardizer;
};

Standardized standardize(const MixedDataset& ds);

enum class SplitPolicy {
  strict,    ///< error when a level occurring in the data misses the training part
  resample,  ///< redraw the partition (bounded number of attempts)
};

struct SplitResult {
  MixedDataset train;
  MixedDataset test;
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
};

SplitResult split(const MixedDataset& ds, double test_fraction, std::uint64_t seed,
                  SplitPolicy policy = SplitPolicy::strict);

}  // namespace dencgp
