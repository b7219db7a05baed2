#include "dencgp/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dencgp/errors.hpp"

namespace dencgp {

EmpiricalDistribution::EmpiricalDistribution(Eigen::MatrixXd samples) : samples_(std::move(samples)) {
  if (samples_.rows() < 1 || samples_.cols() < 1) throw DataError("empty distribution");
  if (samples_.cols() == 1) {
    sorted_.assign(samples_.data(), samples_.data() + samples_.rows());
    std::sort(sorted_.begin(), sorted_.end());
  }
}

EmpiricalDistribution EmpiricalDistribution::from_values(const std::vector<double>& values) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
  return EmpiricalDistribution(std::move(m));
}

const std::vector<double>& EmpiricalDistribution::sorted() const {
  if (dim() != 1) throw DataError("sorted view requested on a multivariate distribution");
  return sorted_;
}

std::string to_string(EncodingKind kind) {
  switch (kind) {
    case EncodingKind::one_hot: return "one_hot";
    case EncodingKind::mean: return "mean";
    case EncodingKind::mean_std: return "mean_std";
    case EncodingKind::distributional_1d: return "distributional_1d";
    case EncodingKind::distributional_md: return "distributional_md";
    case EncodingKind::histogram: return "histogram";
  }
  return "?";
}

EncodingKind encoding_kind_from_string(const std::string& s) {
  for (auto k : {EncodingKind::one_hot, EncodingKind::mean, EncodingKind::mean_std,
                 EncodingKind::distributional_1d, EncodingKind::distributional_md,
                 EncodingKind::histogram})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown encoding kind '" + s + "'");
}

std::string to_string(AuxMode mode) { return mode == AuxMode::concat ? "concat" : "replace"; }

AuxMode aux_mode_from_string(const std::string& s) {
  if (s == "concat") return AuxMode::concat;
  if (s == "replace") return AuxMode::replace;
  throw ConfigError("unknown auxiliary mode '" + s + "'");
}

Eigen::Index QuantilePartition::bin_of(double x) const {
  return static_cast<Eigen::Index>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
}

std::optional<Eigen::Index> EncodingTable::find(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<Eigen::Index>(it - labels.begin());
}

Eigen::Index EncodingTable::payload_dim() const {
  if (payloads.empty()) return 0;
  return std::visit(
      [](const auto& p) -> Eigen::Index {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Eigen::VectorXd>) return p.size();
        else if constexpr (std::is_same_v<T, EmpiricalDistribution>) return p.dim();
        else return p.freqs.size();
      },
      payloads.front());
}

std::size_t EncodingTable::min_count() const {
  return counts.empty() ? 0 : *std::min_element(counts.begin(), counts.end());
}

std::optional<Eigen::Index> EncodingTable::index_of_row(const MixedDataset& ds, Eigen::Index i) const {
  const auto& label = ds.levels(input_index)[static_cast<std::size_t>(ds.u()(i, input_index))];
  if (!partition) return find(label);
  auto it = std::find(cell_levels.begin(), cell_levels.end(), label);
  if (it == cell_levels.end()) return std::nullopt;
  const auto pos = static_cast<Eigen::Index>(it - cell_levels.begin());
  return pos * partition->bins() + partition->bin_of(ds.x()(i, partition->x_index));
}

// ---------------------------------------------------------------------------

namespace {

// Row indices per level of input t, in vocabulary order. Every level must occur.
std::vector<std::vector<Eigen::Index>> rows_by_level(const MixedDataset& ds, Eigen::Index t) {
  if (t < 0 || t >= ds.n_categorical()) throw ConfigError("categorical input index out of range");
  std::vector<std::vector<Eigen::Index>> rows(ds.levels(t).size());
  for (Eigen::Index i = 0; i < ds.rows(); ++i) rows[static_cast<std::size_t>(ds.u()(i, t))].push_back(i);
  for (std::size_t l = 0; l < rows.size(); ++l)
    if (rows[l].empty())
      throw DataError("empty level '" + ds.levels(t)[l] + "' in input '" +
                      ds.categorical_column(t).name + "'");
  return rows;
}

void check_real_output(const MixedDataset& ds, Eigen::Index out) {
  if (out < 0 || out >= ds.n_outputs()) throw ConfigError("output index out of range");
  if (ds.output_column(out).is_class_output())
    throw ConfigError("output '" + ds.output_column(out).name + "' holds class labels");
}

EncodingTable table_skeleton(const MixedDataset& ds, Eigen::Index t, EncodingKind kind,
                             const std::vector<std::vector<Eigen::Index>>& rows) {
  EncodingTable table;
  table.input_index = t;
  table.kind = kind;
  table.labels = ds.levels(t);
  for (const auto& r : rows) table.counts.push_back(r.size());
  return table;
}

}  // namespace

EncodingTable one_hot_encoding(const MixedDataset& ds, Eigen::Index t) {
  const auto rows = rows_by_level(ds, t);
  auto table = table_skeleton(ds, t, EncodingKind::one_hot, rows);
  const auto L = static_cast<Eigen::Index>(rows.size());
  for (Eigen::Index l = 0; l < L; ++l) table.payloads.emplace_back(Eigen::VectorXd::Unit(L, l));
  return table;
}

EncodingTable mean_encoding(const MixedDataset& ds, Eigen::Index t, Eigen::Index out) {
  check_real_output(ds, out);
  const auto rows = rows_by_level(ds, t);
  auto table = table_skeleton(ds, t, EncodingKind::mean, rows);
  for (const auto& r : rows) {
    double sum = 0.0;
    for (auto i : r) sum += ds.y()(i, out);
    table.payloads.emplace_back(Eigen::VectorXd::Constant(1, sum / static_cast<double>(r.size())));
  }
  return table;
}

EncodingTable mean_std_encoding(const MixedDataset& ds, Eigen::Index t, Eigen::Index out) {
  check_real_output(ds, out);
  const auto rows = rows_by_level(ds, t);
  auto table = table_skeleton(ds, t, EncodingKind::mean_std, rows);
  for (const auto& r : rows) {
    const auto m = static_cast<double>(r.size());
    double sum = 0.0;
    for (auto i : r) sum += ds.y()(i, out);
    const double mean = sum / m;
    double ss = 0.0;
    for (auto i : r) ss += (ds.y()(i, out) - mean) * (ds.y()(i, out) - mean);
    Eigen::VectorXd v(2);
    v << mean, std::sqrt(ss / m);
    table.payloads.emplace_back(std::move(v));
  }
  return table;
}

EncodingTable distributional_encoding(const MixedDataset& ds, Eigen::Index t,
                                      const std::vector<Eigen::Index>& outs) {
  if (outs.empty()) throw ConfigError("distributional encoding needs at least one output");
  for (auto k : outs) check_real_output(ds, k);
  const auto rows = rows_by_level(ds, t);
  auto table = table_skeleton(
      ds, t, outs.size() == 1 ? EncodingKind::distributional_1d : EncodingKind::distributional_md,
      rows);
  const auto d = static_cast<Eigen::Index>(outs.size());
  for (const auto& r : rows) {
    Eigen::MatrixXd samples(static_cast<Eigen::Index>(r.size()), d);
    for (std::size_t j = 0; j < r.size(); ++j)
      for (Eigen::Index k = 0; k < d; ++k)
        samples(static_cast<Eigen::Index>(j), k) = ds.y()(r[j], outs[static_cast<std::size_t>(k)]);
    table.payloads.emplace_back(EmpiricalDistribution(std::move(samples)));
  }
  return table;
}

EncodingTable histogram_encoding(const MixedDataset& ds, Eigen::Index t, Eigen::Index out) {
  if (out < 0 || out >= ds.n_outputs()) throw ConfigError("output index out of range");
  const auto& col = ds.output_column(out);
  if (!col.is_class_output())
    throw ConfigError("histogram encoding needs a class output, '" + col.name + "' is real");
  const auto rows = rows_by_level(ds, t);
  auto table = table_skeleton(ds, t, EncodingKind::histogram, rows);
  const auto M = static_cast<Eigen::Index>(col.levels->size());
  for (const auto& r : rows) {
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(M);
    for (auto i : r) counts(static_cast<Eigen::Index>(ds.y()(i, out))) += 1.0;
    table.payloads.emplace_back(Histogram{counts / static_cast<double>(r.size())});
  }
  return table;
}

// ---------------------------------------------------------------------------

EncodingTable merge_auxiliary(const EncodingTable& base, const EncodingTable& aux, AuxMode mode) {
  if (!base.is_distributional() || !aux.is_distributional())
    throw ConfigError("auxiliary merging needs distributional tables");
  if (base.payload_dim() != aux.payload_dim())
    throw ConfigError("auxiliary table has a different sample dimension");
  if (base.partition || aux.partition)
    throw ConfigError("auxiliary merging of partitioned tables is not supported");

  EncodingTable merged;
  merged.input_index = base.input_index;
  merged.kind = base.kind;

  for (Eigen::Index l = 0; l < base.size(); ++l) {
    const auto& label = base.labels[static_cast<std::size_t>(l)];
    const auto& own = std::get<EmpiricalDistribution>(base.payloads[static_cast<std::size_t>(l)]);
    const auto a = aux.find(label);
    if (!a) {
      if (mode == AuxMode::replace)
        throw DataError("auxiliary data has no samples for level '" + label + "'");
      merged.labels.push_back(label);
      merged.payloads.emplace_back(own);
      merged.counts.push_back(static_cast<std::size_t>(own.size()));
      continue;
    }
    const auto& extra = std::get<EmpiricalDistribution>(aux.payloads[static_cast<std::size_t>(*a)]);
    merged.labels.push_back(label);
    if (mode == AuxMode::replace) {
      merged.payloads.emplace_back(extra);
      merged.counts.push_back(static_cast<std::size_t>(extra.size()));
    } else {
      Eigen::MatrixXd joined(own.size() + extra.size(), own.dim());
      joined << own.samples(), extra.samples();
      merged.counts.push_back(static_cast<std::size_t>(joined.rows()));
      merged.payloads.emplace_back(EmpiricalDistribution(std::move(joined)));
    }
  }
  for (Eigen::Index l = 0; l < aux.size(); ++l) {
    const auto& label = aux.labels[static_cast<std::size_t>(l)];
    if (base.find(label)) continue;
    const auto& extra = std::get<EmpiricalDistribution>(aux.payloads[static_cast<std::size_t>(l)]);
    merged.labels.push_back(label);
    merged.payloads.emplace_back(extra);
    merged.counts.push_back(static_cast<std::size_t>(extra.size()));
  }
  return merged;
}

// ---------------------------------------------------------------------------

namespace {
// Linear-interpolation empirical quantile of sorted data.
double empirical_quantile(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}
}  // namespace

EncodingTable interaction_partition_encoding(const MixedDataset& ds, Eigen::Index t,
                                             Eigen::Index x_index, Eigen::Index bins,
                                             Eigen::Index out, EmptyCellPolicy policy) {
  if (bins < 1) throw ConfigError("partition needs at least one bin");
  if (x_index < 0 || x_index >= ds.n_continuous())
    throw ConfigError("continuous input index out of range");
  check_real_output(ds, out);
  const auto rows = rows_by_level(ds, t);

  QuantilePartition part;
  part.x_index = x_index;
  std::vector<double> xs(ds.x().col(x_index).data(), ds.x().col(x_index).data() + ds.rows());
  std::sort(xs.begin(), xs.end());
  for (Eigen::Index s = 1; s < bins; ++s)
    part.edges.push_back(empirical_quantile(xs, static_cast<double>(s) / static_cast<double>(bins)));

  EncodingTable table;
  table.input_index = t;
  table.kind = EncodingKind::distributional_1d;
  table.cell_levels = ds.levels(t);

  const auto S = static_cast<std::size_t>(bins);
  for (std::size_t l = 0; l < rows.size(); ++l) {
    std::vector<std::vector<double>> cell(S);
    for (auto i : rows[l])
      cell[static_cast<std::size_t>(part.bin_of(ds.x()(i, x_index)))].push_back(ds.y()(i, out));
    for (std::size_t s = 0; s < S; ++s) {
      const auto& level = table.cell_levels[l];
      table.labels.push_back(bins == 1 ? level : level + "|" + std::to_string(s));
      table.counts.push_back(cell[s].size());
      if (!cell[s].empty()) {
        table.payloads.emplace_back(EmpiricalDistribution::from_values(cell[s]));
        continue;
      }
      if (policy == EmptyCellPolicy::error)
        throw DataError("empty cell (level '" + level + "', bin " + std::to_string(s) + ")");
      // Borrow the nearest nonempty bin of the same level, lower bin on ties.
      for (std::size_t off = 1; off < S; ++off) {
        if (s >= off && !cell[s - off].empty()) {
          table.payloads.emplace_back(EmpiricalDistribution::from_values(cell[s - off]));
          break;
        }
        if (s + off < S && !cell[s + off].empty()) {
          table.payloads.emplace_back(EmpiricalDistribution::from_values(cell[s + off]));
          break;
        }
      }
    }
  }
  if (bins > 1) table.partition = std::move(part);
  return table;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json payload_to_json(const LevelPayload& p) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Eigen::VectorXd>) {
          return {{"summary", std::vector<double>(v.data(), v.data() + v.size())}};
        } else if constexpr (std::is_same_v<T, EmpiricalDistribution>) {
          if (v.dim() == 1) return {{"samples", v.sorted()}};
          auto rows = nlohmann::json::array();
          for (Eigen::Index i = 0; i < v.size(); ++i) {
            Eigen::VectorXd r = v.samples().row(i).transpose();
            rows.push_back(std::vector<double>(r.data(), r.data() + r.size()));
          }
          return {{"samples", rows}};
        } else {
          return {{"freqs", std::vector<double>(v.freqs.data(), v.freqs.data() + v.freqs.size())}};
        }
      },
      p);
}

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

LevelPayload payload_from_json(const nlohmann::json& j) {
  if (j.contains("summary")) return vec(j.at("summary").get<std::vector<double>>());
  if (j.contains("freqs")) return Histogram{vec(j.at("freqs").get<std::vector<double>>())};
  const auto& s = j.at("samples");
  if (s.empty()) throw ConfigError("empty sample payload");
  if (s.front().is_number()) return EmpiricalDistribution::from_values(s.get<std::vector<double>>());
  const auto m = static_cast<Eigen::Index>(s.size());
  const auto d = static_cast<Eigen::Index>(s.front().size());
  Eigen::MatrixXd samples(m, d);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto row = s[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != d) throw ConfigError("ragged sample payload");
    for (Eigen::Index k = 0; k < d; ++k) samples(i, k) = row[static_cast<std::size_t>(k)];
  }
  return EmpiricalDistribution(std::move(samples));
}

}  // namespace

nlohmann::json EncodingTable::to_json() const {
  auto levels = nlohmann::json::array();
  for (std::size_t l = 0; l < labels.size(); ++l)
    levels.push_back({{"label", labels[l]}, {"count", counts[l]}, {"payload", payload_to_json(payloads[l])}});
  nlohmann::json j{{"input", input_index}, {"kind", to_string(kind)}, {"levels", std::move(levels)}};
  if (partition) {
    j["partition"] = {{"x_index", partition->x_index}, {"edges", partition->edges}};
    j["cell_levels"] = cell_levels;
  }
  return j;
}

EncodingTable EncodingTable::from_json(const nlohmann::json& j) {
  EncodingTable t;
  t.input_index = j.at("input").get<Eigen::Index>();
  t.kind = encoding_kind_from_string(j.at("kind").get<std::string>());
  for (const auto& l : j.at("levels")) {
    t.labels.push_back(l.at("label").get<std::string>());
    t.counts.push_back(l.at("count").get<std::size_t>());
    t.payloads.push_back(payload_from_json(l.at("payload")));
  }
  if (j.contains("partition")) {
    QuantilePartition p;
    p.x_index = j.at("partition").at("x_index").get<Eigen::Index>();
    p.edges = j.at("partition").at("edges").get<std::vector<double>>();
    t.partition = std::move(p);
    t.cell_levels = j.at("cell_levels").get<std::vector<std::string>>();
  }
  return t;
}

}  // namespace dencgp
