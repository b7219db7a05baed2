#include "dencgp/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dencgp/errors.hpp"
#include "dencgp/random.hpp"

namespace dencgp {

std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::output: return "output";
  }
  return "?";
}

ColumnKind column_kind_from_string(const std::string& s) {
  if (s == "continuous" || s == "cont") return ColumnKind::continuous;
  if (s == "categorical" || s == "cat") return ColumnKind::categorical;
  if (s == "output") return ColumnKind::output;
  throw ConfigError("unknown column kind '" + s + "'");
}

std::vector<ColumnSchema> schema_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("schema must be a JSON list of columns");
  std::vector<ColumnSchema> schema;
  std::set<std::string> names;
  bool has_output = false;
  for (const auto& col : j) {
    ColumnSchema c;
    try {
      c.name = col.at("name").get<std::string>();
      c.kind = column_kind_from_string(col.at("kind").get<std::string>());
      if (col.contains("levels")) c.levels = col.at("levels").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed schema entry: ") + e.what());
    }
    if (!names.insert(c.name).second) throw ConfigError("duplicate column '" + c.name + "'");
    if (c.levels) {
      std::set<std::string> uniq(c.levels->begin(), c.levels->end());
      if (uniq.size() != c.levels->size())
        throw ConfigError("duplicate level label in column '" + c.name + "'");
      if (c.kind == ColumnKind::continuous)
        throw ConfigError("continuous column '" + c.name + "' cannot declare levels");
    }
    if (c.kind == ColumnKind::categorical && !c.levels) c.levels.emplace();
    has_output = has_output || c.kind == ColumnKind::output;
    schema.push_back(std::move(c));
  }
  if (!has_output) throw ConfigError("schema declares no output column");
  return schema;
}

nlohmann::json schema_to_json(const std::vector<ColumnSchema>& schema) {
  auto j = nlohmann::json::array();
  for (const auto& c : schema) {
    nlohmann::json col{{"name", c.name}, {"kind", to_string(c.kind)}};
    if (c.levels) col["levels"] = *c.levels;
    j.push_back(std::move(col));
  }
  return j;
}

std::vector<ColumnSchema> load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return schema_from_json(j);
}

// ---------------------------------------------------------------------------

MixedDataset::MixedDataset(std::vector<ColumnSchema> schema, Eigen::MatrixXd x, IndexMatrix u,
                           Eigen::MatrixXd y)
    : schema_(std::move(schema)), x_(std::move(x)), u_(std::move(u)), y_(std::move(y)) {
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    switch (schema_[i].kind) {
      case ColumnKind::continuous: cont_cols_.push_back(i); break;
      case ColumnKind::categorical: cat_cols_.push_back(i); break;
      case ColumnKind::output: out_cols_.push_back(i); break;
    }
  }
  if (out_cols_.empty()) throw ConfigError("dataset schema has no output column");
  const auto n = y_.rows();
  if (x_.rows() != n || u_.rows() != n)
    throw DataError("dataset blocks disagree on the number of rows");
  if (static_cast<std::size_t>(x_.cols()) != cont_cols_.size() ||
      static_cast<std::size_t>(u_.cols()) != cat_cols_.size() ||
      static_cast<std::size_t>(y_.cols()) != out_cols_.size())
    throw DataError("dataset blocks disagree with the schema");
  for (Eigen::Index t = 0; t < u_.cols(); ++t) {
    const auto L = static_cast<int>(levels(t).size());
    for (Eigen::Index i = 0; i < n; ++i)
      if (u_(i, t) < 0 || u_(i, t) >= L)
        throw DataError("level index out of range in column '" + categorical_column(t).name + "'");
  }
  for (Eigen::Index k = 0; k < y_.cols(); ++k) {
    const auto& col = output_column(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(y_(i, k))) throw DataError("non-finite output in '" + col.name + "'");
      if (col.is_class_output()) {
        const double v = y_(i, k);
        if (v < 0 || v >= static_cast<double>(col.levels->size()) || v != std::floor(v))
          throw DataError("class index out of range in output '" + col.name + "'");
      }
    }
  }
  if (!x_.allFinite()) throw DataError("non-finite continuous value");
}

const ColumnSchema& MixedDataset::continuous_column(Eigen::Index s) const {
  return schema_.at(cont_cols_.at(static_cast<std::size_t>(s)));
}
const ColumnSchema& MixedDataset::categorical_column(Eigen::Index t) const {
  return schema_.at(cat_cols_.at(static_cast<std::size_t>(t)));
}
const ColumnSchema& MixedDataset::output_column(Eigen::Index k) const {
  return schema_.at(out_cols_.at(static_cast<std::size_t>(k)));
}
const std::vector<std::string>& MixedDataset::levels(Eigen::Index t) const {
  return *categorical_column(t).levels;
}

namespace {
std::optional<Eigen::Index> find_in(const std::vector<ColumnSchema>& schema,
                                    const std::vector<std::size_t>& cols, const std::string& name) {
  for (std::size_t k = 0; k < cols.size(); ++k)
    if (schema[cols[k]].name == name) return static_cast<Eigen::Index>(k);
  return std::nullopt;
}
}  // namespace

std::optional<Eigen::Index> MixedDataset::find_continuous(const std::string& name) const {
  return find_in(schema_, cont_cols_, name);
}
std::optional<Eigen::Index> MixedDataset::find_categorical(const std::string& name) const {
  return find_in(schema_, cat_cols_, name);
}
std::optional<Eigen::Index> MixedDataset::find_output(const std::string& name) const {
  return find_in(schema_, out_cols_, name);
}

MixedDataset MixedDataset::subset(const std::vector<Eigen::Index>& rows) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd xs(m, x_.cols());
  IndexMatrix us(m, u_.cols());
  Eigen::MatrixXd ys(m, y_.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= this->rows()) throw DataError("row index out of range in subset");
    xs.row(i) = x_.row(r);
    us.row(i) = u_.row(r);
    ys.row(i) = y_.row(r);
  }
  return MixedDataset(schema_, std::move(xs), std::move(us), std::move(ys));
}

MixedDataset MixedDataset::with_values(Eigen::MatrixXd x, Eigen::MatrixXd y) const {
  return MixedDataset(schema_, std::move(x), u_, std::move(y));
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct Vocabulary {
  std::vector<std::string> labels;
  std::unordered_map<std::string, int> index;
  bool declared = false;

  int lookup(const std::string& label, VocabularyPolicy policy, const std::string& column,
             std::size_t row) {
    if (auto it = index.find(label); it != index.end()) return it->second;
    if (declared && policy == VocabularyPolicy::strict)
      throw DataError("unknown level '" + label + "' in column '" + column + "' (row " +
                      std::to_string(row) + ")");
    const int id = static_cast<int>(labels.size());
    labels.push_back(label);
    index.emplace(label, id);
    return id;
  }
};

}  // namespace

MixedDataset parse_csv(const std::string& text, const std::vector<ColumnSchema>& schema,
                       VocabularyPolicy policy) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw DataError("empty file");

  std::vector<std::size_t> position(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), schema[c].name);
    if (it == header.end()) throw DataError("missing column '" + schema[c].name + "'");
    position[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<Vocabulary> vocab(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (!schema[c].levels) continue;
    vocab[c].declared = !schema[c].levels->empty();
    for (const auto& l : *schema[c].levels) vocab[c].lookup(l, VocabularyPolicy::open, "", 0);
  }

  std::vector<std::vector<double>> xs, ys;
  std::vector<std::vector<int>> us;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() < header.size())
      throw DataError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(header.size()));
    std::vector<double> xr, yr;
    std::vector<int> ur;
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto& col = schema[c];
      const auto& cell = cells[position[c]];
      if (col.kind == ColumnKind::categorical || col.is_class_output()) {
        if (cell.empty())
          throw DataError("missing value in column '" + col.name + "' (row " +
                          std::to_string(row) + ")");
        const int id = vocab[c].lookup(cell, policy, col.name, row);
        if (col.kind == ColumnKind::categorical)
          ur.push_back(id);
        else
          yr.push_back(id);
      } else {
        const auto v = parse_number(cell);
        if (!v)
          throw DataError("cannot parse '" + cell + "' as a number in column '" + col.name +
                          "' (row " + std::to_string(row) + ")");
        (col.kind == ColumnKind::continuous ? xr : yr).push_back(*v);
      }
    }
    xs.push_back(std::move(xr));
    us.push_back(std::move(ur));
    ys.push_back(std::move(yr));
  }
  if (row == 0) throw DataError("empty file");

  std::vector<ColumnSchema> frozen = schema;
  Eigen::Index p = 0, q = 0, d = 0;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (frozen[c].levels || frozen[c].kind == ColumnKind::categorical) frozen[c].levels = vocab[c].labels;
    switch (schema[c].kind) {
      case ColumnKind::continuous: ++p; break;
      case ColumnKind::categorical: ++q; break;
      case ColumnKind::output: ++d; break;
    }
  }
  const auto n = static_cast<Eigen::Index>(row);
  Eigen::MatrixXd x(n, p), y(n, d);
  IndexMatrix u(n, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    for (Eigen::Index s = 0; s < p; ++s) x(i, s) = xs[r][static_cast<std::size_t>(s)];
    for (Eigen::Index t = 0; t < q; ++t) u(i, t) = us[r][static_cast<std::size_t>(t)];
    for (Eigen::Index k = 0; k < d; ++k) y(i, k) = ys[r][static_cast<std::size_t>(k)];
  }
  return MixedDataset(std::move(frozen), std::move(x), std::move(u), std::move(y));
}

MixedDataset load_csv(const std::filesystem::path& path, const std::vector<ColumnSchema>& schema,
                      VocabularyPolicy policy) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_csv(buf.str(), schema, policy);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string to_csv(const MixedDataset& ds) {
  std::ostringstream out;
  out << std::setprecision(17);
  const auto& schema = ds.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) out << (c ? "," : "") << schema[c].name;
  out << '\n';
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    Eigen::Index s = 0, t = 0, k = 0;
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (c) out << ',';
      const auto& col = schema[c];
      switch (col.kind) {
        case ColumnKind::continuous: out << ds.x()(i, s++); break;
        case ColumnKind::categorical: out << (*col.levels)[static_cast<std::size_t>(ds.u()(i, t++))]; break;
        case ColumnKind::output:
          if (col.is_class_output())
            out << (*col.levels)[static_cast<std::size_t>(ds.y()(i, k++))];
          else
            out << ds.y()(i, k++);
          break;
      }
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {
std::pair<double, double> mean_and_sample_sd(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  if (v.size() < 2) return {mean, 0.0};
  const double ss = (v.array() - mean).square().sum();
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}
}  // namespace

Standardized standardize(const MixedDataset& ds) {
  Standardizer st;
  const auto p = ds.n_continuous(), d = ds.n_outputs();
  st.x_mean.resize(p);
  st.x_sd.resize(p);
  st.y_mean.resize(d);
  st.y_sd.resize(d);
  for (Eigen::Index s = 0; s < p; ++s) {
    auto [m, sd] = mean_and_sample_sd(ds.x().col(s));
    if (!(sd > 0.0))
      throw DataError("column '" + ds.continuous_column(s).name + "' has zero variance");
    st.x_mean(s) = m;
    st.x_sd(s) = sd;
  }
  for (Eigen::Index k = 0; k < d; ++k) {
    if (ds.output_column(k).is_class_output()) {
      st.y_mean(k) = 0.0;
      st.y_sd(k) = 1.0;
      continue;
    }
    auto [m, sd] = mean_and_sample_sd(ds.y().col(k));
    if (!(sd > 0.0))
      throw DataError("output '" + ds.output_column(k).name + "' has zero variance");
    st.y_mean(k) = m;
    st.y_sd(k) = sd;
  }
  return {st.apply(ds), st};
}

MixedDataset Standardizer::apply(const MixedDataset& ds) const {
  Eigen::MatrixXd x = ds.x(), y = ds.y();
  for (Eigen::Index s = 0; s < x.cols(); ++s)
    x.col(s) = (x.col(s).array() - x_mean(s)) / x_sd(s);
  for (Eigen::Index k = 0; k < y.cols(); ++k)
    y.col(k) = (y.col(k).array() - y_mean(k)) / y_sd(k);
  return ds.with_values(std::move(x), std::move(y));
}

MixedDataset Standardizer::invert(const MixedDataset& ds) const {
  Eigen::MatrixXd x = ds.x(), y = ds.y();
  for (Eigen::Index s = 0; s < x.cols(); ++s) x.col(s) = x.col(s).array() * x_sd(s) + x_mean(s);
  for (Eigen::Index k = 0; k < y.cols(); ++k) y.col(k) = y.col(k).array() * y_sd(k) + y_mean(k);
  return ds.with_values(std::move(x), std::move(y));
}

namespace {
std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

nlohmann::json Standardizer::to_json() const {
  return {{"x_mean", to_vec(x_mean)}, {"x_sd", to_vec(x_sd)},
          {"y_mean", to_vec(y_mean)}, {"y_sd", to_vec(y_sd)}};
}

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  Standardizer st;
  st.x_mean = from_vec(j.at("x_mean").get<std::vector<double>>());
  st.x_sd = from_vec(j.at("x_sd").get<std::vector<double>>());
  st.y_mean = from_vec(j.at("y_mean").get<std::vector<double>>());
  st.y_sd = from_vec(j.at("y_sd").get<std::vector<double>>());
  return st;
}

// ---------------------------------------------------------------------------

namespace {
// Name of the first (column, level) that occurs in the data but not in `rows`.
std::optional<std::string> missing_level(const MixedDataset& ds,
                                         const std::vector<Eigen::Index>& rows) {
  for (Eigen::Index t = 0; t < ds.n_categorical(); ++t) {
    const auto L = ds.levels(t).size();
    std::vector<bool> in_data(L, false), in_rows(L, false);
    for (Eigen::Index i = 0; i < ds.rows(); ++i) in_data[static_cast<std::size_t>(ds.u()(i, t))] = true;
    for (auto r : rows) in_rows[static_cast<std::size_t>(ds.u()(r, t))] = true;
    for (std::size_t l = 0; l < L; ++l)
      if (in_data[l] && !in_rows[l])
        return "level '" + ds.levels(t)[l] + "' of column '" + ds.categorical_column(t).name + "'";
  }
  return std::nullopt;
}
}  // namespace

SplitResult split(const MixedDataset& ds, double test_fraction, std::uint64_t seed,
                  SplitPolicy policy) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test fraction must lie in (0, 1)");
  const auto n = ds.rows();
  auto n_test = static_cast<Eigen::Index>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<Eigen::Index>(n_test, 1, n - 1);
  if (n < 2) throw DataError("cannot split a dataset with fewer than two rows");

  constexpr int kMaxAttempts = 1000;
  const int attempts = policy == SplitPolicy::strict ? 1 : kMaxAttempts;
  for (int a = 0; a < attempts; ++a) {
    Engine eng(a == 0 ? seed : derive_seed(seed, static_cast<std::uint64_t>(a)));
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    shuffle(std::span<Eigen::Index>(perm), eng);
    std::vector<Eigen::Index> test(perm.begin(), perm.begin() + n_test);
    std::vector<Eigen::Index> train(perm.begin() + n_test, perm.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    const auto missing = missing_level(ds, train);
    if (!missing) {
      auto tr = ds.subset(train);
      auto te = ds.subset(test);
      return {std::move(tr), std::move(te), std::move(train), std::move(test)};
    }
    if (policy == SplitPolicy::strict) throw DataError(*missing + " is absent from the training split");
  }
  throw DataError("no split with every level in the training part after " +
                  std::to_string(kMaxAttempts) + " attempts");
}

}  // namespace dencgp
