#include "hfdr/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace hfdr {

std::string to_string(Setting s) {
  switch (s) {
    case Setting::gaussian_linear: return "gaussian_linear";
    case Setting::model_x: return "model_x";
    case Setting::gaussian_graphical: return "gaussian_graphical";
  }
  return "unknown";
}

Setting parse_setting(std::string_view s) {
  if (s == "gaussian_linear" || s == "linear") return Setting::gaussian_linear;
  if (s == "model_x" || s == "modelx") return Setting::model_x;
  if (s == "gaussian_graphical" || s == "graphical") return Setting::gaussian_graphical;
  throw InvalidArgument("unknown setting '" + std::string(s) + "'");
}

std::string HypothesisId::label() const {
  if (is_pair()) return "(" + std::to_string(j + 1) + "," + std::to_string(k + 1) + ")";
  return std::to_string(j + 1);
}

Index pair_count(Index d) { return d * (d - 1) / 2; }

Index pair_index(Index j, Index k, Index d) {
  if (j > k) std::swap(j, k);
  if (j == k || j < 0 || k >= d) throw InvalidArgument("pair_index: invalid pair");
  return j * (2 * d - j - 1) / 2 + (k - j - 1);
}

HypothesisId pair_from_index(Index h, Index d) {
  Index j = 0;
  Index row = d - 1;
  while (h >= row) {
    h -= row;
    ++j;
    --row;
  }
  return {j, j + 1 + h};
}

SelectionSet::SelectionSet(std::vector<Index> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

bool SelectionSet::contains(Index i) const {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

SelectionSet complement(const SelectionSet& s, Index universe) {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(std::max<Index>(0, universe - s.size())));
  for (Index i = 0; i < universe; ++i)
    if (!s.contains(i)) out.push_back(i);
  return SelectionSet(std::move(out));
}

Index intersection_size(const SelectionSet& a, const SelectionSet& b) {
  Index count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

double fdp(const SelectionSet& sel, const SelectionSet& h0) {
  if (sel.empty()) return 0.0;
  return static_cast<double>(intersection_size(sel, h0)) / static_cast<double>(sel.size());
}

double fpr(const SelectionSet& sel, const ScenarioTruth& truth) {
  if (truth.signal_set.empty()) throw InvalidArgument("fpr: signal set is empty");
  return 1.0 - static_cast<double>(intersection_size(sel, truth.signal_set)) /
                   static_cast<double>(truth.signal_set.size());
}

namespace {

void check_finite(const Matrix& x, const char* what) {
  if (!x.allFinite()) throw DataError(std::string(what) + " contains non-finite entries");
}

}  // namespace

Dataset Dataset::regression(Matrix x, Vector y, Setting setting, std::vector<std::string> column_names,
                            bool intercept) {
  if (setting == Setting::gaussian_graphical)
    throw InvalidArgument("Dataset::regression: use Dataset::graphical for the graphical setting");
  if (x.rows() < 1 || x.cols() < 1) throw DataError("dataset needs at least one row and one column");
  if (y.size() != x.rows()) throw DataError("response length does not match the number of rows");
  check_finite(x, "design matrix");
  check_finite(y, "response");
  if (!column_names.empty() && static_cast<Index>(column_names.size()) != x.cols())
    throw DataError("column name count does not match the number of columns");

  Dataset ds;
  ds.setting_ = setting;
  ds.x_ = std::move(x);
  ds.y_ = std::move(y);
  ds.names_ = std::move(column_names);
  ds.intercept_ = intercept;
  if (setting == Setting::gaussian_linear && ds.residual_dof() <= 0)
    throw DataError("gaussian_linear setting requires n > d" + std::string(intercept ? " + 1 (intercept)" : ""));
  ds.standardize();
  return ds;
}

Dataset Dataset::graphical(Matrix x, std::vector<std::string> column_names) {
  if (x.rows() < 1 || x.cols() < 2) throw DataError("graphical dataset needs at least two columns");
  check_finite(x, "sample matrix");
  if (!column_names.empty() && static_cast<Index>(column_names.size()) != x.cols())
    throw DataError("column name count does not match the number of columns");
  Dataset ds;
  ds.setting_ = Setting::gaussian_graphical;
  ds.x_ = std::move(x);
  ds.names_ = std::move(column_names);
  ds.intercept_ = false;
  ds.design_ = ds.x_;
  ds.standardization_.center = Vector::Zero(ds.d());
  ds.standardization_.scale = Vector::Ones(ds.d());
  return ds;
}

void Dataset::standardize() {
  const Index d = this->d();
  standardization_.center = intercept_ ? Vector(x_.colwise().mean().transpose()) : Vector(Vector::Zero(d));
  design_ = x_.rowwise() - standardization_.center.transpose();
  standardization_.scale = design_.colwise().norm().transpose();
  for (Index j = 0; j < d; ++j) {
    const double s = standardization_.scale(j);
    if (!(s > 1e-12 * std::max(1.0, x_.col(j).cwiseAbs().maxCoeff())))
      throw DataError("column " + std::to_string(j + 1) + " is constant and cannot be standardized");
    design_.col(j) /= s;
  }
  standardization_.response_center = intercept_ ? y_->mean() : 0.0;
  response_ = y_->array() - standardization_.response_center;
}

const Vector& Dataset::y() const {
  if (!y_) throw InvalidArgument("dataset has no response");
  return *y_;
}

const Vector& Dataset::response() const {
  if (!y_) throw InvalidArgument("dataset has no response");
  return response_;
}

Index Dataset::num_hypotheses() const {
  return setting_ == Setting::gaussian_graphical ? pair_count(d()) : d();
}

HypothesisId Dataset::hypothesis(Index h) const {
  if (setting_ == Setting::gaussian_graphical) return pair_from_index(h, d());
  return {h, -1};
}

std::string Dataset::hypothesis_label(Index h) const {
  const HypothesisId id = hypothesis(h);
  if (names_.empty()) return id.label();
  if (id.is_pair()) return names_[id.j] + "--" + names_[id.k];
  return names_[id.j];
}

Vector Dataset::to_original_scale(const Vector& standardized_coefficients) const {
  return standardized_coefficients.cwiseQuotient(standardization_.scale);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  out.push_back(cell);
  for (auto& c : out) {
    const auto first = c.find_first_not_of(" \t");
    const auto last = c.find_last_not_of(" \t");
    c = first == std::string::npos ? std::string() : c.substr(first, last - first + 1);
  }
  return out;
}

double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end)
    throw DataError("non-numeric value '" + cell + "' at row " + std::to_string(row) + ", column " +
                    std::to_string(col));
  return value;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (header.empty()) {
      header = std::move(cells);
      continue;
    }
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " fields, header has " + std::to_string(header.size()));
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) values[c] = parse_number(cells[c], line_no, c + 1);
    rows.push_back(std::move(values));
  }
  if (header.empty()) throw DataError("'" + path + "' has no header row");
  if (rows.empty()) throw DataError("'" + path + "' has no data rows");

  std::optional<std::size_t> response_col;
  if (options.setting != Setting::gaussian_graphical) {
    if (!options.response_column) throw InvalidArgument("a response column is required for regression data");
    auto it = std::find(header.begin(), header.end(), *options.response_column);
    if (it == header.end()) throw DataError("response column '" + *options.response_column + "' not found");
    response_col = static_cast<std::size_t>(it - header.begin());
  }

  const Index n = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(header.size()) - (response_col ? 1 : 0);
  Matrix x(n, d);
  Vector y(n);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (!response_col || c != *response_col) names.push_back(header[c]);
  for (Index i = 0; i < n; ++i) {
    Index col = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (response_col && c == *response_col) {
        y(i) = rows[static_cast<std::size_t>(i)][c];
      } else {
        x(i, col++) = rows[static_cast<std::size_t>(i)][c];
      }
    }
  }
  if (options.setting == Setting::gaussian_graphical) return Dataset::graphical(std::move(x), std::move(names));
  return Dataset::regression(std::move(x), std::move(y), options.setting, std::move(names), options.intercept);
}

}  // namespace hfdr
