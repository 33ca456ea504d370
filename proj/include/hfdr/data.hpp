#pragma once

#include "hfdr/core.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hfdr {

enum class Setting { gaussian_linear, model_x, gaussian_graphical };

std::string to_string(Setting s);
Setting parse_setting(std::string_view s);

// A hypothesis is a variable index, or an unordered pair j < k in the
// graphical setting. Indices are 0-based internally and 1-based in every file
// or message a user sees.
struct HypothesisId {
  Index j = 0;
  Index k = -1;

  bool is_pair() const { return k >= 0; }
  std::string label() const;
  friend bool operator==(const HypothesisId&, const HypothesisId&) = default;
};

// Lexicographic enumeration of pairs (0,1), (0,2), ..., (d-2,d-1).
Index pair_count(Index d);
Index pair_index(Index j, Index k, Index d);
HypothesisId pair_from_index(Index h, Index d);

class SelectionSet {
 public:
  SelectionSet() = default;
  explicit SelectionSet(std::vector<Index> indices);

  const std::vector<Index>& indices() const { return indices_; }
  Index size() const { return static_cast<Index>(indices_.size()); }
  bool empty() const { return indices_.empty(); }
  bool contains(Index i) const;
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  friend bool operator==(const SelectionSet&, const SelectionSet&) = default;

 private:
  std::vector<Index> indices_;
};

SelectionSet complement(const SelectionSet& s, Index universe);
Index intersection_size(const SelectionSet& a, const SelectionSet& b);

// Column transform applied at construction. Coefficients fitted on the
// standardized design map back through `to_original_scale`.
struct Standardization {
  Vector center;  // zeros when the dataset has no intercept
  Vector scale;   // column norms after centering
  double response_center = 0.0;
};

class Dataset {
 public:
  static Dataset regression(Matrix x, Vector y, Setting setting,
                            std::vector<std::string> column_names = {}, bool intercept = true);
  static Dataset graphical(Matrix x, std::vector<std::string> column_names = {});

  Setting setting() const { return setting_; }
  Index n() const { return x_.rows(); }
  Index d() const { return x_.cols(); }
  bool intercept() const { return intercept_; }
  bool has_response() const { return y_.has_value(); }

  const Matrix& x() const { return x_; }
  const Vector& y() const;
  const std::vector<std::string>& column_names() const { return names_; }

  // Regression: centered (with intercept) unit-norm columns. Graphical: raw x.
  const Matrix& design() const { return design_; }
  // Regression response, centered when the dataset has an intercept.
  const Vector& response() const;
  const Standardization& standardization() const { return standardization_; }

  Index num_hypotheses() const;
  HypothesisId hypothesis(Index h) const;
  std::string hypothesis_label(Index h) const;

  Vector to_original_scale(const Vector& standardized_coefficients) const;
  // Residual degrees of freedom of the full OLS fit.
  Index residual_dof() const { return n() - d() - (intercept_ ? 1 : 0); }

 private:
  Dataset() = default;
  void standardize();

  Setting setting_ = Setting::gaussian_linear;
  Matrix x_;
  std::optional<Vector> y_;
  std::vector<std::string> names_;
  bool intercept_ = true;
  Matrix design_;
  Vector response_;
  Standardization standardization_;
};

// Ground truth of a simulated dataset.
struct ScenarioTruth {
  SelectionSet signal_set;
  Vector theta;      // regression coefficients (zeros outside signal_set)
  Matrix precision;  // graphical setting only
  double sigma = 1.0;
  Index num_hypotheses = 0;

  SelectionSet null_set() const { return complement(signal_set, num_hypotheses); }
};

// |sel ∩ h0| / |sel| with 0/0 = 0.
double fdp(const SelectionSet& sel, const SelectionSet& h0);
// 1 - |sel ∩ signals| / |signals|; throws InvalidArgument on an empty signal set.
double fpr(const SelectionSet& sel, const ScenarioTruth& truth);

struct CsvOptions {
  std::optional<std::string> response_column;
  Setting setting = Setting::gaussian_linear;
  bool intercept = true;
};

Dataset load_csv(const std::string& path, const CsvOptions& options);

}  // namespace hfdr
