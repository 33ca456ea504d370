#pragma once

#include "hfdr/data.hpp"

#include <memory>
#include <variant>

namespace hfdr {

// Everything a selector may look at. Regression selectors work on the
// standardized design Z through its Gram matrix and Z^T y; the design itself
// and the response are carried along for selectors that need them.
struct RegressionProblem {
  Index n = 0;
  std::shared_ptr<const Matrix> gram;  // Z^T Z
  Vector xty;                          // Z^T y (centered y when the dataset has an intercept)
  double yty = 0.0;
  std::shared_ptr<const Matrix> design;        // Z
  std::shared_ptr<const Vector> response;      // y as used in xty
  std::shared_ptr<const Vector> raw_response;  // y before centering (class labels for logistic)

  Index d() const { return xty.size(); }
};

// Second-moment matrix X^T X / n of a mean-zero sample.
struct GraphicalProblem {
  Index n = 0;
  std::shared_ptr<const Matrix> cov;

  Index d() const { return cov->rows(); }
};

struct PValueProblem {
  Vector pvalues;
};

using Problem = std::variant<RegressionProblem, GraphicalProblem, PValueProblem>;

// What a selector reads beyond the sufficient statistics. Resamplers only
// materialize the expensive pieces when asked.
struct ProblemNeeds {
  bool design = false;
  bool response = false;
};

RegressionProblem make_regression_problem(const Dataset& data);
GraphicalProblem make_graphical_problem(const Dataset& data);
Problem make_problem(const Dataset& data);

template <typename T>
const T& problem_as(const Problem& p, const char* who) {
  if (const T* q = std::get_if<T>(&p)) return *q;
  throw InvalidArgument(std::string(who) + ": incompatible problem type");
}

}  // namespace hfdr
