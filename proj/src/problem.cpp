#include "hfdr/problem.hpp"

namespace hfdr {

RegressionProblem make_regression_problem(const Dataset& data) {
  if (!data.has_response()) throw InvalidArgument("regression problem needs a response");
  RegressionProblem p;
  p.n = data.n();
  auto design = std::make_shared<Matrix>(data.design());
  auto gram = std::make_shared<Matrix>(Matrix::Zero(data.d(), data.d()));
  gram->selfadjointView<Eigen::Lower>().rankUpdate(design->transpose());
  gram->triangularView<Eigen::StrictlyUpper>() = gram->transpose();
  p.xty = design->transpose() * data.response();
  p.yty = data.response().squaredNorm();
  p.gram = std::move(gram);
  p.design = std::move(design);
  p.response = std::make_shared<Vector>(data.response());
  p.raw_response = std::make_shared<Vector>(data.y());
  return p;
}

GraphicalProblem make_graphical_problem(const Dataset& data) {
  GraphicalProblem p;
  p.n = data.n();
  auto cov = std::make_shared<Matrix>(Matrix::Zero(data.d(), data.d()));
  cov->selfadjointView<Eigen::Lower>().rankUpdate(data.x().transpose(), 1.0 / static_cast<double>(data.n()));
  cov->triangularView<Eigen::StrictlyUpper>() = cov->transpose();
  p.cov = std::move(cov);
  return p;
}

Problem make_problem(const Dataset& data) {
  if (data.setting() == Setting::gaussian_graphical) return make_graphical_problem(data);
  return make_regression_problem(data);
}

}  // namespace hfdr
