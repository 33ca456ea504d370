#pragma once

#include "hfdr/problem.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace hfdr {

// 1{p > zeta} / (1 - zeta).
double phi_canonical(double p, double zeta);

// One-dimensional geometry of the conditioned coordinate in a linear model.
// Given the rest of the sufficient statistic, the free coordinate equals
// base + v * scale with v in (-r, r), and v maps one-to-one onto a t statistic
// with `dof` degrees of freedom.
struct LinearGeometry {
  double base = 0.0;
  double scale = 1.0;
  double u = 0.0;    // observed v
  double rss = 0.0;  // residual sum of squares of the full fit
  double dof = 1.0;

  double r() const { return std::sqrt(rss + u * u); }
  double observed_t() const;
  double pvalue() const;
  double v_from_t(double t) const;
  double t_from_v(double v) const;
  double coordinate(double v) const { return base + v * scale; }
  double v_from_coordinate(double g) const { return (g - base) / scale; }
};

class ConditionalLaw {
 public:
  ConditionalLaw(Index index, HypothesisId id) : index_(index), id_(id) {}
  virtual ~ConditionalLaw() = default;

  Index index() const { return index_; }
  HypothesisId hypothesis() const { return id_; }

  virtual double pvalue() const = 0;
  virtual double phi(double zeta) const { return phi_canonical(pvalue(), zeta); }
  // A draw of the selector input from the law of the data given S_j under H_j.
  virtual Problem resample(Rng& rng, const ProblemNeeds& needs) const = 0;

 private:
  Index index_;
  HypothesisId id_;
};

// ---------------------------------------------------------------------------
// Gaussian linear model: S_j = (X_{-j}^T y, |y|^2).

struct LinearContext {
  RegressionProblem observed;
  Matrix gram_inv;
  Vector beta;     // OLS coefficients on the standardized design
  Vector residual;  // y - Z beta
  double rss = 0.0;
  double dof = 0.0;
  bool intercept = true;
};

class LinearLaw : public ConditionalLaw {
 public:
  LinearLaw(std::shared_ptr<const LinearContext> ctx, Index j);

  double pvalue() const override { return geometry_.pvalue(); }
  Problem resample(Rng& rng, const ProblemNeeds& needs) const override;

  const LinearGeometry& geometry() const { return geometry_; }
  const LinearContext& context() const { return *ctx_; }
  // Sufficient data with the conditioned coordinate set from a t value.
  RegressionProblem at_t(double t) const;
  // Same, plus a full response vector consistent with it; `rng` picks the
  // direction orthogonal to the design.
  RegressionProblem materialize(double t, Rng& rng) const;

 private:
  std::shared_ptr<const LinearContext> ctx_;
  LinearGeometry geometry_;
};

// ---------------------------------------------------------------------------
// Model-X: S_j = (X_{-j}, y) with a known law of X_j given X_{-j}.

class CovariateLaw {
 public:
  virtual ~CovariateLaw() = default;
  // n fresh draws of column j given the other columns of x (raw scale).
  virtual Vector sample_column(Index j, const Matrix& x, Rng& rng) const = 0;
  // Redraws the listed columns of x jointly given the remaining ones. The
  // default runs Gibbs sweeps over sample_column.
  virtual void resample_block(const std::vector<Index>& cols, Matrix& x, Rng& rng) const;
  virtual std::string describe() const = 0;
};

class GaussianCovariateLaw : public CovariateLaw {
 public:
  GaussianCovariateLaw(Vector mean, const Matrix& covariance);
  Vector sample_column(Index j, const Matrix& x, Rng& rng) const override;
  void resample_block(const std::vector<Index>& cols, Matrix& x, Rng& rng) const override;
  std::string describe() const override { return "gaussian"; }
  // Conditional mean and variance of X_j given the rest of one row.
  std::pair<double, double> conditional(Index j, const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

 private:
  Vector mean_;
  Matrix precision_;
};

class Ar1CovariateLaw : public CovariateLaw {
 public:
  Ar1CovariateLaw(double rho, double mean = 0.0, double variance = 1.0);
  Vector sample_column(Index j, const Matrix& x, Rng& rng) const override;
  void resample_block(const std::vector<Index>& cols, Matrix& x, Rng& rng) const override;
  std::string describe() const override { return "ar1"; }
  Matrix covariance(Index d) const;
  std::pair<double, double> conditional(Index j, const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

 private:
  double rho_, mean_, variance_;
};

class BernoulliCovariateLaw : public CovariateLaw {
 public:
  explicit BernoulliCovariateLaw(Vector pi);
  Vector sample_column(Index j, const Matrix& x, Rng& rng) const override;
  void resample_block(const std::vector<Index>& cols, Matrix& x, Rng& rng) const override;
  std::string describe() const override { return "bernoulli"; }

 private:
  Vector pi_;
};

class CallbackCovariateLaw : public CovariateLaw {
 public:
  using Function = std::function<Vector(Index, const Matrix&, Rng&)>;
  explicit CallbackCovariateLaw(Function f) : f_(std::move(f)) {}
  Vector sample_column(Index j, const Matrix& x, Rng& rng) const override { return f_(j, x, rng); }
  std::string describe() const override { return "callback"; }

 private:
  Function f_;
};

struct ModelXContext {
  RegressionProblem observed;
  Matrix x;  // raw covariates
  Vector y;  // raw response
  bool intercept = true;
  std::shared_ptr<const CovariateLaw> law;
};

class ModelXLaw : public ConditionalLaw {
 public:
  ModelXLaw(std::shared_ptr<const ModelXContext> ctx, Index j, Index crt_samples, std::uint64_t seed);

  double pvalue() const override { return pvalue_; }
  Problem resample(Rng& rng, const ProblemNeeds& needs) const override;

 private:
  std::shared_ptr<const ModelXContext> ctx_;
  double pvalue_ = 1.0;
};

// Two-sided CRT with the marginal covariance statistic and the add-one correction.
double crt_pvalue(const Matrix& x, const Vector& y, Index j, const CovariateLaw& law, Index samples, Rng& rng);

// ---------------------------------------------------------------------------
// Gaussian graphical model: S_jk = (X_{-k}^T X_{-k}, X_{-{j,k}}^T X_k, |X_k|^2).

struct GraphicalContext {
  GraphicalProblem observed;
  Matrix gram_inv;  // (X^T X)^-1
};

class GraphicalLaw : public ConditionalLaw {
 public:
  GraphicalLaw(std::shared_ptr<const GraphicalContext> ctx, Index h);

  double pvalue() const override { return geometry_.pvalue(); }
  Problem resample(Rng& rng, const ProblemNeeds& needs) const override;

  const LinearGeometry& geometry() const { return geometry_; }
  GraphicalProblem at_t(double t) const;

 private:
  std::shared_ptr<const GraphicalContext> ctx_;
  LinearGeometry geometry_;
};

// ---------------------------------------------------------------------------
// Independent p-values: p_j ~ U(0, 1) under H_j, S_j = p_{-j}.

class IndependentPValueLaw : public ConditionalLaw {
 public:
  IndependentPValueLaw(std::shared_ptr<const PValueProblem> observed, Index j);
  double pvalue() const override;
  Problem resample(Rng& rng, const ProblemNeeds& needs) const override;
  const PValueProblem& observed() const { return *observed_; }

 private:
  std::shared_ptr<const PValueProblem> observed_;
};

// Conditioning on the full data: phi is identically one and every resample
// returns the observed data. Used to check the estimator plumbing.
class DegenerateLaw : public ConditionalLaw {
 public:
  DegenerateLaw(std::shared_ptr<const Problem> observed, Index index, HypothesisId id, double pvalue);
  double pvalue() const override { return pvalue_; }
  double phi(double) const override { return 1.0; }
  Problem resample(Rng&, const ProblemNeeds&) const override { return *observed_; }

 private:
  std::shared_ptr<const Problem> observed_;
  double pvalue_;
};

// ---------------------------------------------------------------------------

struct LawOptions {
  std::shared_ptr<const CovariateLaw> covariate_law;  // required in the model-X setting
  Index crt_samples = 199;
  std::uint64_t seed = 0;
  bool degenerate = false;
};

class LawSet {
 public:
  LawSet() = default;
  LawSet(Problem observed, std::vector<std::unique_ptr<ConditionalLaw>> laws)
      : observed_(std::move(observed)), laws_(std::move(laws)) {}

  const Problem& observed() const { return observed_; }
  Index size() const { return static_cast<Index>(laws_.size()); }
  const ConditionalLaw& operator[](Index h) const { return *laws_[static_cast<std::size_t>(h)]; }
  Vector pvalues() const;

 private:
  Problem observed_;
  std::vector<std::unique_ptr<ConditionalLaw>> laws_;
};

LawSet make_laws(const Dataset& data, const LawOptions& options = {});
LawSet make_pvalue_laws(const Vector& pvalues);
LawSet make_degenerate_laws(const Dataset& data);

std::shared_ptr<const LinearContext> make_linear_context(const Dataset& data);
std::shared_ptr<const GraphicalContext> make_graphical_context(const Dataset& data);

// OLS t-test p-value for variable j of a gaussian_linear dataset.
double t_pvalue_linear(const Dataset& data, Index j);

}  // namespace hfdr
