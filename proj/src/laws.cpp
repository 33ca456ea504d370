#include "hfdr/laws.hpp"

#include "hfdr/special.hpp"
#include "parallel.hpp"

#include <limits>

namespace hfdr {

double phi_canonical(double p, double zeta) {
  if (!(zeta > 0.0 && zeta < 1.0)) throw InvalidArgument("zeta must lie in (0, 1)");
  return p > zeta ? 1.0 / (1.0 - zeta) : 0.0;
}

// ---------------------------------------------------------------------------

double LinearGeometry::observed_t() const {
  if (rss <= 0.0) return u == 0.0 ? 0.0 : (u > 0 ? 1.0 : -1.0) * std::numeric_limits<double>::infinity();
  return u * std::sqrt(dof) / std::sqrt(rss);
}

double LinearGeometry::pvalue() const { return t_pvalue_two_sided(observed_t(), dof); }

double LinearGeometry::v_from_t(double t) const {
  if (std::isinf(t)) return t > 0 ? r() : -r();
  return r() * t / std::sqrt(dof + t * t);
}

double LinearGeometry::t_from_v(double v) const {
  const double rr = r();
  const double a = std::abs(v);
  if (a >= rr) return v > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  return v * std::sqrt(dof) / std::sqrt((rr - a) * (rr + a));
}

namespace {

Index dependent_column(const Matrix& design) {
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  const Index rank = qr.rank();
  if (rank >= design.cols()) return -1;
  return qr.colsPermutation().indices()(rank);
}

[[noreturn]] void throw_rank(const Matrix& design, const char* what) {
  Index col = dependent_column(design);
  if (col < 0) col = 0;
  throw RankDeficiency(std::string(what) + ": column " + std::to_string(col + 1) +
                           " is linearly dependent on the others",
                       col);
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear model

std::shared_ptr<const LinearContext> make_linear_context(const Dataset& data) {
  if (data.setting() != Setting::gaussian_linear && data.setting() != Setting::model_x)
    throw InvalidArgument("linear law needs a regression dataset");
  if (data.residual_dof() <= 0) throw DataError("t-test needs more observations than variables");
  auto ctx = std::make_shared<LinearContext>();
  ctx->observed = make_regression_problem(data);
  const Matrix& z = *ctx->observed.design;
  if (dependent_column(z) >= 0) throw_rank(z, "design");
  Eigen::LLT<Matrix> llt(*ctx->observed.gram);
  if (llt.info() != Eigen::Success) throw_rank(z, "design");
  ctx->gram_inv = llt.solve(Matrix::Identity(data.d(), data.d()));
  ctx->beta = ctx->gram_inv * ctx->observed.xty;
  ctx->residual = *ctx->observed.response - z * ctx->beta;
  ctx->rss = ctx->residual.squaredNorm();
  ctx->dof = static_cast<double>(data.residual_dof());
  ctx->intercept = data.intercept();
  if (ctx->rss < 1e-28 * ctx->observed.yty) ctx->rss = 0.0;
  return ctx;
}

LinearLaw::LinearLaw(std::shared_ptr<const LinearContext> ctx, Index j)
    : ConditionalLaw(j, HypothesisId{j, -1}), ctx_(std::move(ctx)) {
  const LinearContext& c = *ctx_;
  geometry_.scale = 1.0 / std::sqrt(c.gram_inv(j, j));
  geometry_.u = c.beta(j) * geometry_.scale;
  geometry_.base = c.observed.xty(j) - geometry_.u * geometry_.scale;
  geometry_.rss = c.rss;
  geometry_.dof = c.dof;
}

RegressionProblem LinearLaw::at_t(double t) const {
  RegressionProblem p = ctx_->observed;
  p.xty(index()) = geometry_.coordinate(geometry_.v_from_t(t));
  p.response.reset();
  p.raw_response.reset();
  return p;
}

RegressionProblem LinearLaw::materialize(double t, Rng& rng) const {
  const LinearContext& c = *ctx_;
  const Index j = index();
  const Matrix& z = *c.observed.design;
  const double v = geometry_.v_from_t(t);
  const double rr = geometry_.r();

  const Vector e_tilde = z * c.gram_inv.col(j) * geometry_.scale;
  std::normal_distribution<double> normal;
  Vector g(z.rows());
  for (Index i = 0; i < g.size(); ++i) g(i) = normal(rng);
  if (c.intercept) g.array() -= g.mean();
  g -= z * (c.gram_inv * (z.transpose() * g));
  const double gn = g.norm();
  if (gn > 0) g /= gn;

  const Vector& y = *c.observed.response;
  Vector y_new = y - c.residual + (v - geometry_.u) * e_tilde + std::sqrt(std::max(rr * rr - v * v, 0.0)) * g;
  RegressionProblem p = c.observed;
  p.xty = z.transpose() * y_new;
  p.yty = y_new.squaredNorm();
  const double center = (*c.observed.raw_response)(0) - y(0);
  p.raw_response = std::make_shared<Vector>(y_new.array() + center);
  p.response = std::make_shared<Vector>(std::move(y_new));
  return p;
}

Problem LinearLaw::resample(Rng& rng, const ProblemNeeds& needs) const {
  std::student_t_distribution<double> tdist(geometry_.dof);
  const double t = tdist(rng);
  if (needs.response) return materialize(t, rng);
  return at_t(t);
}

double t_pvalue_linear(const Dataset& data, Index j) {
  if (data.setting() != Setting::gaussian_linear) throw InvalidArgument("t_pvalue_linear: gaussian_linear only");
  if (j < 0 || j >= data.d()) throw InvalidArgument("t_pvalue_linear: index out of range");
  return LinearLaw(make_linear_context(data), j).pvalue();
}

// ---------------------------------------------------------------------------
// Model-X

void CovariateLaw::resample_block(const std::vector<Index>& cols, Matrix& x, Rng& rng) const {
  const int sweeps = cols.size() > 1 ? 25 : 1;
  for (int s = 0; s < sweeps; ++s)
    for (Index j : cols) x.col(j) = sample_column(j, x, rng);
}

void GaussianCovariateLaw::resample_block(const std::vector<Index>& cols, Matrix& x, Rng& rng) const {
  if (cols.empty()) return;
  const Index d = mean_.size();
  if (x.cols() != d) throw InvalidArgument("gaussian covariate law: dimension mismatch");
  std::vector<char> in_block(static_cast<std::size_t>(d), 0);
  for (Index j : cols) in_block[static_cast<std::size_t>(j)] = 1;
  std::vector<Index> rest;
  for (Index j = 0; j < d; ++j)
    if (!in_block[static_cast<std::size_t>(j)]) rest.push_back(j);

  const Matrix q_hh = precision_(cols, cols);
  Eigen::LLT<Matrix> llt(q_hh);
  Matrix shift = Matrix::Zero(x.rows(), static_cast<Index>(cols.size()));
  if (!rest.empty()) {
    const Matrix centered = x(Eigen::all, rest).rowwise() - mean_(rest).transpose();
    shift = llt.solve((centered * precision_(rest, cols)).transpose()).transpose();
  }
  std::normal_distribution<double> normal;
  Matrix z(static_cast<Index>(cols.size()), x.rows());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index c = 0; c < z.rows(); ++c) z(c, i) = normal(rng);
  const Matrix noise = llt.matrixU().solve(z).transpose();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto ci = static_cast<Index>(c);
    x.col(cols[c]) = (noise.col(ci) - shift.col(ci)).array() + mean_(cols[c]);
  }
}

GaussianCovariateLaw::GaussianCovariateLaw(Vector mean, const Matrix& covariance) : mean_(std::move(mean)) {
  if (covariance.rows() != covariance.cols() || covariance.rows() != mean_.size())
    throw InvalidArgument("gaussian covariate law: mean and covariance sizes differ");
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) throw InvalidArgument("gaussian covariate law: covariance is not positive definite");
  precision_ = llt.solve(Matrix::Identity(covariance.rows(), covariance.cols()));
}

std::pair<double, double> GaussianCovariateLaw::conditional(Index j,
                                                             const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  const double qjj = precision_(j, j);
  double s = 0.0;
  for (Index k = 0; k < row.size(); ++k)
    if (k != j) s += precision_(k, j) * (row(k) - mean_(k));
  return {mean_(j) - s / qjj, 1.0 / qjj};
}

Vector GaussianCovariateLaw::sample_column(Index j, const Matrix& x, Rng& rng) const {
  if (x.cols() != mean_.size()) throw InvalidArgument("gaussian covariate law: dimension mismatch");
  const double qjj = precision_(j, j);
  const Vector centered_dot = (x.rowwise() - mean_.transpose()) * precision_.col(j);
  const Vector own = (x.col(j).array() - mean_(j)) * qjj;
  const double sd = std::sqrt(1.0 / qjj);
  std::normal_distribution<double> normal;
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = mean_(j) - (centered_dot(i) - own(i)) / qjj + sd * normal(rng);
  return out;
}

Ar1CovariateLaw::Ar1CovariateLaw(double rho, double mean, double variance)
    : rho_(rho), mean_(mean), variance_(variance) {
  if (!(std::abs(rho) < 1.0)) throw InvalidArgument("ar1 covariate law: |rho| must be below 1");
  if (!(variance > 0.0)) throw InvalidArgument("ar1 covariate law: variance must be positive");
}

std::pair<double, double> Ar1CovariateLaw::conditional(Index j, const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  const Index d = row.size();
  const bool left = j > 0;
  const bool right = j + 1 < d;
  if (left && right)
    return {mean_ + rho_ * (row(j - 1) + row(j + 1) - 2.0 * mean_) / (1.0 + rho_ * rho_),
            variance_ * (1.0 - rho_ * rho_) / (1.0 + rho_ * rho_)};
  if (left) return {mean_ + rho_ * (row(j - 1) - mean_), variance_ * (1.0 - rho_ * rho_)};
  if (right) return {mean_ + rho_ * (row(j + 1) - mean_), variance_ * (1.0 - rho_ * rho_)};
  return {mean_, variance_};
}

Matrix Ar1CovariateLaw::covariance(Index d) const {
  Matrix cov(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index k = 0; k < d; ++k) cov(i, k) = variance_ * std::pow(rho_, static_cast<double>(std::abs(i - k)));
  return cov;
}

void Ar1CovariateLaw::resample_block(const std::vector<Index>& cols, Matrix& x, Rng& rng) const {
  GaussianCovariateLaw(Vector::Constant(x.cols(), mean_), covariance(x.cols())).resample_block(cols, x, rng);
}

Vector Ar1CovariateLaw::sample_column(Index j, const Matrix& x, Rng& rng) const {
  std::normal_distribution<double> normal;
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const auto [m, v] = conditional(j, x.row(i));
    out(i) = m + std::sqrt(v) * normal(rng);
  }
  return out;
}

BernoulliCovariateLaw::BernoulliCovariateLaw(Vector pi) : pi_(std::move(pi)) {
  for (Index j = 0; j < pi_.size(); ++j)
    if (!(pi_(j) >= 0.0 && pi_(j) <= 1.0)) throw InvalidArgument("bernoulli covariate law: pi must lie in [0, 1]");
}

Vector BernoulliCovariateLaw::sample_column(Index j, const Matrix& x, Rng& rng) const {
  const double p = pi_.size() == 1 ? pi_(0) : pi_(j);
  std::bernoulli_distribution coin(p);
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = coin(rng) ? 1.0 : 0.0;
  return out;
}

void BernoulliCovariateLaw::resample_block(const std::vector<Index>& cols, Matrix& x, Rng& rng) const {
  for (Index j : cols) x.col(j) = sample_column(j, x, rng);
}

double crt_pvalue(const Matrix& x, const Vector& y, Index j, const CovariateLaw& law, Index samples, Rng& rng) {
  if (samples < 19) throw InvalidArgument("crt_pvalue: at least 19 resamples are required");
  const Vector yc = y.array() - y.mean();
  const double denom = static_cast<double>(std::max<Index>(x.rows() - 1, 1));
  const double t_obs = std::abs(x.col(j).dot(yc) / denom);
  Index exceed = 0;
  for (Index b = 0; b < samples; ++b) {
    const Vector xb = law.sample_column(j, x, rng);
    if (std::abs(xb.dot(yc) / denom) >= t_obs) ++exceed;
  }
  return static_cast<double>(1 + exceed) / static_cast<double>(samples + 1);
}

ModelXLaw::ModelXLaw(std::shared_ptr<const ModelXContext> ctx, Index j, Index crt_samples, std::uint64_t seed)
    : ConditionalLaw(j, HypothesisId{j, -1}), ctx_(std::move(ctx)) {
  Rng rng = make_rng(seed, Stream::crt, j);
  pvalue_ = crt_pvalue(ctx_->x, ctx_->y, j, *ctx_->law, crt_samples, rng);
}

Problem ModelXLaw::resample(Rng& rng, const ProblemNeeds& needs) const {
  const ModelXContext& c = *ctx_;
  const Index j = index();
  const Matrix& z = *c.observed.design;
  Vector col = c.law->sample_column(j, c.x, rng);
  if (c.intercept) col.array() -= col.mean();
  const double norm = col.norm();
  if (norm > 0.0) {
    col /= norm;
  } else {
    col.setZero();
  }

  RegressionProblem p = c.observed;
  Vector gz = z.transpose() * col;
  gz(j) = col.squaredNorm();
  auto gram = std::make_shared<Matrix>(*c.observed.gram);
  gram->col(j) = gz;
  gram->row(j) = gz.transpose();
  p.gram = std::move(gram);
  p.xty(j) = col.dot(*c.observed.response);
  if (needs.design) {
    auto design = std::make_shared<Matrix>(z);
    design->col(j) = col;
    p.design = std::move(design);
  } else {
    p.design.reset();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Graphical model

std::shared_ptr<const GraphicalContext> make_graphical_context(const Dataset& data) {
  if (data.setting() != Setting::gaussian_graphical) throw InvalidArgument("graphical law needs a graphical dataset");
  if (data.n() <= data.d()) throw DataError("graphical t-tests need n > d");
  auto ctx = std::make_shared<GraphicalContext>();
  ctx->observed = make_graphical_problem(data);
  if (dependent_column(data.x()) >= 0) throw_rank(data.x(), "sample matrix");
  const Matrix xtx = *ctx->observed.cov * static_cast<double>(data.n());
  Eigen::LLT<Matrix> llt(xtx);
  if (llt.info() != Eigen::Success) throw_rank(data.x(), "sample matrix");
  ctx->gram_inv = llt.solve(Matrix::Identity(data.d(), data.d()));
  return ctx;
}

GraphicalLaw::GraphicalLaw(std::shared_ptr<const GraphicalContext> ctx, Index h)
    : ConditionalLaw(h, pair_from_index(h, ctx->observed.d())), ctx_(std::move(ctx)) {
  const Matrix& w = ctx_->gram_inv;
  const Index j = hypothesis().j;
  const Index k = hypothesis().k;
  const double n = static_cast<double>(ctx_->observed.n);
  const double wkk = w(k, k);
  const double coef = -w(j, k) / wkk;
  const double gjj = w(j, j) - w(j, k) * w(j, k) / wkk;
  geometry_.scale = 1.0 / std::sqrt(gjj);
  geometry_.u = coef * geometry_.scale;
  geometry_.base = n * (*ctx_->observed.cov)(j, k) - geometry_.u * geometry_.scale;
  geometry_.rss = 1.0 / wkk;
  geometry_.dof = static_cast<double>(ctx_->observed.n - (ctx_->observed.d() - 1));
}

GraphicalProblem GraphicalLaw::at_t(double t) const {
  GraphicalProblem p = ctx_->observed;
  auto cov = std::make_shared<Matrix>(*p.cov);
  const double value = geometry_.coordinate(geometry_.v_from_t(t)) / static_cast<double>(p.n);
  (*cov)(hypothesis().j, hypothesis().k) = value;
  (*cov)(hypothesis().k, hypothesis().j) = value;
  p.cov = std::move(cov);
  return p;
}

Problem GraphicalLaw::resample(Rng& rng, const ProblemNeeds&) const {
  std::student_t_distribution<double> tdist(geometry_.dof);
  return at_t(tdist(rng));
}

// ---------------------------------------------------------------------------

IndependentPValueLaw::IndependentPValueLaw(std::shared_ptr<const PValueProblem> observed, Index j)
    : ConditionalLaw(j, HypothesisId{j, -1}), observed_(std::move(observed)) {}

double IndependentPValueLaw::pvalue() const { return observed_->pvalues(index()); }

Problem IndependentPValueLaw::resample(Rng& rng, const ProblemNeeds&) const {
  PValueProblem p = *observed_;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  p.pvalues(index()) = unif(rng);
  return p;
}

DegenerateLaw::DegenerateLaw(std::shared_ptr<const Problem> observed, Index index, HypothesisId id, double pvalue)
    : ConditionalLaw(index, id), observed_(std::move(observed)), pvalue_(pvalue) {}

// ---------------------------------------------------------------------------

Vector LawSet::pvalues() const {
  Vector p(size());
  for (Index h = 0; h < size(); ++h) p(h) = (*this)[h].pvalue();
  return p;
}

LawSet make_laws(const Dataset& data, const LawOptions& options) {
  if (options.degenerate) return make_degenerate_laws(data);
  std::vector<std::unique_ptr<ConditionalLaw>> laws(static_cast<std::size_t>(data.num_hypotheses()));
  switch (data.setting()) {
    case Setting::gaussian_linear: {
      auto ctx = make_linear_context(data);
      for (Index j = 0; j < data.d(); ++j) laws[static_cast<std::size_t>(j)] = std::make_unique<LinearLaw>(ctx, j);
      return LawSet(ctx->observed, std::move(laws));
    }
    case Setting::model_x: {
      if (!options.covariate_law) throw InvalidArgument("model-X setting needs a declared covariate law");
      auto ctx = std::make_shared<ModelXContext>();
      ctx->observed = make_regression_problem(data);
      ctx->x = data.x();
      ctx->y = data.y();
      ctx->intercept = data.intercept();
      ctx->law = options.covariate_law;
      std::shared_ptr<const ModelXContext> shared = ctx;
      detail::parallel_for(data.d(), 0, [&](Index j) {
        laws[static_cast<std::size_t>(j)] = std::make_unique<ModelXLaw>(shared, j, options.crt_samples, options.seed);
      });
      return LawSet(shared->observed, std::move(laws));
    }
    case Setting::gaussian_graphical: {
      auto ctx = make_graphical_context(data);
      for (Index h = 0; h < data.num_hypotheses(); ++h)
        laws[static_cast<std::size_t>(h)] = std::make_unique<GraphicalLaw>(ctx, h);
      return LawSet(ctx->observed, std::move(laws));
    }
  }
  throw InvalidArgument("unknown setting");
}

LawSet make_pvalue_laws(const Vector& pvalues) {
  for (Index j = 0; j < pvalues.size(); ++j)
    if (!(pvalues(j) >= 0.0 && pvalues(j) <= 1.0)) throw InvalidArgument("p-values must lie in [0, 1]");
  auto observed = std::make_shared<const PValueProblem>(PValueProblem{pvalues});
  std::vector<std::unique_ptr<ConditionalLaw>> laws;
  for (Index j = 0; j < pvalues.size(); ++j) laws.push_back(std::make_unique<IndependentPValueLaw>(observed, j));
  return LawSet(*observed, std::move(laws));
}

LawSet make_degenerate_laws(const Dataset& data) {
  auto observed = std::make_shared<const Problem>(make_problem(data));
  Vector p = Vector::Ones(data.num_hypotheses());
  if (data.setting() != Setting::model_x) {
    try {
      p = make_laws(data).pvalues();
    } catch (const Error&) {
    }
  }
  std::vector<std::unique_ptr<ConditionalLaw>> laws;
  for (Index h = 0; h < data.num_hypotheses(); ++h)
    laws.push_back(std::make_unique<DegenerateLaw>(observed, h, data.hypothesis(h), p(h)));
  return LawSet(*observed, std::move(laws));
}

}  // namespace hfdr
