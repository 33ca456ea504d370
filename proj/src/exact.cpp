#include "hfdr/exact.hpp"

#include "hfdr/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hfdr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sgn(double x) { return (x > 0) - (x < 0); }

LassoStart lasso_start_at(const Matrix& gram, const Vector& xty, double lambda, const Vector* warm) {
  SolverOptions tight;
  tight.tol = 1e-13;
  const LassoFit fit = lasso_fit(gram, xty, lambda, tight, warm);
  LassoStart out;
  out.lambda = lambda;
  out.active = fit.active_set.indices();
  const Index m = static_cast<Index>(out.active.size());
  out.sigma.resize(m);
  Matrix a(m, m);
  for (Index p = 0; p < m; ++p) {
    out.sigma(p) = sgn(fit.coefficients(out.active[static_cast<std::size_t>(p)]));
    for (Index q = 0; q < m; ++q) a(p, q) = gram(out.active[static_cast<std::size_t>(p)], out.active[static_cast<std::size_t>(q)]);
  }
  if (m > 0) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) throw DegenerateEvent("homotopy: singular active Gram matrix");
    out.minv = llt.solve(Matrix::Identity(m, m));
  }
  return out;
}

// Active-set state of the Lasso in Gram form at one value of gamma = c_j.
class Homotopy {
 public:
  Homotopy(const Matrix& gram, Vector xty, Index j, double lambda)
      : g_(gram), c_(std::move(xty)), j_(j), lambda_(lambda) {}

  void start(double gamma, const LassoStart* shared) {
    c_(j_) = gamma;
    if (shared) {
      act_ = shared->active;
      sigma_ = shared->sigma;
      minv_ = shared->minv;
    } else {
      const LassoStart fresh = lasso_start_at(g_, c_, lambda_, nullptr);
      act_ = fresh.active;
      sigma_ = fresh.sigma;
      minv_ = fresh.minv;
    }
    reindex();
    fresh_ = false;
    recompute(gamma);
    for (Index q = 0; q < beta_.size(); ++q)
      if (sgn(beta_(q)) != sigma_(q)) throw DegenerateEvent("homotopy: observed fit is not in general position");
    for (Index i = 0; i < g_.rows(); ++i)
      if (!in_active(i) && std::abs(nu_(i)) > lambda_ * (1.0 + 1e-7))
        throw DegenerateEvent("homotopy: observed fit is not in general position");
  }

  double gamma() const { return c_(j_); }
  bool j_active() const { return position(j_) >= 0; }
  const std::vector<Index>& active() const { return act_; }
  Index matvecs() const { return matvecs_; }

  // Distance (in gamma) to the next event along `dir`, with the event kind.
  struct Event {
    double t = kInf;
    double second = kInf;
    Index index = -1;
    bool leaves = false;
  };

  Event next_event(double dir, Index skip_enter, Index skip_leave) {
    Event ev;
    auto offer = [&](double t, Index i, bool leaves) {
      t = std::max(t, 0.0);
      if (t < ev.t) {
        ev.second = ev.t;
        ev.t = t;
        ev.index = i;
        ev.leaves = leaves;
      } else if (t < ev.second) {
        ev.second = t;
      }
    };
    if (!fresh_ || dir != slope_dir_) slopes(dir);
    for (std::size_t q = 0; q < act_.size(); ++q) {
      const Index i = act_[q];
      const double db = dbeta_(static_cast<Index>(q));
      if (i == skip_leave || db == 0.0) continue;
      const double t = -beta_(static_cast<Index>(q)) / db;
      if (t >= -1e-12 * std::abs(beta_(static_cast<Index>(q))) - 1e-15 && sgn(db) != sigma_(static_cast<Index>(q)))
        offer(t, i, true);
    }
    for (Index i = 0; i < g_.rows(); ++i) {
      if (in_active(i)) continue;
      const double dn = dnu_(i);
      // A variable that just left sits on the boundary of its old sign; only the far one counts.
      const double held = i == skip_enter ? sgn(nu_(i)) : 0.0;
      if (dn > 0 && held <= 0) offer((lambda_ - nu_(i)) / dn, i, false);
      if (dn < 0 && held >= 0) offer((-lambda_ - nu_(i)) / dn, i, false);
    }
    return ev;
  }

  // Moves to gamma and applies the event, checking the new slopes. beta and
  // the duals are linear between events, so only the slopes are recomputed.
  void apply(const Event& ev, double gamma, double dir) {
    const double t = std::abs(gamma - c_(j_));
    beta_.noalias() += t * dbeta_;
    nu_.noalias() += t * dnu_;
    c_(j_) = gamma;
    if (ev.leaves) {
      const Index p = pos_[static_cast<std::size_t>(ev.index)];
      const double s = sigma_(p);
      remove(p);
      nu_(ev.index) = s * lambda_;
      slopes(dir);
      if (!(s * dnu_(ev.index) < 0)) throw DegenerateEvent("homotopy: leaving variable does not move inside");
    } else {
      const double s = sgn(nu_(ev.index));
      add(ev.index, s);
      nu_(ev.index) = s * lambda_;
      slopes(dir);
      const Index p = position(ev.index);
      if (!(s * dbeta_(p) > 0)) throw DegenerateEvent("homotopy: entering variable has an inconsistent sign");
    }
    ++events_;
    if (events_ % 16 == 0) {
      if (events_ % 128 == 0) refactor();
      recompute(gamma);
      slopes(dir);
    }
  }

 private:
  Index position(Index i) const { return pos_[static_cast<std::size_t>(i)]; }
  void reindex() {
    pos_.assign(static_cast<std::size_t>(g_.rows()), -1);
    for (std::size_t p = 0; p < act_.size(); ++p) pos_[static_cast<std::size_t>(act_[p])] = static_cast<Index>(p);
  }
  bool in_active(Index i) const { return position(i) >= 0; }

  Matrix active_gram() const {
    const Index m = static_cast<Index>(act_.size());
    Matrix a(m, m);
    for (Index p = 0; p < m; ++p)
      for (Index q = 0; q < m; ++q) a(p, q) = g_(act_[p], act_[q]);
    return a;
  }

  void refactor() {
    const Index m = static_cast<Index>(act_.size());
    if (m == 0) {
      minv_.resize(0, 0);
      return;
    }
    Eigen::LLT<Matrix> llt(active_gram());
    if (llt.info() != Eigen::Success) throw DegenerateEvent("homotopy: singular active Gram matrix");
    minv_ = llt.solve(Matrix::Identity(m, m));
  }

  void recompute(double gamma) {
    c_(j_) = gamma;
    const Index m = static_cast<Index>(act_.size());
    Vector rhs(m);
    for (Index p = 0; p < m; ++p) rhs(p) = c_(act_[p]) - lambda_ * sigma_(p);
    beta_ = minv_ * rhs;
    recompute_duals_at(gamma);
  }

  void recompute_duals_at(double gamma) {
    c_(j_) = gamma;
    nu_ = c_;
    for (std::size_t p = 0; p < act_.size(); ++p) nu_.noalias() -= g_.col(act_[p]) * beta_(static_cast<Index>(p));
    matvecs_ += static_cast<Index>(act_.size());
  }

  void slopes(double dir) {
    const Index m = static_cast<Index>(act_.size());
    const Index pj = position(j_);
    fresh_ = true;
    slope_dir_ = dir;
    dnu_ = Vector::Zero(g_.rows());
    dnu_(j_) = dir;
    if (pj < 0) {
      dbeta_ = Vector::Zero(m);
      return;
    }
    dbeta_ = dir * minv_.col(pj);
    for (Index p = 0; p < m; ++p) dnu_.noalias() -= g_.col(act_[p]) * dbeta_(p);
    matvecs_ += m;
  }

  void add(Index i, double s) {
    const Index m = static_cast<Index>(act_.size());
    Vector b(m);
    for (Index p = 0; p < m; ++p) b(p) = g_(act_[p], i);
    const Vector mb = minv_ * b;
    const double schur = g_(i, i) - b.dot(mb);
    if (!(schur > 1e-12 * g_(i, i))) throw DegenerateEvent("homotopy: singular active Gram matrix");
    Matrix next(m + 1, m + 1);
    next.topLeftCorner(m, m) = minv_ + mb * mb.transpose() / schur;
    next.topRightCorner(m, 1) = -mb / schur;
    next.bottomLeftCorner(1, m) = -mb.transpose() / schur;
    next(m, m) = 1.0 / schur;
    minv_ = std::move(next);
    act_.push_back(i);
    pos_[static_cast<std::size_t>(i)] = m;
    sigma_.conservativeResize(m + 1);
    sigma_(m) = s;
    beta_.conservativeResize(m + 1);
    beta_(m) = 0.0;
  }

  // Drops active position p: swaps it to the end, then a rank-one downdate.
  void remove(Index p) {
    const Index last = static_cast<Index>(act_.size()) - 1;
    if (p != last) {
      minv_.row(p).swap(minv_.row(last));
      minv_.col(p).swap(minv_.col(last));
      std::swap(sigma_(p), sigma_(last));
      std::swap(beta_(p), beta_(last));
      std::swap(act_[static_cast<std::size_t>(p)], act_[static_cast<std::size_t>(last)]);
    }
    const double pivot = minv_(last, last);
    const Vector u = minv_.col(last).head(last);
    Matrix next = minv_.topLeftCorner(last, last);
    next.noalias() -= u * u.transpose() / pivot;
    minv_ = std::move(next);
    sigma_.conservativeResize(last);
    beta_.conservativeResize(last);
    act_.pop_back();
    reindex();
  }

  const Matrix& g_;
  Vector c_;
  Index j_;
  double lambda_;
  std::vector<Index> act_;
  std::vector<Index> pos_;
  bool fresh_ = false;
  double slope_dir_ = 0.0;
  Vector sigma_, beta_, nu_, dbeta_, dnu_;
  Matrix minv_;
  Index matvecs_ = 0;
  Index events_ = 0;
};

struct GammaSegment {
  double from, to;
  std::vector<Index> active;
};

double mass_beyond(const LinearGeometry& geo, double v, double dir) {
  const double t = geo.t_from_v(v);
  return dir > 0 ? t_interval_mass(t, kInf, geo.dof) : t_interval_mass(-kInf, t, geo.dof);
}

std::vector<GammaSegment> sweep(const LinearLaw& law, double lambda, double dir, const ExactOptions& opts,
                                const LassoStart* start, Index& matvecs) {
  const LinearGeometry& geo = law.geometry();
  const RegressionProblem& obs = law.context().observed;
  const Index j = law.index();
  Homotopy path(*obs.gram, obs.xty, j, lambda);
  const double gamma0 = obs.xty(j);
  path.start(gamma0, start);

  const double bound = geo.coordinate(dir * geo.r());
  std::vector<GammaSegment> out;
  Index skip_enter = -1, skip_leave = -1;
  double gamma = gamma0;
  for (Index events = 0;; ++events) {
    if (events > opts.max_events) throw DegenerateEvent("homotopy: event budget exhausted");
    const auto ev = path.next_event(dir, skip_enter, skip_leave);
    const double remaining = std::abs(bound - gamma);
    if (ev.t >= remaining) {
      out.push_back({gamma, bound, path.active()});
      break;
    }
    if (ev.second - ev.t <= opts.event_tol * (1.0 + std::abs(gamma)))
      throw DegenerateEvent("homotopy: two events coincide");
    const double next = gamma + dir * ev.t;
    out.push_back({gamma, next, path.active()});
    if (mass_beyond(geo, geo.v_from_coordinate(next), dir) < opts.tail_mass) break;
    path.apply(ev, next, dir);
    skip_enter = ev.leaves ? ev.index : -1;
    skip_leave = ev.leaves ? -1 : ev.index;
    gamma = next;
  }
  matvecs += path.matvecs();
  return out;
}

}  // namespace

const PathSegment& PiecewiseSelectionPath::segment_at(double v) const {
  const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), v);
  return segments[static_cast<std::size_t>(it - breakpoints.begin())];
}

PiecewiseSelectionPath lasso_homotopy_path(const LinearLaw& law, double lambda, const ExactOptions& opts,
                                           const LassoStart* start) {
  if (!(lambda > 0.0)) throw InvalidArgument("lasso_homotopy_path: lambda must be positive");
  const LinearGeometry& geo = law.geometry();
  PiecewiseSelectionPath out;
  out.j = law.index();
  out.lambda = lambda;
  if (start && start->lambda != lambda) throw InvalidArgument("lasso_homotopy_path: start is for another lambda");
  auto right = sweep(law, lambda, +1.0, opts, start, out.matvecs);
  auto left = sweep(law, lambda, -1.0, opts, start, out.matvecs);

  std::vector<GammaSegment> all;
  for (auto it = left.rbegin(); it != left.rend(); ++it) all.push_back({it->to, it->from, it->active});
  // The first segments on both sides share the observed active set.
  all.back().to = right.front().to;
  for (std::size_t i = 1; i < right.size(); ++i) all.push_back(right[i]);

  for (const auto& s : all) {
    const double lo = geo.v_from_coordinate(s.from);
    const double hi = geo.v_from_coordinate(s.to);
    if (!(hi > lo)) continue;
    PathSegment seg;
    seg.lo = lo;
    seg.hi = hi;
    seg.active = SelectionSet(s.active);
    seg.selected = seg.active.contains(law.index());
    seg.r = seg.active.size();
    if (!out.segments.empty()) {
      if (out.segments.back().active == seg.active) {
        out.segments.back().hi = hi;
        continue;
      }
      out.breakpoints.push_back(lo);
    }
    out.segments.push_back(std::move(seg));
  }
  return out;
}

namespace {

double segment_mass(const PathSegment& s, const LinearGeometry& geo) {
  return t_interval_mass(geo.t_from_v(s.lo), geo.t_from_v(s.hi), geo.dof);
}

}  // namespace

double hfdr_star_lasso_exact(const PiecewiseSelectionPath& path, const LinearLaw& law) {
  double total = 0.0;
  for (const auto& s : path.segments)
    if (s.selected) total += segment_mass(s, law.geometry()) / static_cast<double>(s.r);
  return total;
}

double selection_prob_lasso_exact(const PiecewiseSelectionPath& path, const LinearLaw& law) {
  double total = 0.0;
  for (const auto& s : path.segments)
    if (s.selected) total += segment_mass(s, law.geometry());
  return total;
}

// ---------------------------------------------------------------------------
// Forward stepwise

std::vector<std::vector<VInterval>> fs_selection_regions(const LinearLaw& law, const std::vector<Index>& steps) {
  const RegressionProblem& obs = law.context().observed;
  const LinearGeometry& geo = law.geometry();
  const Matrix& gram = *obs.gram;
  const Index d = obs.d();
  const Index j = law.index();
  Index kmax = 0;
  for (Index k : steps) {
    if (k < 0) throw InvalidArgument("fs_selection_regions: k must be non-negative");
    kmax = std::max(kmax, k);
  }

  // Auxiliary run that never picks j. With c_j = 0 the residualized c_j is
  // the offset b so that j's residual correlation at gamma is gamma + b.
  Matrix rg = gram;
  Vector rc = obs.xty;
  rc(j) = 0.0;
  std::vector<char> chosen(static_cast<std::size_t>(d), 0);
  chosen[static_cast<std::size_t>(j)] = 1;
  // Intersection of the "j loses" gamma-intervals over steps 1..k.
  std::vector<double> lower(static_cast<std::size_t>(kmax + 1), -kInf), upper(static_cast<std::size_t>(kmax + 1), kInf);
  const Index limit = std::min(kmax, d - 1);
  for (Index step = 0; step < limit; ++step) {
    Index best = -1;
    double best_score = -1.0;
    for (Index l = 0; l < d; ++l) {
      if (chosen[static_cast<std::size_t>(l)]) continue;
      const double dl = rg(l, l);
      if (!(dl > 1e-10 * std::max(gram(l, l), 1e-300)))
        throw RankDeficiency("fs_selection_regions: column " + std::to_string(l + 1) +
                                 " is collinear with the selected columns",
                             l);
      const double score = std::abs(rc(l)) / std::sqrt(dl);
      if (score > best_score) {
        best_score = score;
        best = l;
      }
    }
    double lo = -kInf, hi = kInf;
    const double djj = rg(j, j);
    if (djj > 1e-10 * gram(j, j)) {
      const double half = best_score * std::sqrt(djj);
      lo = -rc(j) - half;
      hi = -rc(j) + half;
    }
    lower[static_cast<std::size_t>(step + 1)] = std::max(lower[static_cast<std::size_t>(step)], lo);
    upper[static_cast<std::size_t>(step + 1)] = std::min(upper[static_cast<std::size_t>(step)], hi);

    chosen[static_cast<std::size_t>(best)] = 1;
    const Vector col = rg.col(best);
    const double pivot = col(best);
    rc.noalias() -= col * (rc(best) / pivot);
    rg.noalias() -= col * (col.transpose() / pivot);
  }

  const double r = geo.r();
  std::vector<std::vector<VInterval>> out;
  for (Index k : steps) {
    std::vector<VInterval> regions;
    if (k >= d) {
      regions.push_back({-r, r});
    } else if (k > 0) {
      const double lo = std::max(geo.v_from_coordinate(lower[static_cast<std::size_t>(k)]), -r);
      const double hi = std::min(geo.v_from_coordinate(upper[static_cast<std::size_t>(k)]), r);
      if (hi <= lo) {
        regions.push_back({-r, r});
      } else {
        if (lo > -r) regions.push_back({-r, lo});
        if (hi < r) regions.push_back({hi, r});
      }
    }
    out.push_back(std::move(regions));
  }
  return out;
}

std::vector<VInterval> fs_selection_regions(const LinearLaw& law, Index k) {
  return fs_selection_regions(law, std::vector<Index>{k}).front();
}

double region_probability(const std::vector<VInterval>& regions, const LinearLaw& law) {
  const LinearGeometry& geo = law.geometry();
  double total = 0.0;
  for (const auto& iv : regions) total += t_interval_mass(geo.t_from_v(iv.lo), geo.t_from_v(iv.hi), geo.dof);
  return std::min(total, 1.0);
}

double hfdr_star_fs_exact(const std::vector<VInterval>& regions, const LinearLaw& law, Index k) {
  if (k <= 0) return 0.0;
  return region_probability(regions, law) / static_cast<double>(k);
}

// ---------------------------------------------------------------------------

LassoStart lasso_start(const RegressionProblem& observed, double lambda, const Vector* warm) {
  return lasso_start_at(*observed.gram, observed.xty, lambda, warm);
}

ExactWorkspace::ExactWorkspace(const Problem& observed, const Selector& selector) {
  const auto* rp = std::get_if<RegressionProblem>(&observed);
  if (!rp || selector.kind() != SelectorKind::lasso) return;
  Vector warm = Vector::Zero(rp->d());
  for (Index g = 0; g < selector.grid_size(); ++g) {
    try {
      const double lambda = selector.grid()(g);
      LassoStart s = lasso_start(*rp, lambda, &warm);
      warm.setZero();
      if (!s.active.empty()) {
        Vector rhs(static_cast<Index>(s.active.size()));
        for (Index p = 0; p < rhs.size(); ++p) rhs(p) = rp->xty(s.active[static_cast<std::size_t>(p)]) - lambda * s.sigma(p);
        const Vector beta = s.minv * rhs;
        for (Index p = 0; p < rhs.size(); ++p) warm(s.active[static_cast<std::size_t>(p)]) = beta(p);
      }
      lasso_.push_back(std::move(s));
    } catch (const NumericalError&) {
      lasso_.push_back(std::nullopt);
    }
  }
}

const LassoStart* ExactWorkspace::lasso(Index g) const {
  if (g < 0 || g >= static_cast<Index>(lasso_.size()) || !lasso_[static_cast<std::size_t>(g)]) return nullptr;
  return &*lasso_[static_cast<std::size_t>(g)];
}

std::optional<StarEstimate> hfdr_star_exact(const ConditionalLaw& law, const Selector& selector,
                                            const ExactOptions& opts, const ExactWorkspace* workspace) {
  const Index grid = selector.grid_size();
  StarEstimate out;
  out.hfdr_star = Vector::Zero(grid);
  out.se = Vector::Zero(grid);
  out.selection_prob = Vector::Zero(grid);

  if (const auto* pl = dynamic_cast<const IndependentPValueLaw*>(&law)) {
    if (selector.kind() != SelectorKind::p_threshold) return std::nullopt;
    // Given p_{-j}, p_j is uniform, so j is selected with probability c and
    // R = R_{-j} + 1 whenever it is.
    const PValueProblem& observed = pl->observed();
    for (Index g = 0; g < grid; ++g) {
      const double c = selector.grid()(g);
      Index others = 0;
      for (Index i = 0; i < observed.pvalues.size(); ++i)
        if (i != law.index() && observed.pvalues(i) <= c) ++others;
      out.selection_prob(g) = c;
      out.hfdr_star(g) = c / static_cast<double>(others + 1);
    }
    return out;
  }

  const auto* ll = dynamic_cast<const LinearLaw*>(&law);
  if (!ll) return std::nullopt;
  if (selector.kind() == SelectorKind::lasso) {
    for (Index g = 0; g < grid; ++g) {
      const LassoStart* start = workspace ? workspace->lasso(g) : nullptr;
      const PiecewiseSelectionPath path = lasso_homotopy_path(*ll, selector.grid()(g), opts, start);
      out.hfdr_star(g) = hfdr_star_lasso_exact(path, *ll);
      out.selection_prob(g) = selection_prob_lasso_exact(path, *ll);
    }
    return out;
  }
  if (selector.kind() == SelectorKind::forward_stepwise) {
    std::vector<Index> steps;
    for (Index g = 0; g < grid; ++g) steps.push_back(static_cast<Index>(selector.grid()(g)));
    const auto regions = fs_selection_regions(*ll, steps);
    for (Index g = 0; g < grid; ++g) {
      out.selection_prob(g) = steps[static_cast<std::size_t>(g)] > 0 ? region_probability(regions[static_cast<std::size_t>(g)], *ll) : 0.0;
      out.hfdr_star(g) = hfdr_star_fs_exact(regions[static_cast<std::size_t>(g)], *ll, steps[static_cast<std::size_t>(g)]);
    }
    return out;
  }
  return std::nullopt;
}

}  // namespace hfdr
