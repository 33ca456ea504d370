#include "hfdr/estimator.hpp"

#include "hfdr/exact.hpp"
#include "parallel.hpp"

namespace hfdr {

std::string to_string(HfdrMode m) { return m == HfdrMode::monte_carlo ? "mc" : "exact"; }

HfdrMode parse_mode(std::string_view s) {
  if (s == "mc" || s == "monte_carlo") return HfdrMode::monte_carlo;
  if (s == "exact" || s == "exact_when_available") return HfdrMode::exact_when_available;
  throw InvalidArgument("unknown mode '" + std::string(s) + "'");
}

namespace {

void validate(const HfdrConfig& cfg) {
  if (!(cfg.zeta > 0.0 && cfg.zeta < 1.0)) throw InvalidArgument("zeta must lie in (0, 1)");
  if (cfg.mc_samples < 1) throw InvalidArgument("mc_samples must be at least 1");
}

[[noreturn]] void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(context + e.what());
  } catch (const DataError& e) {
    throw DataError(context + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(context + e.what());
  }
}

}  // namespace

StarEstimate hfdr_star_mc(const ConditionalLaw& law, const Selector& selector, const HfdrConfig& cfg,
                          const PathFit* observed) {
  validate(cfg);
  const Index grid = selector.grid_size();
  const Index h = law.index();
  const ProblemNeeds needs = selector.needs();
  Vector mean = Vector::Zero(grid);
  Vector m2 = Vector::Zero(grid);
  Vector hits = Vector::Zero(grid);
  for (Index m = 0; m < cfg.mc_samples; ++m) {
    Rng rng = make_rng(cfg.seed, Stream::mc, h, m);
    const PathFit fit = selector.fit(law.resample(rng, needs), observed);
    const double count = static_cast<double>(m + 1);
    for (Index g = 0; g < grid; ++g) {
      const SelectionSet& sel = fit.sets[static_cast<std::size_t>(g)];
      double x = 0.0;
      if (sel.contains(h)) {
        x = 1.0 / static_cast<double>(sel.size());
        hits(g) += 1.0;
      }
      const double delta = x - mean(g);
      mean(g) += delta / count;
      m2(g) += delta * (x - mean(g));
    }
  }
  StarEstimate out;
  const double n = static_cast<double>(cfg.mc_samples);
  out.hfdr_star = mean;
  out.selection_prob = hits / n;
  out.se = cfg.mc_samples > 1 ? Vector((m2.array() / (n - 1.0) / n).max(0.0).sqrt()) : Vector(Vector::Zero(grid));
  return out;
}

HfdrCurve estimate_hfdr(const LawSet& laws, const Selector& selector, const HfdrConfig& cfg) {
  validate(cfg);
  if (selector.grid_size() < 1) throw InvalidArgument("tuning grid is empty");
  const Index grid = selector.grid_size();
  const Index hyps = laws.size();

  HfdrCurve curve;
  curve.grid = selector.grid();
  const PathFit observed = selector.fit(laws.observed());
  curve.selections = observed.sets;
  for (const auto& s : observed.sets) curve.r.push_back(s.size());

  curve.pvalues.resize(hyps);
  curve.phi.resize(hyps);
  for (Index h = 0; h < hyps; ++h) {
    curve.pvalues(h) = laws[h].pvalue();
    curve.phi(h) = laws[h].phi(cfg.zeta);
  }

  curve.hfdr_star = Matrix::Zero(grid, hyps);
  curve.hfdr_star_se = Matrix::Zero(grid, hyps);
  curve.selection_prob = Matrix::Zero(grid, hyps);
  std::vector<char> exact(static_cast<std::size_t>(hyps), 0);
  std::vector<char> fellback(static_cast<std::size_t>(hyps), 0);

  ExactWorkspace workspace;
  if (cfg.mode == HfdrMode::exact_when_available) workspace = ExactWorkspace(laws.observed(), selector);

  detail::parallel_for(hyps, cfg.workers, [&](Index h) {
    if (curve.phi(h) == 0.0) return;
    const ConditionalLaw& law = laws[h];
    try {
      if (cfg.mode == HfdrMode::exact_when_available) {
        try {
          if (auto est = hfdr_star_exact(law, selector, {}, &workspace)) {
            curve.hfdr_star.col(h) = est->hfdr_star;
            curve.selection_prob.col(h) = est->selection_prob;
            exact[static_cast<std::size_t>(h)] = 1;
            return;
          }
        } catch (const DegenerateEvent&) {
          fellback[static_cast<std::size_t>(h)] = 1;
        }
      }
      const StarEstimate est = hfdr_star_mc(law, selector, cfg, &observed);
      curve.hfdr_star.col(h) = est.hfdr_star;
      curve.hfdr_star_se.col(h) = est.se;
      curve.selection_prob.col(h) = est.selection_prob;
    } catch (const Error&) {
      rethrow_with_context("hypothesis " + laws[h].hypothesis().label() + ": ");
    }
  });

  curve.per_variable = curve.hfdr_star.array().rowwise() * curve.phi.transpose().array();
  curve.hfdr = curve.per_variable.rowwise().sum();
  curve.hfdr_mc_se =
      (curve.hfdr_star_se.array().square().rowwise() * curve.phi.transpose().array().square()).rowwise().sum().sqrt();
  curve.hpfer = (curve.selection_prob.array().rowwise() * curve.phi.transpose().array()).rowwise().sum();
  for (Index h = 0; h < hyps; ++h) {
    curve.exact.push_back(exact[static_cast<std::size_t>(h)] != 0);
    curve.fallbacks += fellback[static_cast<std::size_t>(h)];
  }
  return curve;
}

Vector hpfer(const LawSet& laws, const Selector& selector, const HfdrConfig& cfg) {
  return estimate_hfdr(laws, selector, cfg).hpfer;
}

namespace {

void check_threshold(double c, double zeta) {
  if (!(c > 0.0 && c < 1.0)) throw InvalidArgument("threshold must lie in (0, 1)");
  if (!(zeta > 0.0 && zeta < 1.0)) throw InvalidArgument("zeta must lie in (0, 1)");
}

}  // namespace

double hfdr_pthreshold_closed_form(const Vector& pvalues, double c, double zeta) {
  check_threshold(c, zeta);
  if (c > zeta) throw InvalidArgument("closed form requires c <= zeta");
  const double r = static_cast<double>((pvalues.array() <= c).count());
  const double large = static_cast<double>((pvalues.array() > zeta).count());
  return c / (r + 1.0) * large / (1.0 - zeta);
}

double storey_estimate(const Vector& pvalues, double c, double zeta) {
  check_threshold(c, zeta);
  const double r = static_cast<double>((pvalues.array() <= c).count());
  if (r == 0.0) return 0.0;
  const double large = static_cast<double>((pvalues.array() > zeta).count());
  return c / r * large / (1.0 - zeta);
}

}  // namespace hfdr
