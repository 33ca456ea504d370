#include "hfdr/io.hpp"

#include "hfdr/exact.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace hfdr {

using nlohmann::json;

std::string to_string(Command c) {
  switch (c) {
    case Command::estimate: return "estimate";
    case Command::cv: return "cv";
    case Command::bootstrap_se: return "bootstrap-se";
    case Command::simulate: return "simulate";
    case Command::calibrate: return "calibrate";
  }
  return "unknown";
}

Command parse_command(std::string_view s) {
  if (s == "estimate") return Command::estimate;
  if (s == "cv") return Command::cv;
  if (s == "bootstrap-se" || s == "bootstrap_se") return Command::bootstrap_se;
  if (s == "simulate") return Command::simulate;
  if (s == "calibrate") return Command::calibrate;
  throw InvalidArgument("unknown command '" + std::string(s) + "'");
}

std::shared_ptr<const CovariateLaw> make_covariate_law(const CovariateLawConfig& cfg, Index d) {
  if (cfg.type == "ar1") {
    if (!(cfg.rho > -1.0 && cfg.rho < 1.0)) throw InvalidArgument("covariate law: rho must lie in (-1, 1)");
    if (!(cfg.variance > 0.0)) throw InvalidArgument("covariate law: variance must be positive");
    return std::make_shared<Ar1CovariateLaw>(cfg.rho, cfg.mean, cfg.variance);
  }
  if (cfg.type == "gaussian") {
    Vector mean = Vector::Constant(d, cfg.mean);
    if (!cfg.means.empty()) {
      if (static_cast<Index>(cfg.means.size()) != d) throw InvalidArgument("covariate law: means need d entries");
      mean = Eigen::Map<const Vector>(cfg.means.data(), d);
    }
    Matrix cov = Matrix::Identity(d, d) * cfg.variance;
    if (!cfg.covariance.empty()) {
      if (static_cast<Index>(cfg.covariance.size()) != d) throw InvalidArgument("covariate law: covariance must be d by d");
      for (Index i = 0; i < d; ++i) {
        const auto& row = cfg.covariance[static_cast<std::size_t>(i)];
        if (static_cast<Index>(row.size()) != d) throw InvalidArgument("covariate law: covariance must be d by d");
        for (Index k = 0; k < d; ++k) cov(i, k) = row[static_cast<std::size_t>(k)];
      }
    }
    return std::make_shared<GaussianCovariateLaw>(std::move(mean), cov);
  }
  if (cfg.type == "bernoulli") {
    if (cfg.pi.empty()) throw InvalidArgument("covariate law: bernoulli needs pi");
    return std::make_shared<BernoulliCovariateLaw>(
        Eigen::Map<const Vector>(cfg.pi.data(), static_cast<Index>(cfg.pi.size())));
  }
  throw InvalidArgument("covariate law: unknown type '" + cfg.type + "'");
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json law_json(const CovariateLawConfig& law) {
  return json{{"type", law.type},         {"rho", law.rho},       {"mean", law.mean}, {"variance", law.variance},
              {"means", law.means},       {"covariance", law.covariance}, {"pi", law.pi}};
}

json config_object(const RunConfig& c) {
  json j;
  j["command"] = to_string(c.command);
  j["data"] = c.data_path;
  j["response"] = opt(c.response_column);
  j["setting"] = to_string(c.setting);
  j["intercept"] = c.intercept;
  j["covariate_law"] = c.covariate_law ? law_json(*c.covariate_law) : json(nullptr);
  j["crt_samples"] = c.crt_samples;
  j["selector"] = c.selector ? json(to_string(*c.selector)) : json(nullptr);
  j["grid"] = c.grid;
  j["n_lambda"] = c.n_lambda;
  j["lambda_ratio"] = c.lambda_ratio;
  j["zeta"] = c.zeta;
  j["mc"] = c.mc;
  j["mode"] = to_string(c.mode);
  j["boot_M"] = c.boot_m;
  j["folds"] = c.folds;
  j["cv_metric"] = c.cv_metric;
  j["seed"] = c.seed;
  j["family"] = opt(c.family);
  j["n"] = opt(c.n);
  j["d"] = opt(c.d);
  j["d1"] = opt(c.d1);
  j["theta_star"] = opt(c.theta_star);
  j["rho"] = opt(c.rho);
  j["paper_scale"] = c.paper_scale;
  j["replicates"] = c.replicates;
  j["bootstrap_runs"] = c.bootstrap_runs;
  j["target_fdr"] = c.target_fdr;
  j["target_fpr"] = c.target_fpr;
  return j;
}

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

std::string config_json(const RunConfig& cfg) { return config_object(cfg).dump(); }

void apply_config_json(const std::string& text, RunConfig& c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (v.is_null()) continue;
    if (key == "command") c.command = parse_command(get_as<std::string>(v, key));
    else if (key == "data") c.data_path = get_as<std::string>(v, key);
    else if (key == "response") c.response_column = get_as<std::string>(v, key);
    else if (key == "setting") c.setting = parse_setting(get_as<std::string>(v, key));
    else if (key == "intercept") c.intercept = get_as<bool>(v, key);
    else if (key == "covariate_law") {
      if (!v.is_object()) throw InvalidArgument("config key 'covariate_law' must be an object");
      CovariateLawConfig law;
      for (const auto& [lk, lv] : v.items()) {
        const std::string name = "covariate_law." + lk;
        if (lk == "type") law.type = get_as<std::string>(lv, name);
        else if (lk == "rho") law.rho = get_as<double>(lv, name);
        else if (lk == "mean") law.mean = get_as<double>(lv, name);
        else if (lk == "variance") law.variance = get_as<double>(lv, name);
        else if (lk == "means") law.means = get_as<std::vector<double>>(lv, name);
        else if (lk == "covariance") law.covariance = get_as<std::vector<std::vector<double>>>(lv, name);
        else if (lk == "pi") law.pi = get_as<std::vector<double>>(lv, name);
        else throw InvalidArgument("unknown config key '" + name + "'");
      }
      c.covariate_law = law;
    }
    else if (key == "crt_samples") c.crt_samples = get_as<Index>(v, key);
    else if (key == "selector") c.selector = parse_selector_kind(get_as<std::string>(v, key));
    else if (key == "grid") c.grid = get_as<std::vector<double>>(v, key);
    else if (key == "n_lambda") c.n_lambda = get_as<Index>(v, key);
    else if (key == "lambda_ratio") c.lambda_ratio = get_as<double>(v, key);
    else if (key == "zeta") c.zeta = get_as<double>(v, key);
    else if (key == "mc") c.mc = get_as<Index>(v, key);
    else if (key == "mode") c.mode = parse_mode(get_as<std::string>(v, key));
    else if (key == "boot_M") c.boot_m = get_as<Index>(v, key);
    else if (key == "folds") c.folds = get_as<Index>(v, key);
    else if (key == "cv_metric") c.cv_metric = get_as<std::string>(v, key);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
    else if (key == "out") c.out = get_as<std::string>(v, key);
    else if (key == "workers") c.workers = get_as<int>(v, key);
    else if (key == "family") c.family = get_as<std::string>(v, key);
    else if (key == "n") c.n = get_as<Index>(v, key);
    else if (key == "d") c.d = get_as<Index>(v, key);
    else if (key == "d1") c.d1 = get_as<Index>(v, key);
    else if (key == "theta_star") c.theta_star = get_as<double>(v, key);
    else if (key == "rho") c.rho = get_as<double>(v, key);
    else if (key == "paper_scale") c.paper_scale = get_as<bool>(v, key);
    else if (key == "replicates") c.replicates = get_as<Index>(v, key);
    else if (key == "bootstrap_runs") c.bootstrap_runs = get_as<Index>(v, key);
    else if (key == "target_fdr") c.target_fdr = get_as<double>(v, key);
    else if (key == "target_fpr") c.target_fpr = get_as<double>(v, key);
    else throw InvalidArgument("unknown config key '" + key + "'");
  }
}

void apply_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_json(buf.str(), cfg);
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_json(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig resolve(RunConfig cfg) {
  const bool sim = cfg.command == Command::simulate || cfg.command == Command::calibrate;
  if (sim) {
    if (!cfg.family) throw InvalidArgument(to_string(cfg.command) + " needs a scenario family");
    const Family family = parse_family(*cfg.family);
    const ScenarioSpec spec = default_spec(family, cfg.paper_scale);
    if (!cfg.selector) cfg.selector = default_selector(family);
    if (!cfg.n) cfg.n = spec.n;
    if (!cfg.d) cfg.d = spec.d;
    if (!cfg.d1) cfg.d1 = spec.d1;
    if (!cfg.rho) cfg.rho = spec.rho;
    if (!cfg.theta_star && cfg.command == Command::simulate) cfg.theta_star = spec.theta_star;
  } else {
    if (cfg.data_path.empty()) throw InvalidArgument(to_string(cfg.command) + " needs --data");
    if (!cfg.selector)
      cfg.selector = cfg.setting == Setting::gaussian_graphical ? SelectorKind::graphical_lasso : SelectorKind::lasso;
  }
  if (!(cfg.zeta > 0.0 && cfg.zeta < 1.0)) throw InvalidArgument("zeta must lie in (0, 1)");
  if (cfg.mc < 1) throw InvalidArgument("--mc must be at least 1");
  if (cfg.n_lambda < 1) throw InvalidArgument("--n-lambda must be at least 1");
  if (cfg.boot_m < 2) throw InvalidArgument("--boot-M must be at least 2");
  if (cfg.folds < 2) throw InvalidArgument("--folds must be at least 2");
  if (cfg.workers < 0) throw InvalidArgument("--workers must be nonnegative");
  for (std::size_t i = 1; i < cfg.grid.size(); ++i) {
    const bool steps = cfg.selector == SelectorKind::forward_stepwise;
    if (steps ? !(cfg.grid[i] > cfg.grid[i - 1]) : !(cfg.grid[i] < cfg.grid[i - 1]))
      throw InvalidArgument(steps ? "grid of step counts must increase" : "grid must decrease strictly");
  }
  return cfg;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InvalidArgument*>(&e)) return 1;
  if (dynamic_cast<const DataError*>(&e)) return 2;
  return 3;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

class Output {
 public:
  explicit Output(const RunConfig& cfg) : dir_(cfg.out), seed_(cfg.seed), hash_(config_hash(cfg)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw InvalidArgument("cannot create output directory '" + cfg.out + "'");
  }

  std::ofstream open(const std::string& name) const {
    std::ofstream f(std::filesystem::path(dir_) / name, std::ios::binary);
    if (!f) throw InvalidArgument("cannot write '" + name + "' in '" + dir_ + "'");
    f.imbue(std::locale::classic());
    return f;
  }

  std::ofstream csv(const std::string& name) const {
    auto f = open(name);
    f << "# seed=" << seed_ << ", config_hash=" << hash_ << '\n';
    return f;
  }

  void json_file(const std::string& name, json body) const {
    body["seed"] = seed_;
    body["config_hash"] = hash_;
    open(name) << body.dump(2) << '\n';
  }

 private:
  std::string dir_;
  std::uint64_t seed_;
  std::string hash_;
};

void progress(const RunConfig& cfg, const std::string& line) {
  if (!cfg.quiet) std::cerr << line << '\n';
}

HfdrConfig hfdr_config(const RunConfig& cfg) {
  HfdrConfig h;
  h.zeta = cfg.zeta;
  h.mc_samples = cfg.mc;
  h.mode = cfg.mode;
  h.seed = cfg.seed;
  h.workers = cfg.workers;
  return h;
}

struct Loaded {
  std::optional<Dataset> data;
  Vector pvalues;  // p_threshold input
  std::shared_ptr<const CovariateLaw> law;
};

Loaded load_input(const RunConfig& cfg) {
  Loaded in;
  if (cfg.selector == SelectorKind::p_threshold) {
    const Dataset raw = load_csv(cfg.data_path, {std::nullopt, Setting::gaussian_graphical, false});
    Index col = 0;
    if (cfg.response_column) {
      const auto& names = raw.column_names();
      const auto it = std::find(names.begin(), names.end(), *cfg.response_column);
      if (it == names.end()) throw DataError("p-value column '" + *cfg.response_column + "' not found");
      col = it - names.begin();
    } else if (raw.d() != 1) {
      throw InvalidArgument("p-value input with several columns needs --response to name the p-value column");
    }
    in.pvalues = raw.x().col(col);
    return in;
  }
  CsvOptions options;
  options.response_column = cfg.response_column;
  options.setting = cfg.setting;
  options.intercept = cfg.intercept;
  in.data = load_csv(cfg.data_path, options);
  if (cfg.setting == Setting::model_x) {
    if (!cfg.covariate_law) throw InvalidArgument("model_x data needs a covariate_law declaration in the config");
    in.law = make_covariate_law(*cfg.covariate_law, in.data->d());
  }
  return in;
}

std::unique_ptr<Selector> build_selector(const RunConfig& cfg, const Loaded& in) {
  Vector grid;
  if (!cfg.grid.empty()) {
    grid = Eigen::Map<const Vector>(cfg.grid.data(), static_cast<Index>(cfg.grid.size()));
  } else if (in.data) {
    grid = default_grid(*cfg.selector, make_problem(*in.data), {cfg.n_lambda, cfg.lambda_ratio});
  } else {
    grid = default_grid(*cfg.selector, PValueProblem{in.pvalues}, {cfg.n_lambda, cfg.lambda_ratio});
  }
  return make_selector(*cfg.selector, grid);
}

LawSet build_laws(const RunConfig& cfg, const Loaded& in) {
  if (!in.data) return make_pvalue_laws(in.pvalues);
  LawOptions options;
  options.covariate_law = in.law;
  options.crt_samples = cfg.crt_samples;
  options.seed = cfg.seed;
  return make_laws(*in.data, options);
}

std::string hypothesis_label(const Loaded& in, Index h) {
  return in.data ? in.data->hypothesis_label(h) : std::to_string(h + 1);
}

void write_contributions(const Output& out, const HfdrCurve& curve, const Loaded& in) {
  auto f = out.csv("contributions.csv");
  f << "tuning,hypothesis,hfdr_star,phi,p_value\n";
  for (Index t = 0; t < curve.grid.size(); ++t)
    for (Index h = 0; h < curve.phi.size(); ++h)
      f << format_number(curve.grid(t)) << ',' << hypothesis_label(in, h) << ',' << format_number(curve.hfdr_star(t, h))
        << ',' << format_number(curve.phi(h)) << ',' << format_number(curve.pvalues(h)) << '\n';
}

void write_curves(const Output& out, const HfdrCurve& curve, const Vector* se, const CvCurve* cv) {
  auto f = out.csv("curves.csv");
  f << "tuning,hfdr";
  if (se) f << ",hfdr_se";
  if (cv) f << ",cv_error,cv_se";
  f << ",r\n";
  for (Index t = 0; t < curve.grid.size(); ++t) {
    f << format_number(curve.grid(t)) << ',' << format_number(curve.hfdr(t));
    if (se) f << ',' << format_number((*se)(t));
    if (cv) f << ',' << format_number(cv->mean_error(t)) << ',' << format_number(cv->se_error(t));
    f << ',' << curve.r[static_cast<std::size_t>(t)] << '\n';
  }
}

HfdrCurve run_estimate(const RunConfig& cfg, const Loaded& in, const Selector& selector) {
  const LawSet laws = build_laws(cfg, in);
  progress(cfg, "estimating hfdr for " + std::to_string(laws.size()) + " hypotheses over " +
                    std::to_string(selector.grid_size()) + " tuning values");
  const HfdrCurve curve = estimate_hfdr(laws, selector, hfdr_config(cfg));
  for (Index t = 0; t < curve.grid.size(); ++t)
    progress(cfg, "  tuning " + format_number(curve.grid(t)) + ": hfdr " + format_number(curve.hfdr(t)) + ", R " +
                      std::to_string(curve.r[static_cast<std::size_t>(t)]));
  if (curve.fallbacks > 0)
    progress(cfg, "  " + std::to_string(curve.fallbacks) + " exact evaluations fell back to Monte Carlo");
  return curve;
}

CvMetric natural_metric(const RunConfig& cfg) {
  if (cfg.cv_metric == "mse") return CvMetric::mse;
  if (cfg.cv_metric == "neg_loglik") return CvMetric::neg_loglik;
  if (!cfg.cv_metric.empty()) throw InvalidArgument("unknown cv metric '" + cfg.cv_metric + "'");
  const bool linear = cfg.selector == SelectorKind::lasso || cfg.selector == SelectorKind::forward_stepwise;
  return linear ? CvMetric::mse : CvMetric::neg_loglik;
}

CvOptions cv_options(const RunConfig& cfg) {
  CvOptions cv;
  cv.folds = cfg.folds;
  cv.seed = cfg.seed;
  cv.workers = cfg.workers;
  return cv;
}

void command_data(const RunConfig& cfg, const Output& out) {
  const Loaded in = load_input(cfg);
  const auto selector = build_selector(cfg, in);
  const HfdrCurve curve = run_estimate(cfg, in, *selector);
  json results;
  results["fallbacks"] = curve.fallbacks;

  if (cfg.command == Command::estimate) {
    write_curves(out, curve, nullptr, nullptr);
  } else if (cfg.command == Command::cv) {
    if (!in.data) throw InvalidArgument("cv needs a dataset, not p-values");
    progress(cfg, "cross-validating over " + std::to_string(cfg.folds) + " folds");
    const CvCurve cv = cv_curve(*in.data, *selector, natural_metric(cfg), cv_options(cfg));
    write_curves(out, curve, nullptr, &cv);
    results["lambda_min"] = cv.lambda_min;
    results["lambda_1se"] = cv.lambda_1se;
    results["cv_metric"] = to_string(cv.metric);
  } else {
    if (!in.data) throw InvalidArgument("bootstrap-se needs a dataset, not p-values");
    NullSetEstimate h0;
    BootstrapOptions boot;
    boot.replicates = cfg.boot_m;
    boot.laws.covariate_law = in.law;
    boot.laws.crt_samples = cfg.crt_samples;
    BootstrapResult result;
    if (in.data->setting() == Setting::model_x) {
      h0 = pvalue_null_set(curve.pvalues);
      progress(cfg, "model-X bootstrap with " + std::to_string(cfg.boot_m) + " replicates");
      result = bootstrap_se_modelx(*in.data, *selector, hfdr_config(cfg), h0.h0_hat, boot);
    } else {
      h0 = cv_null_set(*in.data, *selector, cv_options(cfg));
      progress(cfg, "parametric bootstrap with " + std::to_string(cfg.boot_m) + " replicates");
      result = bootstrap_se_parametric(*in.data, *selector, hfdr_config(cfg), h0.h0_hat, boot);
    }
    write_curves(out, curve, &result.se, nullptr);
    std::vector<std::string> labels;
    for (Index h : h0.h0_hat) labels.push_back(hypothesis_label(in, h));
    results["null_set"] = labels;
    results["null_set_source"] = h0.source == NullSetSource::cv_complement ? "cv_complement" : "pvalue_rule";
    if (!std::isnan(h0.lambda_cv)) results["lambda_cv"] = h0.lambda_cv;
  }
  write_contributions(out, curve, in);
  out.json_file("run.json", json{{"config", config_object(cfg)}, {"results", results}});
}

ScenarioSpec scenario_spec(const RunConfig& cfg) {
  ScenarioSpec spec = default_spec(parse_family(*cfg.family), cfg.paper_scale);
  spec.n = *cfg.n;
  spec.d = *cfg.d;
  spec.d1 = *cfg.d1;
  spec.rho = *cfg.rho;
  spec.theta_star = cfg.theta_star;
  spec.seed = cfg.seed;
  return spec;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void command_simulate(const RunConfig& cfg, const Output& out) {
  ScenarioSpec spec = scenario_spec(cfg);
  const SelectorKind kind = *cfg.selector;
  json results;
  if (spec.family == Family::equicorrelated_threshold) {
    const CounterexampleResult r = equicorrelated_counterexample(spec.d, cfg.replicates, spec.rho, spec.seed);
    results = json{{"d", r.d}, {"mean_hfdr", r.mean_hfdr}, {"sd_hfdr", r.sd_hfdr}, {"fdr", r.fdr}};
    out.json_file("summary.json", results);
    out.json_file("run.json", json{{"config", config_object(cfg)}});
    return;
  }
  if (!spec.theta_star) {
    progress(cfg, "calibrating signal strength");
    CalibrationOptions copt;
    copt.target_fdr = cfg.target_fdr;
    copt.target_fpr = cfg.target_fpr;
    copt.workers = cfg.workers;
    spec.theta_star = calibrate_signal(spec, kind, copt).theta_star;
  }
  const Vector grid = cfg.grid.empty()
                          ? pilot_grid(spec, kind, {cfg.n_lambda, cfg.lambda_ratio})
                          : Vector(Eigen::Map<const Vector>(cfg.grid.data(), static_cast<Index>(cfg.grid.size())));
  const auto selector = make_selector(kind, grid);
  SimulationOptions sopt;
  sopt.replicates = cfg.replicates;
  sopt.hfdr = hfdr_config(cfg);
  sopt.bootstrap_runs = cfg.bootstrap_runs;
  sopt.boot_replicates = cfg.boot_m;
  sopt.folds = cfg.folds;
  sopt.progress = !cfg.quiet;
  const SimulationResult sim = run_simulation(spec, *selector, sopt);

  {
    auto f = out.csv("simulation.csv");
    f << "replicate,tuning,hfdr,fdp,fpr,r";
    const bool boot = sim.se.rows() > 0;
    if (boot) f << ",hfdr_se";
    f << '\n';
    for (Index rep = 0; rep < sim.hfdr.rows(); ++rep)
      for (Index t = 0; t < sim.grid.size(); ++t) {
        f << rep + 1 << ',' << format_number(sim.grid(t)) << ',' << format_number(sim.hfdr(rep, t)) << ','
          << format_number(sim.fdp(rep, t)) << ',' << format_number(sim.fpr(rep, t)) << ','
          << format_number(sim.r(rep, t));
        if (boot) f << ',' << (rep < sim.se.rows() ? format_number(sim.se(rep, t)) : std::string());
        f << '\n';
      }
  }
  const std::vector<bool> flags = sim.conservative_flags(3.0);
  bool all = true;
  for (bool b : flags) all = all && b;
  Vector q05(sim.grid.size()), q95(sim.grid.size()), h05(sim.grid.size()), h95(sim.grid.size());
  for (Index t = 0; t < sim.grid.size(); ++t) {
    auto col = [](const Matrix& m, Index t) { return std::vector<double>(m.col(t).data(), m.col(t).data() + m.rows()); };
    q05(t) = quantile(col(sim.fdp, t), 0.05);
    q95(t) = quantile(col(sim.fdp, t), 0.95);
    h05(t) = quantile(col(sim.hfdr, t), 0.05);
    h95(t) = quantile(col(sim.hfdr, t), 0.95);
  }
  results = json{{"family", to_string(spec.family)},
                 {"theta_star", *spec.theta_star},
                 {"grid", vector_json(sim.grid)},
                 {"mean_hfdr", vector_json(sim.mean_hfdr())},
                 {"mean_fdp", vector_json(sim.mean_fdp())},
                 {"mean_fpr", vector_json(sim.fpr.colwise().mean())},
                 {"combined_se", vector_json(sim.combined_se())},
                 {"fdp_q05", vector_json(q05)},
                 {"fdp_q95", vector_json(q95)},
                 {"hfdr_q05", vector_json(h05)},
                 {"hfdr_q95", vector_json(h95)},
                 {"conservative", flags},
                 {"all_conservative", all}};
  if (sim.se.rows() > 0) results["mean_bootstrap_se"] = vector_json(sim.se.colwise().mean());
  out.json_file("summary.json", results);
  out.json_file("run.json", json{{"config", config_object(cfg)}});
}

void command_calibrate(const RunConfig& cfg, const Output& out) {
  ScenarioSpec spec = scenario_spec(cfg);
  CalibrationOptions copt;
  copt.target_fdr = cfg.target_fdr;
  copt.target_fpr = cfg.target_fpr;
  copt.workers = cfg.workers;
  progress(cfg, "calibrating theta* for FPR " + format_number(cfg.target_fpr) + " at FDR " +
                    format_number(cfg.target_fdr));
  const CalibrationResult r = calibrate_signal(spec, *cfg.selector, copt);
  out.json_file("calibration.json",
                json{{"theta_star", r.theta_star}, {"fpr", r.fpr}, {"probes", r.probes}, {"family", *cfg.family}});
  out.json_file("run.json", json{{"config", config_object(cfg)}});
}

}  // namespace

void run(const RunConfig& raw) {
  const RunConfig cfg = resolve(raw);
  const Output out(cfg);
  switch (cfg.command) {
    case Command::estimate:
    case Command::cv:
    case Command::bootstrap_se:
      command_data(cfg, out);
      return;
    case Command::simulate:
      command_simulate(cfg, out);
      return;
    case Command::calibrate:
      command_calibrate(cfg, out);
      return;
  }
}

}  // namespace hfdr
