#pragma once

#include "hfdr/sim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hfdr {

enum class Command { estimate, cv, bootstrap_se, simulate, calibrate };

std::string to_string(Command c);
Command parse_command(std::string_view s);

// Declared covariate law for model-X data.
struct CovariateLawConfig {
  std::string type = "ar1";  // ar1 | gaussian | bernoulli
  double rho = 0.0;
  double mean = 0.0;
  double variance = 1.0;
  std::vector<double> means;                     // gaussian: per-column means (optional)
  std::vector<std::vector<double>> covariance;   // gaussian: full covariance
  std::vector<double> pi;                        // bernoulli: one or d probabilities
};

std::shared_ptr<const CovariateLaw> make_covariate_law(const CovariateLawConfig& cfg, Index d);

struct RunConfig {
  Command command = Command::estimate;

  std::string data_path;
  std::optional<std::string> response_column;
  Setting setting = Setting::gaussian_linear;
  bool intercept = true;
  std::optional<CovariateLawConfig> covariate_law;
  Index crt_samples = 199;

  std::optional<SelectorKind> selector;  // default follows the setting or family
  std::vector<double> grid;  // empty: log grid from the data
  Index n_lambda = 10;
  double lambda_ratio = 0.01;

  double zeta = 0.1;
  Index mc = 20;
  HfdrMode mode = HfdrMode::monte_carlo;

  Index boot_m = 10;
  Index folds = 10;
  std::string cv_metric;  // empty: natural metric of the selector

  std::uint64_t seed = 0;
  std::string out = ".";
  int workers = 0;  // not part of the recorded config
  bool quiet = false;

  // simulate / calibrate
  std::optional<std::string> family;
  std::optional<Index> n, d, d1;
  std::optional<double> theta_star;
  std::optional<double> rho;
  bool paper_scale = false;
  Index replicates = 200;
  Index bootstrap_runs = 0;
  double target_fdr = 0.2;
  double target_fpr = 0.2;
};

// Full resolved configuration as canonical JSON text, without the worker
// count and output-only flags.
std::string config_json(const RunConfig& cfg);
// Reads the keys present in a JSON object into `cfg`; unknown keys are an error.
void apply_config_json(const std::string& text, RunConfig& cfg);
void apply_config_file(const std::string& path, RunConfig& cfg);

// 64-bit FNV-1a of the canonical JSON serialization, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

// Shortest round-trip decimal form; independent of the global locale.
std::string format_number(double x);

// Fills defaults that depend on other fields (selector, simulation sizes).
RunConfig resolve(RunConfig cfg);

// Runs one command and writes its files into cfg.out. Throws the library
// error types; the CLI maps them onto exit codes.
void run(const RunConfig& cfg);

// 0 success, 1 invalid configuration, 2 data error, 3 numerical failure.
int exit_code_for(const std::exception& e);

}  // namespace hfdr
