#ifndef DUALHASH_EXPERIMENT_HPP
#define DUALHASH_EXPERIMENT_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualhash/data.hpp"
#include "dualhash/metrics.hpp"
#include "dualhash/optimizer.hpp"

namespace dualhash {

/// Field-level configuration error ("hyper.tau: must be > 0").
class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DatasetConfig {
  std::string kind = "gaussian";  // gaussian | multilabel
  std::size_t classes = 10;
  std::size_t per_class = 100;     // gaussian
  std::size_t samples = 1000;      // multilabel
  std::size_t dim = 16;
  double spread = 0.3;
  double radius = 2.0;
  std::size_t queries_per_class = 10;
  std::string pairs = "sampled";   // all | sampled
  std::size_t pairs_per_anchor = 20;
  bool standardize = true;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{32};
  std::size_t bits = 8;
  std::string output = "tanh";  // tanh | identity
};

struct HyperConfig {
  double gamma = 3.0;
  double lambda = 0.05;
  double tau = 0.01;
  double alpha_loss = 0.5;
  double eta = 0.05;
  double alpha = 0.905;
  double beta = 0.905;
  double rho = 1.0;
  std::size_t batch = 32;
  std::size_t b1 = 64;
  std::size_t T = 2000;
  // eta is divided by this; 0 asks for a power-iteration estimate at x^1
  double lipschitz = 1.0;
  double delta = 1.0 / 6.0;
  double nu = 0.05;
};

/// One experiment. Serialized as a JSON object with sections "dataset",
/// "model", "hyper" and top-level variant, seed, seeds, out_dir, log_every.
struct ExperimentConfig {
  DatasetConfig dataset;
  ModelConfig model;
  std::string variant = "dualhash-stom";
  HyperConfig hyper;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string out_dir = "out";
  std::size_t log_every = 0;

  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string &text);
  static ExperimentConfig load(const std::string &path);
};

inline constexpr const char *env_prefix = "DUALHASH_";

/// Applies DUALHASH_<SECTION>_<KEY> (or DUALHASH_<KEY> for top-level keys)
/// from the lookup, e.g. DUALHASH_HYPER_TAU=0.02. Lists are comma separated.
void apply_env_overrides(ExperimentConfig &cfg,
                         const std::function<std::optional<std::string>(const std::string &)> &getenv);
void apply_env_overrides(ExperimentConfig &cfg);

/// Data set, splits and problem instance built from a config and seed.
struct Experiment {
  Dataset data;
  index_list train_rows, query_rows;
  HashingProblem problem;
  Vec x0;
  Mat query_inputs;
};

Experiment build_experiment(const ExperimentConfig &cfg, std::uint64_t seed);

struct RunOutcome {
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<DiagnosticsRecord> records;
  std::size_t iterations = 0;
  bool aborted = false;
  std::string abort_reason;
  std::optional<RetrievalReport> report;
  Vec x;
  double lipschitz = 0.0;
  bool lyapunov_positive = false;
  double wall_seconds = 0.0;
};

RunOutcome run_experiment(const ExperimentConfig &cfg, std::uint64_t seed);

/// CSV with one row per logged iteration; empty cells for quantities not
/// computed on that row.
std::string diagnostics_csv(const std::vector<DiagnosticsRecord> &rows);

/// Report JSON: retrieval metrics, run summary and the config echo.
std::string outcome_json(const RunOutcome &o, const ExperimentConfig &cfg);

struct CompareRow {
  std::string label;
  std::string variant;
  std::size_t runs = 0;
  std::size_t failures = 0;
  double map_mean = 0, map_std = 0;
  double apr2_mean = 0, apr2_std = 0;
  double quant_mean = 0, quant_std = 0;
};

std::vector<CompareRow> compare(const std::vector<std::pair<std::string, ExperimentConfig>> &cfgs,
                                unsigned threads = 1);
std::string compare_csv(const std::vector<CompareRow> &rows);

struct SuiteResult {
  std::string suite;
  bool pass = false;
  std::string detail;
};

using prox_conj_fn = std::function<double(double y, double tau, double lambda)>;

/// Oracle suites: prox equivalence, gradient checks, KKT construction and
/// Lyapunov positivity (with the config's lambda, tau, alpha, beta). The
/// prox hook allows mutation checks of the suite itself.
std::vector<SuiteResult> verify_suites(const ExperimentConfig &cfg,
                                       const prox_conj_fn &prox = nullptr);

}  // namespace dualhash

#endif  // DUALHASH_EXPERIMENT_HPP
