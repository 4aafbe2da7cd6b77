#ifndef DUALHASH_OPTIMIZER_HPP
#define DUALHASH_OPTIMIZER_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dualhash/metrics.hpp"
#include "dualhash/problem.hpp"

namespace dualhash {

/// Iterate triple plus the previous x and B (for extrapolation and the
/// recursive estimator) and the STORM direction.
struct SolverState {
  Vec x, x_prev;
  Mat B, B_prev;
  Mat Lambda;
  std::optional<Vec> storm_d;
  std::size_t k = 1;
  Rng rng;
};

/// x^1 = x0, x^0 = x^1, B^1 = D(x^1), Lambda^1 = 0.
SolverState init_state(const HashingProblem &p, Vec x0, std::uint64_t seed);

/// Constant-parameter momentum step: eta_k = eta / lipschitz.
struct StoMParams {
  double eta = 0.05;
  double alpha = 0.905;
  double beta = 0.905;
  double tau = 0.01;
  std::size_t batch = 32;
  double lipschitz = 1.0;

  double step() const { return eta / lipschitz; }
  void validate() const;
};

/// eta_k = eta / (L~ T^(1/3)), rho_k = 8 rho eta^2 / T^(2/3), first batch b1.
struct StoRMParams {
  double eta_base = 1.0;
  double rho_base = 1.0;
  double tau = 0.01;
  std::size_t b1 = 64;
  std::size_t b = 32;
  std::size_t T = 2000;
  double lipschitz_tilde = 1.0;

  double eta_k() const;
  double rho_k() const;
  void validate() const;
};

/// Constants of the Lyapunov analysis for a given smoothness estimate.
struct LyapunovConfig {
  double L_F = 1.0;
  double tau = 0.01;
  double eta_k = 0.0;  // step actually used in x
  double alpha = 0.0;
  double beta = 0.0;
  double delta = 1.0 / 6.0;
  double nu = 0.05;

  double K1, K2, K3, K4, K5, K6;
  double C1, C2, C3, C4;
  double L_bar, L_tilde;
  double C_B, C_x;

  LyapunovConfig(double L_F, double tau, double eta_k, double alpha, double beta,
                 double delta = 1.0 / 6.0, double nu = 0.05);

  /// C_B, C_x, C1, C2, C4 > 0 plus the two nu-margins of the descent
  /// inequality; false with a reason when any fails.
  bool positive(std::string *why = nullptr) const;
  /// tau^2 L_F^2 <= delta_tilde
  bool tau_admissible(double delta_tilde) const { return tau * tau * L_F * L_F <= delta_tilde; }
  /// Largest tau with C_B >= 0 for this delta.
  static double tau_max(double L_F, double delta = 1.0 / 6.0);
  /// The momentum step eta (in units of 1/L_F) that makes the margins tight.
  static double theory_eta(double L_F, double tau, double alpha, double beta,
                           double delta = 1.0 / 6.0, double nu = 0.05);
};

enum class solver_variant { stom, storm };

/// Psi over a window (k-1, k, k+1):
///   L(k) - C1 dB(k+1) + C2 dB(k) - C3 dx(k+1) [+ C4 dx(k) for stom],
/// with dx(k) = ||x^k - x^{k-1}||^2 / 2 and dB likewise.
double lyapunov_value(const HashingProblem &p, const LyapunovConfig &cfg,
                      std::span<const Iterate> window, solver_variant v);
/// Same, given L(k) directly.
double lyapunov_value(double lagrangian_k, const LyapunovConfig &cfg,
                      std::span<const Iterate> window, solver_variant v);

/// Estimator record of one x-step.
struct XStep {
  Vec direction;   // G^k or D^k
  Vec eval_point;  // z^k for stom, x^k for storm
  index_list batch;
};

XStep step_x_stom(SolverState &s, const HashingProblem &p, const StoMParams &prm);
XStep step_x_storm(SolverState &s, const HashingProblem &p, const StoRMParams &prm);
/// B^{k+1} = B^k - tau (grad_B F(x^{k+1}, B^k) + Lambda^k)
void step_B(SolverState &s, const HashingProblem &p, double tau);
/// Same, with the outputs D(x^{k+1}) already evaluated.
void step_B(SolverState &s, const HashingProblem &p, const HashingProblem::OutputEval &ev,
            double tau);
/// Returns (2B^{k+1} - B^k) + tau (Lambda^k - Lambda^{k+1}), which lies in
/// dh*(Lambda^{k+1}).
Mat step_Lambda(SolverState &s, const WRegularizer<> &reg, double tau);

/// Largest entrywise distance of G to dh*(Lambda).
double membership_violation(const WRegularizer<> &reg, const Mat &G, const Mat &Lambda);

struct DiagnosticsRecord {
  static constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::size_t iter = 0;
  double lagrangian = nan;
  double psi = nan;  // Psi at the previous iterate (needs the current one)
  double dx_sq = nan, dB_sq = nan, dLam_sq = nan;
  double quant_error = nan;
  double sigma2 = nan;
  double lambda_inf = nan;
  double membership = nan;  // dual optimality identity violation
  double est_err_sq = nan;  // ||direction - full gradient at eval point||^2
  double plain_err_sq = nan;  // same for a fresh plain mini-batch gradient
  double stationarity() const { return dx_sq + dB_sq + dLam_sq; }
};

struct RunOptions {
  solver_variant variant = solver_variant::stom;
  StoMParams stom;
  StoRMParams storm;
  std::size_t T = 2000;
  std::uint64_t seed = 0;
  // 0: every iteration for T <= 1e4, else every ceil(T / 1e4)
  std::size_t log_every = 0;
  std::size_t full_diag_every = 10;  // in logged rows
  std::size_t probe_size = 64;
  bool track_estimator_error = false;
  bool keep_history = false;
  std::optional<LyapunovConfig> lyapunov;
  std::function<void(const DiagnosticsRecord &)> on_record;
};

struct RunResult {
  SolverState state;
  std::vector<DiagnosticsRecord> records;
  std::size_t iterations = 0;
  std::size_t R = 0;
  Iterate returned;  // the R-th iterate
  std::vector<Iterate> history;  // x^1 .. x^{T+1} when keep_history
  bool aborted = false;
  std::string abort_reason;
};

/// One DualHash run: x -> B -> Lambda per iteration. Non-finite values or a
/// Lagrangian above 1e6 times its initial magnitude abort the run.
RunResult run(const HashingProblem &p, Vec x0, const RunOptions &opt);

// ---- baselines on the unsplit objective ----

enum class baseline_kind { sgdm, spgd_wcr, dhn };

struct BaselineParams {
  double eta = 0.05;
  double momentum = 0.905;
  std::size_t batch = 32;
  double reg_weight = 0.05;  // lambda of the respective regularizer
  double tau = 0.01;         // spgd-wcr code step
  std::size_t T = 2000;
  std::uint64_t seed = 0;
  std::size_t log_every = 0;
  std::size_t full_diag_every = 10;
  std::function<void(const DiagnosticsRecord &)> on_record;
};

struct BaselineResult {
  Vec x;
  Mat B;  // spgd-wcr auxiliary codes; empty otherwise
  std::vector<DiagnosticsRecord> records;
  std::size_t iterations = 0;
  bool aborted = false;
  std::string abort_reason;
};

/// sgdm: momentum subgradient on f + lambda sum ||u|-1|.
/// spgd-wcr: momentum x-step on F, then B <- prox_{tau h_wc}(B - tau grad_B F).
/// dhn: momentum SGD on f + lambda sum log cosh(|u| - 1).
BaselineResult run_baseline(const HashingProblem &p, baseline_kind kind, Vec x0,
                            const BaselineParams &prm);

std::size_t default_log_every(std::size_t T);

}  // namespace dualhash

#endif  // DUALHASH_OPTIMIZER_HPP
