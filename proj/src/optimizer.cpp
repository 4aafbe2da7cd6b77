#include "dualhash/optimizer.hpp"

#include <cmath>
#include <sstream>

namespace dualhash {

SolverState init_state(const HashingProblem &p, Vec x0, std::uint64_t seed) {
  if (std::size_t(x0.size()) != p.net().num_params())
    throw dimension_error("init_state: x0 has wrong length");
  SolverState s{x0, x0, p.outputs(x0), Mat(), Mat(), std::nullopt, 1, Rng(seed)};
  s.B_prev = s.B;
  s.Lambda = Mat::Zero(s.B.rows(), s.B.cols());
  return s;
}

void StoMParams::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("stom: eta must be > 0");
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("stom: alpha must lie in [0, 1)");
  if (!(beta >= 0.0 && beta < 1.0))
    throw std::invalid_argument("stom: beta must lie in [0, 1)");
  if (!(tau > 0.0)) throw std::invalid_argument("stom: tau must be > 0");
  if (batch == 0) throw std::invalid_argument("stom: batch must be >= 1");
  if (!(lipschitz > 0.0)) throw std::invalid_argument("stom: lipschitz must be > 0");
}

double StoRMParams::eta_k() const {
  return eta_base / (lipschitz_tilde * std::cbrt(double(T)));
}

double StoRMParams::rho_k() const {
  const double t13 = std::cbrt(double(T));
  return 8.0 * rho_base * eta_base * eta_base / (t13 * t13);
}

void StoRMParams::validate() const {
  if (!(eta_base > 0.0)) throw std::invalid_argument("storm: eta must be > 0");
  if (!(rho_base > 0.0)) throw std::invalid_argument("storm: rho must be > 0");
  if (!(tau > 0.0)) throw std::invalid_argument("storm: tau must be > 0");
  if (b1 == 0 || b == 0) throw std::invalid_argument("storm: batches must be >= 1");
  if (T == 0) throw std::invalid_argument("storm: T must be >= 1");
  if (!(lipschitz_tilde > 0.0))
    throw std::invalid_argument("storm: lipschitz must be > 0");
  const double r = rho_k();
  if (!(r > 0.0 && r <= 1.0))
    throw std::invalid_argument("storm: rho_k = " + std::to_string(r) +
                                " outside (0, 1]");
}

LyapunovConfig::LyapunovConfig(double L, double t, double ek, double a, double b,
                               double d, double n)
    : L_F(L), tau(t), eta_k(ek), alpha(a), beta(b), delta(d), nu(n) {
  if (!(L_F > 0.0 && tau > 0.0 && delta > 0.0 && nu > 0.0))
    throw std::invalid_argument("LyapunovConfig: L_F, tau, delta, nu must be > 0");
  const double it = 1.0 / tau;
  K1 = 3.0 * delta * it;
  K2 = 2.0 * it - L_F - 3.0 * delta * tau * (it + L_F) * (it + L_F);
  K3 = tau * L_F * L_F / delta;
  K4 = 3.0 * delta * tau * L_F * L_F;
  K5 = eta_k > 0.0 ? (1.0 - alpha) / eta_k - 2.0 * L_F : 0.0;
  K6 = eta_k > 0.0 ? alpha / eta_k + 2.0 * L_F * beta * beta : 0.0;
  L_bar = 2.0 * L_F + K3 + K4;
  L_tilde = L_F + K3 + K4;
  C1 = K1;
  C2 = 0.5 * (K2 - K1 + K3);
  C3 = K4;
  C4 = alpha > 0.0 ? (L_bar + 2.0 * L_F * beta * beta / alpha) / (1.0 - 2.0 * alpha - nu)
                   : std::numeric_limits<double>::infinity();
  C_B = 0.5 * (K2 - K3 - K1);
  C_x = nu * C4;
}

bool LyapunovConfig::positive(std::string *why) const {
  auto fail = [&](const std::string &msg) {
    if (why) *why = msg;
    return false;
  };
  if (!(alpha > 0.0 && alpha < 0.5 * (1.0 - nu)))
    return fail("alpha outside (0, (1 - nu)/2)");
  if (!(beta > 0.0 && beta < 1.0)) return fail("beta outside (0, 1)");
  if (!(C1 > 0.0)) return fail("C1 <= 0");
  if (!(C2 > 0.0)) return fail("C2 <= 0");
  if (!(C_B > 0.0)) return fail("C_B <= 0 (tau too large for L_F)");
  if (!(C4 > 0.0 && std::isfinite(C4))) return fail("C4 not positive");
  if (!(C_x > 0.0)) return fail("C_x <= 0");
  // margins of the descent inequality, with a little room for rounding
  const double slack = 1e-9 * (std::abs(K5) + C4);
  if (K5 - K3 - C3 - C4 < nu * C4 - slack) return fail("K5 - K3 - C3 - C4 < nu C4");
  if (C4 - K6 < nu * C4 - slack) return fail("C4 - K6 < nu C4");
  return true;
}

double LyapunovConfig::tau_max(double L_F, double delta) {
  // C_B = 0  <=>  (3d + 1/d) t^2 + (6d + 1) t - (2 - 6d) = 0 with t = tau L_F
  const double a = 3.0 * delta + 1.0 / delta, b = 6.0 * delta + 1.0,
               c = 2.0 - 6.0 * delta;
  if (!(c > 0.0)) return 0.0;
  return (-b + std::sqrt(b * b + 4.0 * a * c)) / (2.0 * a) / L_F;
}

double LyapunovConfig::theory_eta(double L_F, double tau, double alpha, double beta,
                                  double delta, double nu) {
  const LyapunovConfig c(L_F, tau, 1.0, alpha, beta, delta, nu);
  return 0.5 * (1.0 - 2.0 * alpha - nu) /
         (c.L_bar / L_F + (1.0 + nu) * beta * beta / ((1.0 - alpha) * alpha));
}

double lyapunov_value(const HashingProblem &p, const LyapunovConfig &cfg,
                      std::span<const Iterate> w, solver_variant v) {
  if (w.size() != 3)
    throw std::invalid_argument("lyapunov_value: need the window (k-1, k, k+1)");
  const auto L = p.lagrangian_value(w[1].x, w[1].B, w[1].Lambda);
  if (!L) throw domain_error("lyapunov_value: Lambda^k is dual infeasible");
  return lyapunov_value(*L, cfg, w, v);
}

double lyapunov_value(double L, const LyapunovConfig &cfg, std::span<const Iterate> w,
                      solver_variant v) {
  if (w.size() != 3)
    throw std::invalid_argument("lyapunov_value: need the window (k-1, k, k+1)");
  const double dB_next = 0.5 * (w[2].B - w[1].B).squaredNorm();
  const double dB_cur = 0.5 * (w[1].B - w[0].B).squaredNorm();
  const double dx_next = 0.5 * (w[2].x - w[1].x).squaredNorm();
  const double dx_cur = 0.5 * (w[1].x - w[0].x).squaredNorm();
  double psi = L - cfg.C1 * dB_next + cfg.C2 * dB_cur - cfg.C3 * dx_next;
  if (v == solver_variant::stom && dx_cur > 0.0) psi += cfg.C4 * dx_cur;
  return psi;
}

namespace {

bool full_batch(std::size_t batch, std::size_t n) { return batch >= n; }

Vec batch_grad(const HashingProblem &p, const Vec &x, const Mat &B,
               const index_list &idx) {
  return idx.empty() ? p.grad_x_F(x, B) : p.grad_x_F_minibatch(x, B, idx);
}

}  // namespace

XStep step_x_stom(SolverState &s, const HashingProblem &p, const StoMParams &prm) {
  const Vec disp = s.x - s.x_prev;
  XStep r;
  r.eval_point = s.x + prm.beta * disp;
  const Vec y = s.x + prm.alpha * disp;
  if (!full_batch(prm.batch, p.n())) r.batch = sample_indices(s.rng, p.n(), prm.batch);
  r.direction = batch_grad(p, r.eval_point, s.B, r.batch);
  s.x_prev = s.x;
  s.x = y - prm.step() * r.direction;
  return r;
}

XStep step_x_storm(SolverState &s, const HashingProblem &p, const StoRMParams &prm) {
  XStep r;
  r.eval_point = s.x;
  if (!s.storm_d) {
    if (!full_batch(prm.b1, p.n())) r.batch = sample_indices(s.rng, p.n(), prm.b1);
    r.direction = batch_grad(p, s.x, s.B, r.batch);
  } else {
    if (!full_batch(prm.b, p.n())) r.batch = sample_indices(s.rng, p.n(), prm.b);
    // the same batch at the current and the previous iterate
    const Vec g_now = batch_grad(p, s.x, s.B, r.batch);
    const Vec g_old = batch_grad(p, s.x_prev, s.B_prev, r.batch);
    r.direction = g_now + (1.0 - prm.rho_k()) * (*s.storm_d - g_old);
  }
  s.storm_d = r.direction;
  s.x_prev = s.x;
  s.x = s.x - prm.eta_k() * r.direction;
  return r;
}

void step_B(SolverState &s, const HashingProblem &p, double tau) {
  step_B(s, p, p.eval_outputs(s.x), tau);
}

void step_B(SolverState &s, const HashingProblem &p, const HashingProblem::OutputEval &ev,
            double tau) {
  Mat next = s.B - tau * (p.grad_B_F(ev, s.B) + s.Lambda);
  s.B_prev = std::move(s.B);
  s.B = std::move(next);
}

Mat step_Lambda(SolverState &s, const WRegularizer<> &reg, double tau) {
  const Mat ext = 2.0 * s.B - s.B_prev;
  Mat next = reg.prox_conj(s.Lambda + ext / tau, 1.0 / tau);
  Mat G = ext + tau * (s.Lambda - next);
  s.Lambda = std::move(next);
  return G;
}

double membership_violation(const WRegularizer<> &reg, const Mat &G, const Mat &Lambda) {
  check_same_size(G.size(), Lambda.size(), "membership_violation");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < G.size(); ++i)
    worst = std::max(worst, reg.subdiff_conj(Lambda.data()[i]).distance(G.data()[i]));
  return worst;
}

std::size_t default_log_every(std::size_t T) {
  return T <= 10000 ? 1 : (T + 9999) / 10000;
}

namespace {

bool finite_all(const Vec &x, const Mat &B, const Mat &L) {
  return x.allFinite() && B.allFinite() && L.allFinite();
}

index_list probe_rows(std::size_t n, std::size_t size, std::uint64_t seed) {
  Rng r = Rng(seed).split(0x5eed);
  return sample_indices(r, n, std::min(size, n));
}

}  // namespace

RunResult run(const HashingProblem &p, Vec x0, const RunOptions &opt) {
  if (opt.T == 0) throw std::invalid_argument("run: T must be >= 1");
  if (opt.variant == solver_variant::stom)
    opt.stom.validate();
  else
    opt.storm.validate();
  const double tau =
      opt.variant == solver_variant::stom ? opt.stom.tau : opt.storm.tau;
  const std::size_t every = opt.log_every ? opt.log_every : default_log_every(opt.T);

  RunResult res;
  res.state = init_state(p, std::move(x0), opt.seed);
  SolverState &s = res.state;
  // R and the error probes come from their own streams so they never shift
  // the mini-batch sequence
  Rng r_rng = Rng(opt.seed).split(0xa11);
  res.R = 2 + std::size_t(r_rng.uniform_index(opt.T));
  Rng probe_rng = Rng(opt.seed).split(0xe5);
  const index_list probe = probe_rows(p.n(), opt.probe_size, opt.seed);
  const std::size_t plain_batch =
      opt.variant == solver_variant::stom ? opt.stom.batch : opt.storm.b;

  auto snapshot = [&] { return Iterate{s.x, s.B, s.Lambda}; };
  double lag_prev = p.lagrangian_value(p.eval_outputs(s.x), s.B, s.Lambda).value();
  const double guard = 1e6 * std::max(std::abs(lag_prev), 1e-12);

  std::vector<Iterate> window{snapshot(), snapshot()};  // (k-1, k)
  if (opt.keep_history) res.history.push_back(snapshot());
  std::size_t logged = 0;

  for (std::size_t it = 1; it <= opt.T; ++it) {
    XStep xs = opt.variant == solver_variant::stom ? step_x_stom(s, p, opt.stom)
                                                   : step_x_storm(s, p, opt.storm);
    std::optional<HashingProblem::OutputEval> ev;
    const bool x_finite = s.x.allFinite();
    if (x_finite) {
      ev = p.eval_outputs(s.x);
      step_B(s, p, *ev, tau);
    }
    const Mat G = x_finite ? step_Lambda(s, p.reg(), tau) : Mat();
    ++s.k;
    res.iterations = it;
    if (s.k == res.R) res.returned = snapshot();
    if (opt.keep_history) res.history.push_back(snapshot());

    const bool finite = x_finite && finite_all(s.x, s.B, s.Lambda);
    std::optional<double> lag;
    if (finite) lag = p.lagrangian_value(*ev, s.B, s.Lambda);
    if (!finite || !lag || !std::isfinite(*lag) || std::abs(*lag) > guard) {
      std::ostringstream os;
      os << "aborted at iteration " << it << ": ";
      if (!finite)
        os << "non-finite iterate";
      else if (!lag)
        os << "dual infeasible Lambda";
      else
        os << "Lagrangian " << *lag << " beyond guard " << guard;
      res.aborted = true;
      res.abort_reason = os.str();
      DiagnosticsRecord rec;
      rec.iter = it;
      if (lag) rec.lagrangian = *lag;
      res.records.push_back(rec);
      if (opt.on_record) opt.on_record(rec);
      return res;
    }
    window.push_back(snapshot());
    if (window.size() > 3) window.erase(window.begin());
    const double lag_k = lag_prev;
    lag_prev = *lag;

    if (it % every != 0 && it != opt.T) continue;
    DiagnosticsRecord rec;
    rec.iter = it;
    rec.lagrangian = *lag;
    const auto st = stationarity(p, p.grad_x_F(s.x, *ev, s.B), p.grad_B_F(*ev, s.B), s.B,
                                 s.Lambda);
    rec.dx_sq = st.dx_sq;
    rec.dB_sq = st.dB_sq;
    rec.dLam_sq = st.dLam_sq;
    rec.lambda_inf = s.Lambda.size() ? s.Lambda.cwiseAbs().maxCoeff() : 0.0;
    rec.membership = membership_violation(p.reg(), G, s.Lambda);
    if (opt.lyapunov) rec.psi = lyapunov_value(lag_k, *opt.lyapunov, window, opt.variant);
    if (logged % opt.full_diag_every == 0) {
      rec.quant_error = quantization_error(ev->U);
      rec.sigma2 = sigma2_hat(p, s.x, s.B, probe);
    }
    if (opt.track_estimator_error) {
      // previous iterate pair, where the direction was evaluated
      const Iterate &prev = window[1];
      const Vec full = p.grad_x_F(xs.eval_point, prev.B);
      rec.est_err_sq = (xs.direction - full).squaredNorm();
      if (!full_batch(plain_batch, p.n())) {
        const auto idx = sample_indices(probe_rng, p.n(), plain_batch);
        rec.plain_err_sq =
            (p.grad_x_F_minibatch(xs.eval_point, prev.B, idx) - full).squaredNorm();
      } else {
        rec.plain_err_sq = 0.0;
      }
    }
    ++logged;
    res.records.push_back(rec);
    if (opt.on_record) opt.on_record(rec);
  }
  if (res.returned.x.size() == 0) res.returned = snapshot();
  return res;
}

}  // namespace dualhash
