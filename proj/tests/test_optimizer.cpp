#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "dualhash/optimizer.hpp"

using namespace dualhash;

namespace {

HashingProblem make_problem(std::uint64_t seed, std::size_t n = 8, double gamma = 2.0,
                            double lambda = 0.1,
                            output_activation out = output_activation::tanh) {
  Rng rng(seed);
  Mat A(Eigen::Index(n), 3);
  for (auto &v : A.reshaped()) v = rng.normal();
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({i, j, int((i + j) % 2)});
  return HashingProblem(A, MlpSpec{{3, 5, 4}, out}, PairwiseLossSpec{0.8, pairs}, gamma, lambda);
}

Vec start_point(const HashingProblem &p, std::uint64_t seed) {
  Rng rng(seed);
  return p.net().init_params(rng);
}

// soft-threshold by s, then clip to [-lambda, lambda]
double conj_prox_by_hand(double y, double s, double lambda) {
  const double t = std::abs(y) <= s ? 0.0 : y - (y > 0 ? s : -s);
  return std::clamp(t, -lambda, lambda);
}

std::vector<Iterate> tiny_window() {
  auto it = [](double x0, double b0) {
    Vec x(2);
    x << x0, 0.0;
    Mat B(1, 2);
    B << b0, 0.0;
    return Iterate{x, B, Mat::Zero(1, 2)};
  };
  return {it(0.0, 0.0), it(1.0, 2.0), it(3.0, 5.0)};
}

}  // namespace

TEST(InitState, CodesStartAtOutputs) {
  const auto p = make_problem(1);
  const Vec x0 = start_point(p, 1);
  const auto s = init_state(p, x0, 7);
  EXPECT_EQ(s.x, x0);
  EXPECT_EQ(s.x_prev, x0);
  EXPECT_EQ(s.B, p.outputs(x0));
  EXPECT_EQ(s.B_prev, s.B);
  EXPECT_EQ(s.Lambda.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.k, 1u);
  EXPECT_THROW(init_state(p, Vec::Zero(3), 0), dimension_error);
}

TEST(Params, Validation) {
  StoMParams m;
  EXPECT_NO_THROW(m.validate());
  m.alpha = 1.0;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m = StoMParams{};
  m.batch = 0;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  StoRMParams r;
  r.rho_base = 10.0;  // rho_k = 80 / T^(2/3), about 0.5 at T = 2000
  EXPECT_NO_THROW(r.validate());
  r.T = 8;  // 80 / 4 = 20
  EXPECT_THROW(r.validate(), std::invalid_argument);
}

TEST(StoRMParams, ScheduleValues) {
  StoRMParams r;
  r.eta_base = 2.0;
  r.rho_base = 0.5;
  r.T = 1000;
  r.lipschitz_tilde = 4.0;
  EXPECT_DOUBLE_EQ(r.eta_k(), 2.0 / (4.0 * 10.0));
  EXPECT_DOUBLE_EQ(r.rho_k(), 8.0 * 0.5 * 4.0 / 100.0);
}

TEST(StepX, StoMMatchesHandUpdate) {
  const auto p = make_problem(2);
  auto s = init_state(p, start_point(p, 2), 0);
  Rng rng(9);
  for (auto &v : s.x_prev) v += 0.05 * rng.normal();
  StoMParams prm;
  prm.alpha = 0.3;
  prm.beta = 0.6;
  prm.eta = 0.2;
  prm.lipschitz = 2.0;
  prm.batch = 100;  // full batch
  const Vec x = s.x, xp = s.x_prev;
  const Vec z = x + 0.6 * (x - xp);
  const Vec want = x + 0.3 * (x - xp) - 0.1 * p.grad_x_F(z, s.B);
  const auto r = step_x_stom(s, p, prm);
  EXPECT_TRUE(r.batch.empty());
  EXPECT_EQ(r.eval_point, z);
  EXPECT_LT((s.x - want).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(s.x_prev, x);
}

TEST(StepX, StoMMiniBatchUsesDrawnBatch) {
  const auto p = make_problem(3);
  auto s = init_state(p, start_point(p, 3), 4);
  StoMParams prm;
  prm.batch = 3;
  const Vec x = s.x;
  const auto r = step_x_stom(s, p, prm);
  ASSERT_EQ(r.batch.size(), 3u);
  Rng replay(4);
  EXPECT_EQ(r.batch, sample_indices(replay, p.n(), 3));
  const Vec want = x - prm.step() * p.grad_x_F_minibatch(x, s.B_prev, r.batch);
  EXPECT_LT((s.x - want).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(StepX, FullBatchStormIsGradientDescent) {
  // with full batches the recursive correction cancels exactly
  const auto p = make_problem(4);
  auto s = init_state(p, start_point(p, 4), 0);
  StoRMParams prm;
  prm.b1 = prm.b = 100;
  prm.rho_base = 0.1;
  for (int k = 0; k < 5; ++k) {
    const Vec g = p.grad_x_F(s.x, s.B);
    const Vec x = s.x;
    const auto r = step_x_storm(s, p, prm);
    EXPECT_LT((r.direction - g).norm(), 1e-12 * std::max(1.0, g.norm()));
    EXPECT_LT((s.x - (x - prm.eta_k() * r.direction)).norm(), 1e-15);
    step_B(s, p, 0.01);
    step_Lambda(s, p.reg(), 0.01);
  }
}

TEST(StepX, StormRecursionByHand) {
  const auto p = make_problem(5);
  auto s = init_state(p, start_point(p, 5), 11);
  StoRMParams prm;
  prm.b1 = 4;
  prm.b = 2;
  prm.rho_base = 0.3;
  step_x_storm(s, p, prm);
  step_B(s, p, 0.01);
  step_Lambda(s, p.reg(), 0.01);
  const Vec d_old = *s.storm_d;
  const Vec x = s.x, xp = s.x_prev;
  const Mat B = s.B, Bp = s.B_prev;
  const auto r = step_x_storm(s, p, prm);
  ASSERT_EQ(r.batch.size(), 2u);
  const Vec want = p.grad_x_F_minibatch(x, B, r.batch) +
                   (1.0 - prm.rho_k()) * (d_old - p.grad_x_F_minibatch(xp, Bp, r.batch));
  EXPECT_LT((r.direction - want).norm(), 1e-14);
}

TEST(StepB, MatchesFormula) {
  const auto p = make_problem(6);
  auto s = init_state(p, start_point(p, 6), 0);
  Rng rng(1);
  for (auto &v : s.B.reshaped()) v += rng.normal();
  for (auto &v : s.Lambda.reshaped()) v = rng.uniform(-0.1, 0.1);
  const Mat B = s.B;
  const Mat want = B - 0.3 * (2.0 / 8.0 * (B - p.outputs(s.x)) + s.Lambda);
  step_B(s, p, 0.3);
  EXPECT_LT((s.B - want).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(s.B_prev, B);
}

TEST(StepLambda, ClosedFormAndMembership) {
  const auto p = make_problem(7);
  Rng rng(2);
  for (double tau : {0.01, 0.5, 3.0}) {
    auto s = init_state(p, start_point(p, 7), 0);
    for (auto &v : s.B.reshaped()) v = rng.uniform(-2, 2);
    for (auto &v : s.B_prev.reshaped()) v = rng.uniform(-2, 2);
    for (auto &v : s.Lambda.reshaped()) v = rng.uniform(-0.1, 0.1);
    const Mat L = s.Lambda, ext = 2.0 * s.B - s.B_prev;
    const Mat G = step_Lambda(s, p.reg(), tau);
    for (Eigen::Index k = 0; k < L.size(); ++k) {
      const double want = conj_prox_by_hand(L.reshaped()(k) + ext.reshaped()(k) / tau, 1.0 / tau, 0.1);
      EXPECT_NEAR(s.Lambda.reshaped()(k), want, 1e-15);
    }
    EXPECT_LT((G - (ext + tau * (L - s.Lambda))).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT(membership_violation(p.reg(), G, s.Lambda), 1e-12);
  }
}

TEST(Membership, DistancesByCase) {
  const WRegularizer<> reg(0.1);
  Mat G(1, 4), L(1, 4);
  G << 0.5, 2.0, 0.5, -3.0;
  L << 0.0, 0.1, 0.05, -0.1;
  // interior 0: [-1,1] contains 0.5; top: [1,inf) contains 2; mid: {1}, gap 0.5; bottom fine
  EXPECT_DOUBLE_EQ(membership_violation(reg, G, L), 0.5);
  EXPECT_THROW(membership_violation(reg, Mat::Zero(1, 2), Mat::Zero(1, 3)), dimension_error);
}

TEST(Lyapunov, WindowByHand) {
  const auto w = tiny_window();
  const LyapunovConfig c(1.0, 0.1, 0.05, 0.2, 0.2);
  // dB(k+1) = 9/2, dB(k) = 2, dx(k+1) = 2, dx(k) = 1/2
  const double want_storm = 10.0 - c.C1 * 4.5 + c.C2 * 2.0 - c.C3 * 2.0;
  EXPECT_DOUBLE_EQ(lyapunov_value(10.0, c, w, solver_variant::storm), want_storm);
  EXPECT_DOUBLE_EQ(lyapunov_value(10.0, c, w, solver_variant::stom), want_storm + c.C4 * 0.5);
  EXPECT_THROW(lyapunov_value(10.0, c, std::span(w).first(2), solver_variant::stom),
               std::invalid_argument);
}

TEST(Lyapunov, TauMaxZeroesCB) {
  for (double L : {0.5, 1.0, 7.0}) {
    const double t = LyapunovConfig::tau_max(L);
    EXPECT_NEAR(LyapunovConfig(L, t, 0.0, 0.0, 0.0).C_B, 0.0, 1e-9 / t);
    EXPECT_GT(LyapunovConfig(L, 0.9 * t, 0.0, 0.0, 0.0).C_B, 0.0);
    EXPECT_LT(LyapunovConfig(L, 1.1 * t, 0.0, 0.0, 0.0).C_B, 0.0);
  }
}

TEST(Lyapunov, TheoryStepIsPositive) {
  const double L = 2.0, tau = 0.5 * LyapunovConfig::tau_max(L);
  const double eta = LyapunovConfig::theory_eta(L, tau, 0.2, 0.2);
  std::string why;
  EXPECT_TRUE(LyapunovConfig(L, tau, eta / L, 0.2, 0.2).positive(&why)) << why;
  EXPECT_FALSE(LyapunovConfig(L, tau, 2.0 * eta / L, 0.2, 0.2).positive());
  EXPECT_FALSE(LyapunovConfig(L, tau, eta / L, 0.48, 0.2).positive(&why));
  EXPECT_NE(why.find("alpha"), std::string::npos);
}

TEST(Run, DeterministicAndShaped) {
  const auto p = make_problem(8);
  RunOptions opt;
  opt.T = 40;
  opt.seed = 3;
  opt.stom.batch = 3;
  opt.keep_history = true;
  const auto a = run(p, start_point(p, 8), opt), b = run(p, start_point(p, 8), opt);
  EXPECT_EQ(a.state.x, b.state.x);
  EXPECT_EQ(a.state.Lambda, b.state.Lambda);
  EXPECT_EQ(a.records.size(), 40u);
  EXPECT_EQ(a.history.size(), 41u);
  EXPECT_GE(a.R, 2u);
  EXPECT_LE(a.R, 41u);
  EXPECT_EQ(a.returned.x, a.history[a.R - 1].x);
  EXPECT_FALSE(a.aborted);
  for (const auto &h : a.history) EXPECT_LE(h.Lambda.cwiseAbs().maxCoeff(), p.reg().lambda());
  for (const auto &r : a.records) EXPECT_LT(r.membership, 1e-10);
  EXPECT_FALSE(std::isnan(a.records[0].quant_error));
  EXPECT_TRUE(std::isnan(a.records[1].quant_error));
}

TEST(Run, LogEvery) {
  EXPECT_EQ(default_log_every(10000), 1u);
  EXPECT_EQ(default_log_every(10001), 2u);
  const auto p = make_problem(9);
  RunOptions opt;
  opt.T = 25;
  opt.log_every = 10;
  const auto r = run(p, start_point(p, 9), opt);
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(r.records[2].iter, 25u);
}

TEST(Run, DivergenceAborts) {
  const auto p = make_problem(10, 8, 2.0, 0.1, output_activation::identity);
  RunOptions opt;
  opt.T = 500;
  opt.stom.eta = 1e4;
  const auto r = run(p, start_point(p, 10), opt);
  EXPECT_TRUE(r.aborted);
  EXPECT_NE(r.abort_reason.find("aborted at iteration"), std::string::npos);
  EXPECT_LT(r.iterations, 500u);
}

TEST(Run, FullBatchPlainStepsDecreaseLagrangian) {
  const auto p = make_problem(11);
  RunOptions opt;
  opt.T = 100;
  opt.stom = {0.05, 0.0, 0.0, 0.01, 100, 1.0};
  const auto r = run(p, start_point(p, 11), opt);
  EXPECT_LT(r.records.back().lagrangian, r.records.front().lagrangian);
}

TEST(Baseline, SgdmWithoutRegularizerIsGradientStep) {
  const auto p = make_problem(12);
  const Vec x0 = start_point(p, 12);
  BaselineParams prm;
  prm.T = 1;
  prm.batch = 100;
  prm.reg_weight = 0.0;
  prm.eta = 0.3;
  const auto r = run_baseline(p, baseline_kind::sgdm, x0, prm);
  // penalty gradient vanishes at B = D(x)
  const Vec want = x0 - 0.3 * p.grad_x_F(x0, p.outputs(x0));
  EXPECT_LT((r.x - want).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Baseline, FullBatchStepFollowsObjectiveGradient) {
  const auto p = make_problem(13);
  const Vec x0 = start_point(p, 13);
  for (auto kind : {baseline_kind::sgdm, baseline_kind::dhn}) {
    BaselineParams prm;
    prm.T = 1;
    prm.batch = 100;
    prm.reg_weight = 0.2;
    prm.eta = 1.0;
    auto obj = [&](const Vec &x) {
      const Mat U = p.outputs(x);
      double reg = 0;
      for (double u : U.reshaped())
        reg += kind == baseline_kind::sgdm ? std::abs(std::abs(u) - 1.0)
                                           : std::log(std::cosh(std::abs(u) - 1.0));
      return pairwise_loss(p.loss(), U, nullptr) + 0.2 * reg;
    };
    Vec fd(x0.size());
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < x0.size(); ++k) {
      Vec xp = x0, xm = x0;
      xp[k] += h;
      xm[k] -= h;
      fd[k] = (obj(xp) - obj(xm)) / (2 * h);
    }
    const auto r = run_baseline(p, kind, x0, prm);
    EXPECT_LT(((x0 - r.x) - fd).norm() / fd.norm(), 1e-6);
    EXPECT_NEAR(r.records[0].lagrangian, obj(r.x), 1e-12);
  }
}

TEST(Baseline, SpgdCodeStep) {
  const auto p = make_problem(14);
  const Vec x0 = start_point(p, 14);
  BaselineParams prm;
  prm.T = 1;
  prm.batch = 100;
  prm.momentum = 0.0;
  prm.tau = 0.4;
  prm.reg_weight = 0.0;
  const auto r0 = run_baseline(p, baseline_kind::spgd_wcr, x0, prm);
  const Mat B0 = p.outputs(x0);
  const Vec x1 = x0 - prm.eta * p.grad_x_F(x0, B0);
  EXPECT_LT((r0.x - x1).cwiseAbs().maxCoeff(), 1e-15);
  const Mat want0 = B0 - 0.4 * p.grad_B_F(x1, B0);
  EXPECT_LT((r0.B - want0).cwiseAbs().maxCoeff(), 1e-15);
  prm.reg_weight = 0.5;
  const auto r1 = run_baseline(p, baseline_kind::spgd_wcr, x0, prm);
  EXPECT_LT((r1.B - prox_wc(want0, 0.4, 0.5)).cwiseAbs().maxCoeff(), 1e-15);
  prm.reg_weight = 2.0;  // 2 lambda tau >= 1
  EXPECT_THROW(run_baseline(p, baseline_kind::spgd_wcr, x0, prm), std::invalid_argument);
}

TEST(Baseline, Validation) {
  const auto p = make_problem(15);
  BaselineParams prm;
  prm.momentum = 1.0;
  EXPECT_THROW(run_baseline(p, baseline_kind::sgdm, start_point(p, 15), prm), std::invalid_argument);
  prm = BaselineParams{};
  prm.T = 0;
  EXPECT_THROW(run_baseline(p, baseline_kind::dhn, start_point(p, 15), prm), std::invalid_argument);
}
