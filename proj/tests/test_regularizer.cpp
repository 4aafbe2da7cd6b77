#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dualhash/regularizer.hpp"

using namespace dualhash;

namespace {

const double inf = std::numeric_limits<double>::infinity();

Vec vec(std::initializer_list<double> v) {
  Vec out(Eigen::Index(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// penalties spelled out independently of the class
double w_pen(double z, double lambda) { return lambda * std::abs(std::abs(z) - 1.0); }
double conj_pen(double v, double lambda) { return std::abs(v) <= lambda ? std::abs(v) : inf; }

}  // namespace

TEST(HValue, Cases) {
  EXPECT_EQ(WRegularizer<>(0.05).value(vec({1, -1, 1})), 0.0);
  EXPECT_DOUBLE_EQ(WRegularizer<>(0.05).value(vec({0})), 0.05);
  EXPECT_DOUBLE_EQ(WRegularizer<>(0.1).value(vec({2, -2})), 0.1 * 1 + 0.1 * 1);
}

TEST(HValue, RejectsNonPositiveLambda) {
  EXPECT_THROW(WRegularizer<>(0.0), std::invalid_argument);
  EXPECT_THROW(WRegularizer<>(-1.0), std::invalid_argument);
}

TEST(HConj, Cases) {
  const WRegularizer<> r(0.05);
  EXPECT_EQ(r.conj_value(vec({0})).value(), 0.0);
  EXPECT_EQ(r.conj_value(vec({0.05})).value(), 0.05);
  EXPECT_TRUE(r.conj_value(vec({0.06})).is_infinite());
}

TEST(ExtScalar, RejectsNaN) {
  EXPECT_THROW(ExtScalar(std::nan("")), domain_error);
  EXPECT_TRUE(ExtScalar::infinity().is_infinite());
}

TEST(ProxConj, WorkedBranches) {
  const WRegularizer<> r(0.05);
  EXPECT_EQ(r.prox_conj(0.07, 0.01), 0.05);
  EXPECT_EQ(r.prox_conj(0.005, 0.01), 0.0);
  EXPECT_NEAR(r.prox_conj(0.03, 0.01), 0.02, 1e-17);
  EXPECT_NEAR(r.prox_conj(-0.03, 0.01), -0.02, 1e-17);
  EXPECT_EQ(r.prox_conj(-0.07, 0.01), -0.05);
}

TEST(ProxConj, MatchesOracle) {
  Rng rng(3);
  for (int t = 0; t < 300; ++t) {
    const double tau = rng.uniform(1e-3, 1.0), lambda = rng.uniform(1e-3, 1.0);
    const double y = rng.uniform(-2.0, 2.0);
    const double o = prox_oracle([&](double v) { return conj_pen(v, lambda); }, y, tau);
    EXPECT_NEAR(WRegularizer<>(lambda).prox_conj(y, tau), o, 1e-6) << y << " " << tau;
  }
}

TEST(ProxConj, RangeOddAndNonexpansive) {
  Rng rng(4);
  for (int t = 0; t < 500; ++t) {
    const double tau = rng.uniform(1e-3, 1.0), lambda = rng.uniform(1e-3, 1.0);
    const WRegularizer<> r(lambda);
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    const double pa = r.prox_conj(a, tau), pb = r.prox_conj(b, tau);
    EXPECT_LE(std::abs(pa), lambda);
    EXPECT_EQ(r.prox_conj(-a, tau), -pa);
    EXPECT_LE(std::abs(pa - pb), std::abs(a - b) + 1e-15);
  }
}

TEST(ProxConj, VectorRejectsBadTau) {
  EXPECT_THROW(WRegularizer<>(0.05).prox_conj(vec({0.1}), 0.0), std::invalid_argument);
}

TEST(ProxH, Cases) {
  const WRegularizer<> r(0.05);
  EXPECT_EQ(r.prox(1.0, 0.3), 1.0);
  EXPECT_DOUBLE_EQ(r.prox(0.0, 0.01), 0.01 * 0.05);
  EXPECT_DOUBLE_EQ(r.prox(-0.0, 0.01), 0.01 * 0.05);
  EXPECT_DOUBLE_EQ(r.prox(1.2, 0.01), 1.2 - 0.01 * 0.05);
}

TEST(ProxH, ZeroTieIsAGlobalMinimizer) {
  // +-tau*lambda both minimize; the returned point must attain the oracle's
  // minimal objective value
  const double lambda = 0.05, tau = 0.01;
  auto obj = [&](double v) { return w_pen(v, lambda) + v * v / (2 * tau); };
  const double o = prox_oracle([&](double v) { return w_pen(v, lambda); }, 0.0, tau);
  EXPECT_NEAR(obj(WRegularizer<>(lambda).prox(0.0, tau)), obj(o), 1e-9);
}

TEST(ProxH, MatchesOracle) {
  Rng rng(5);
  for (int t = 0; t < 300; ++t) {
    const double tau = rng.uniform(1e-3, 1.0), lambda = rng.uniform(1e-3, 1.0);
    const double y = rng.uniform(-2.0, 2.0);
    const double o = prox_oracle([&](double v) { return w_pen(v, lambda); }, y, tau);
    EXPECT_NEAR(WRegularizer<>(lambda).prox(y, tau), o, 1e-6) << y << " " << tau;
    EXPECT_EQ(WRegularizer<>(lambda).prox(-y, tau), -WRegularizer<>(lambda).prox(y, tau));
  }
}

TEST(SubdiffConj, Intervals) {
  const WRegularizer<> r(0.05);
  const auto at0 = r.subdiff_conj(0.0);
  EXPECT_EQ(at0.lo, -1.0);
  EXPECT_EQ(at0.hi, 1.0);
  const auto mid = r.subdiff_conj(0.02);
  EXPECT_EQ(mid.lo, 1.0);
  EXPECT_EQ(mid.hi, 1.0);
  const auto top = r.subdiff_conj(0.05);
  EXPECT_EQ(top.lo, 1.0);
  EXPECT_EQ(top.hi, inf);
  const auto bot = r.subdiff_conj(-0.05);
  EXPECT_EQ(bot.lo, -inf);
  EXPECT_EQ(bot.hi, -1.0);
  EXPECT_THROW(r.subdiff_conj(0.06), domain_error);
}

TEST(SubdiffConj, FenchelYoungEquality) {
  // b in dh*(v) iff h**(b) + h*(v) = b v, with h**(b) = lambda (|b| - 1)_+
  Rng rng(6);
  const double lambda = 0.3;
  const WRegularizer<> r(lambda);
  for (int t = 0; t < 2000; ++t) {
    const double v = rng.uniform() < 0.2 ? lambda * (rng.uniform() < 0.5 ? 1 : -1)
                                         : rng.uniform(-lambda, lambda);
    const double b = rng.uniform(-3, 3);
    const double gap = lambda * std::max(std::abs(b) - 1.0, 0.0) + conj_pen(v, lambda) - b * v;
    EXPECT_GE(gap, -1e-12);
    if (r.subdiff_conj(v).contains(b)) EXPECT_NEAR(gap, 0.0, 1e-12);
  }
}

TEST(FenchelYoung, InequalityWithNonconvexH) {
  Rng rng(7);
  const double lambda = 0.2;
  for (int t = 0; t < 2000; ++t) {
    const double b = rng.uniform(-3, 3), v = rng.uniform(-lambda, lambda);
    EXPECT_GE(w_pen(b, lambda) + conj_pen(v, lambda), b * v - 1e-15);
  }
}

TEST(WcReg, ValueAndFixedPoint) {
  EXPECT_EQ(wc_reg_value(vec({1, -1}), 0.3), 0.0);
  EXPECT_EQ(prox_wc(1.0, 0.1, 0.5), 1.0);
}

TEST(WcReg, MatchesOracleUnderCondition) {
  Rng rng(8);
  int tested = 0;
  while (tested < 300) {
    const double tau = rng.uniform(1e-3, 1.0), lambda = rng.uniform(1e-3, 1.0);
    if (!(2 * lambda * tau < 1.0)) continue;
    const double y = rng.uniform(-2.0, 2.0);
    const double o = prox_oracle([&](double v) { return lambda * std::abs(v * v - 1); }, y, tau);
    EXPECT_NEAR(prox_wc(y, tau, lambda), o, 1e-6);
    ++tested;
  }
}

TEST(WcReg, RejectsNonUniqueSubproblem) {
  EXPECT_THROW(prox_wc(vec({0.3}), 1.0, 0.6), std::invalid_argument);
  EXPECT_NO_THROW(prox_wc(vec({0.3}), 1.0, 0.4));
}

TEST(LogCosh, ValuesAndGradient) {
  Vec g;
  EXPECT_NEAR(logcosh_reg(vec({1, -1}), &g), 0.0, 1e-15);
  EXPECT_NEAR(logcosh_reg(vec({0}), nullptr), std::log(std::cosh(1.0)), 1e-14);
  logcosh_reg(vec({2}), &g);
  const double h = 1e-6;
  const double fd = (logcosh_reg(vec({2 + h}), nullptr) - logcosh_reg(vec({2 - h}), nullptr)) / (2 * h);
  EXPECT_NEAR(g[0], fd, 1e-8);
  EXPECT_NEAR(g[0], std::tanh(1.0), 1e-15);
  logcosh_reg(vec({0}), &g);
  EXPECT_NEAR(g[0], std::tanh(-1.0), 1e-15);  // sign(0) = +1
}

TEST(LogCosh, StableForLargeInputs) {
  EXPECT_NEAR(logcosh_reg(vec({1000}), nullptr), 999 - std::log(2.0), 1e-9);
}

TEST(ProxOracle, TrivialCases) {
  EXPECT_NEAR(prox_oracle([](double) { return 0.0; }, 0.7, 0.5), 0.7, 1e-9);
  EXPECT_NEAR(prox_oracle([](double v) { return w_pen(v, 0.05); }, 1.0, 0.01), 1.0, 1e-9);
  EXPECT_NEAR(prox_oracle([](double v) { return conj_pen(v, 0.05); }, 0.07, 0.01), 0.05, 1e-9);
}
