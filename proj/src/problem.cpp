#include "dualhash/problem.hpp"

#include <cmath>

namespace dualhash {

HashingProblem::HashingProblem(Mat inputs, MlpSpec spec, PairwiseLossSpec loss,
                               double gamma, double lambda)
    : inputs_(std::move(inputs)),
      net_(std::move(spec)),
      loss_(std::move(loss)),
      gamma_(gamma),
      reg_(lambda) {
  if (!(gamma_ > 0.0)) throw std::invalid_argument("gamma must be > 0");
  if (inputs_.rows() < 2) throw std::invalid_argument("need n >= 2 samples");
  if (std::size_t(inputs_.cols()) != net_.spec().input_width())
    throw dimension_error("input width does not match the network");
  loss_.validate(n());
  incident_.resize(n());
  for (std::size_t k = 0; k < loss_.pairs.size(); ++k) {
    incident_[loss_.pairs[k].i].push_back(k);
    incident_[loss_.pairs[k].j].push_back(k);
  }
}

void HashingProblem::check_shapes(const Vec &x, const Mat &B) const {
  check_same_size(x.size(), Eigen::Index(net_.num_params()), "parameters");
  if (std::size_t(B.rows()) != n() || std::size_t(B.cols()) != code_length())
    throw dimension_error("B must be n x d");
}

double HashingProblem::loss_value(const Vec &x) const {
  return pairwise_loss(loss_, outputs(x), nullptr);
}

double HashingProblem::penalty_value(const Vec &x, const Mat &B) const {
  check_shapes(x, B);
  return gamma_ / (2.0 * double(n())) * (outputs(x) - B).squaredNorm();
}

double HashingProblem::F_value(const Vec &x, const Mat &B) const {
  check_shapes(x, B);
  OutputEval ev;
  ev.U = outputs(x);
  ev.loss = pairwise_loss(loss_, ev.U, nullptr);
  return F_value(ev, B);
}

double HashingProblem::primal_objective(const Vec &x) const {
  const Mat U = outputs(x);
  return pairwise_loss(loss_, U, nullptr) + reg_.value(U);
}

Mat HashingProblem::grad_B_F(const Vec &x, const Mat &B) const {
  check_shapes(x, B);
  OutputEval ev;
  ev.U = outputs(x);
  return grad_B_F(ev, B);
}

HashingProblem::OutputEval HashingProblem::eval_outputs(const Vec &x) const {
  OutputEval ev;
  ev.U = net_.forward(x, inputs_, &ev.cache);
  ev.loss = pairwise_loss(loss_, ev.U, &ev.dloss);
  return ev;
}

double HashingProblem::F_value(const OutputEval &ev, const Mat &B) const {
  if (B.rows() != ev.U.rows() || B.cols() != ev.U.cols())
    throw dimension_error("B must be n x d");
  return ev.loss + gamma_ / (2.0 * double(n())) * (ev.U - B).squaredNorm();
}

Mat HashingProblem::grad_B_F(const OutputEval &ev, const Mat &B) const {
  if (B.rows() != ev.U.rows() || B.cols() != ev.U.cols())
    throw dimension_error("B must be n x d");
  return gamma_ / double(n()) * (B - ev.U);
}

Vec HashingProblem::grad_x_F(const Vec &x, const OutputEval &ev, const Mat &B) const {
  check_shapes(x, B);
  Mat cot = ev.dloss;
  const double inv_n = 1.0 / double(n());
  for (Eigen::Index j = 0; j < cot.rows(); ++j)
    cot.row(j) += inv_n * Eigen::RowVectorXd(gamma_ * (ev.U.row(j) - B.row(j)));
  return net_.backward(x, ev.cache, cot);
}

std::optional<double> HashingProblem::lagrangian_value(const OutputEval &ev,
                                                       const Mat &B,
                                                       const Mat &Lambda) const {
  if (B.rows() != Lambda.rows() || B.cols() != Lambda.cols())
    throw dimension_error("Lambda must have the shape of B");
  const ExtScalar conj = reg_.conj_value(Lambda);
  if (conj.is_infinite()) return std::nullopt;
  return F_value(ev, B) + B.cwiseProduct(Lambda).sum() - conj.value();
}

Vec HashingProblem::grad_x_F(const Vec &x, const Mat &B) const {
  check_shapes(x, B);
  return grad_x_F(x, eval_outputs(x), B);
}

Vec HashingProblem::grad_x_F_minibatch(const Vec &x, const Mat &B,
                                       const index_list &idx) const {
  check_shapes(x, B);
  if (idx.empty()) throw std::invalid_argument("empty mini-batch");
  return grad_x_composite(x, idx, [&](std::size_t j, const Eigen::RowVectorXd &u) {
    return Eigen::RowVectorXd(gamma_ * (u - B.row(Eigen::Index(j))));
  });
}

Vec HashingProblem::grad_x_composite(const Vec &x, const index_list &idx,
                                     const row_grad &dr) const {
  if (idx.empty()) {
    Mlp::cache c;
    const Mat U = net_.forward(x, inputs_, &c);
    Mat cot;
    pairwise_loss(loss_, U, &cot);
    const double inv_n = 1.0 / double(n());
    for (std::size_t j = 0; j < n(); ++j)
      cot.row(Eigen::Index(j)) += inv_n * dr(j, U.row(Eigen::Index(j)));
    return net_.backward(x, c, cot);
  }
  // rows touched by the batch: the samples and their pair partners
  std::vector<Eigen::Index> local(n(), -1);
  index_list rows;
  auto touch = [&](std::size_t r) {
    if (local[r] < 0) {
      local[r] = Eigen::Index(rows.size());
      rows.push_back(r);
    }
  };
  for (auto j : idx) {
    if (j >= n()) throw std::out_of_range("mini-batch index out of range");
    touch(j);
    for (auto k : incident_[j]) {
      touch(loss_.pairs[k].i);
      touch(loss_.pairs[k].j);
    }
  }
  Mat A(Eigen::Index(rows.size()), inputs_.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    A.row(Eigen::Index(r)) = inputs_.row(Eigen::Index(rows[r]));
  Mlp::cache c;
  const Mat U = net_.forward(x, A, &c);

  // F_j owns half of each incident pair, scaled so that the F_j average to F
  const double inv_b = 1.0 / double(idx.size());
  const double pair_w =
      double(n()) / double(loss_.pairs.size()) * 0.5 * 0.5 * inv_b;
  Mat cot = Mat::Zero(U.rows(), U.cols());
  for (auto j : idx) {
    for (auto k : incident_[j]) {
      const auto &p = loss_.pairs[k];
      const Eigen::Index li = local[p.i], lj = local[p.j];
      const double s = 0.5 * U.row(li).dot(U.row(lj));
      const double g = pair_w * pair_loss_slope(loss_.alpha_loss, s, p.similar);
      cot.row(li) += g * U.row(lj);
      cot.row(lj) += g * U.row(li);
    }
    const Eigen::Index lj = local[j];
    cot.row(lj) += inv_b * dr(j, U.row(lj));
  }
  return net_.backward(x, c, cot);
}

std::optional<double> HashingProblem::lagrangian_value(const Vec &x,
                                                       const Mat &B,
                                                       const Mat &Lambda) const {
  if (B.rows() != Lambda.rows() || B.cols() != Lambda.cols())
    throw dimension_error("Lambda must have the shape of B");
  const ExtScalar conj = reg_.conj_value(Lambda);
  if (conj.is_infinite()) return std::nullopt;
  return F_value(x, B) + B.cwiseProduct(Lambda).sum() - conj.value();
}

StationarityBreakdown stationarity(const HashingProblem &p, const Vec &grad_x,
                                   const Mat &grad_B, const Mat &B,
                                   const Mat &Lambda) {
  if (p.reg().conj_value(Lambda).is_infinite())
    throw domain_error("stationarity: Lambda is dual infeasible");
  StationarityBreakdown out;
  out.dx_sq = grad_x.squaredNorm();
  out.dB_sq = (grad_B + Lambda).squaredNorm();
  for (Eigen::Index i = 0; i < B.rows(); ++i)
    for (Eigen::Index j = 0; j < B.cols(); ++j) {
      const double dist = p.reg().subdiff_conj(Lambda(i, j)).distance(B(i, j));
      out.dLam_sq += dist * dist;
    }
  return out;
}

StationarityBreakdown stationarity(const HashingProblem &p, const Vec &x,
                                   const Mat &B, const Mat &Lambda) {
  return stationarity(p, p.grad_x_F(x, B), p.grad_B_F(x, B), B, Lambda);
}

double sigma2_hat(const HashingProblem &p, const Vec &x, const Mat &B,
                  const index_list &probe) {
  if (probe.empty()) throw std::invalid_argument("sigma2_hat: empty probe");
  const Vec full = p.grad_x_F(x, B);
  double acc = 0.0;
  for (auto j : probe)
    acc += (p.grad_x_F_minibatch(x, B, {j}) - full).squaredNorm();
  return acc / double(probe.size());
}

double estimate_lipschitz(const HashingProblem &p, const Vec &x, const Mat &B,
                          const index_list &probe, Rng &rng, int iters) {
  const Eigen::Index nx = x.size(), nb = B.size();
  auto grad = [&](const Vec &z) {
    const Vec xz = z.head(nx);
    const Mat Bz = Eigen::Map<const Mat>(z.data() + nx, B.rows(), B.cols());
    Vec g(nx + nb);
    g.head(nx) = p.grad_x_F_minibatch(xz, Bz, probe);
    const Mat gB = p.grad_B_F(xz, Bz);
    g.tail(nb) = Eigen::Map<const Vec>(gB.data(), nb);
    return g;
  };
  Vec z(nx + nb);
  z.head(nx) = x;
  z.tail(nb) = Eigen::Map<const Vec>(B.data(), nb);
  Vec v(nx + nb);
  for (auto &e : v) e = rng.normal();
  v.normalize();
  const double eps = 1e-5;
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    const Vec hv = (grad(z + eps * v) - grad(z - eps * v)) / (2.0 * eps);
    est = hv.norm();
    if (!(est > 0.0)) break;
    v = hv / est;
  }
  return est;
}

bool DualIncrementReport::all_hold() const {
  for (bool h : holds)
    if (!h) return false;
  return true;
}

DualIncrementReport dual_increment_bound_check(std::span<const Iterate> history,
                                               double tau, double lipschitz,
                                               double rel_tol) {
  if (history.size() < 3)
    throw std::invalid_argument("dual_increment_bound_check: need >= 3 iterates");
  DualIncrementReport rep;
  const double it = 1.0 / tau;
  for (std::size_t k = 0; k + 2 < history.size(); ++k) {
    const auto &a = history[k], &b = history[k + 1], &c = history[k + 2];
    const double lhs = (b.Lambda - a.Lambda).squaredNorm();
    const double rhs = 3.0 * it * it * (c.B - b.B).squaredNorm() +
                       3.0 * (it + lipschitz) * (it + lipschitz) *
                           (b.B - a.B).squaredNorm() +
                       3.0 * lipschitz * lipschitz * (c.x - b.x).squaredNorm();
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    rep.holds.push_back(lhs <= rhs * (1.0 + rel_tol) + 1e-300);
  }
  return rep;
}

KktToy make_kkt_toy(std::size_t code_length, double gamma, double lambda) {
  constexpr double alpha = 1.0;
  const double d = double(code_length);
  // residual of the x-block condition for outputs u_i = c * s
  auto phi = [&](double c) {
    const double s_h = 0.5 * c * c * d;
    return 0.5 * gamma * (c - 1.0) - 0.5 * alpha * c * (1.0 - logistic(alpha * s_h));
  };
  double lo = 1.0, hi = 2.0;
  while (phi(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) < 0.0 ? lo : hi) = mid;
  }
  const double c = 0.5 * (lo + hi);
  const double v = 0.5 * gamma * (c - 1.0);
  if (!(v > 0.0 && v < lambda))
    throw std::invalid_argument("make_kkt_toy: lambda too small for this toy");

  const std::size_t d_a = 2;
  Mat inputs(2, Eigen::Index(d_a));
  inputs << 0.3, -1.2, 0.8, 0.5;
  MlpSpec spec{{d_a, code_length}, output_activation::identity};
  PairwiseLossSpec loss{alpha, {{0, 1, 1}}};
  HashingProblem prob(inputs, spec, loss, gamma, lambda);

  Vec sgn = Vec::Zero(Eigen::Index(code_length));
  for (Eigen::Index k = 0; k < sgn.size(); ++k) sgn[k] = (k % 2 == 0) ? 1.0 : -1.0;
  Vec x = Vec::Zero(Eigen::Index(spec.num_params()));
  x.tail(Eigen::Index(code_length)) = c * sgn;  // bias of the only layer
  Mat B(2, Eigen::Index(code_length));
  B.row(0) = sgn.transpose();
  B.row(1) = sgn.transpose();
  Mat Lambda = v * B;
  return {std::move(prob), {x, B, Lambda}, v};
}

}  // namespace dualhash
