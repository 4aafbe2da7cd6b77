#include <cmath>
#include <sstream>

#include "dualhash/optimizer.hpp"

namespace dualhash {

namespace {

using row = Eigen::RowVectorXd;

// n * lambda * d/du sum ||u| - 1|, the sign-based subgradient
row w_subgrad(const row &u, double scale) {
  row g(u.size());
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double a = std::abs(u[k]) - 1.0;
    g[k] = a == 0.0 ? 0.0 : scale * sign_of(a) * sign_of(u[k]);
  }
  return g;
}

row logcosh_grad(const row &u, double scale) {
  row g(u.size());
  for (Eigen::Index k = 0; k < u.size(); ++k)
    g[k] = scale * std::tanh(std::abs(u[k]) - 1.0) * sign_of(u[k]);
  return g;
}

double objective(const HashingProblem &p, baseline_kind kind, const Vec &x,
                 const Mat &B, double lambda) {
  switch (kind) {
    case baseline_kind::sgdm: {
      const Mat U = p.outputs(x);
      return pairwise_loss(p.loss(), U, nullptr) +
             lambda * (U.array().abs() - 1.0).abs().sum();
    }
    case baseline_kind::dhn: {
      const Mat U = p.outputs(x);
      return pairwise_loss(p.loss(), U, nullptr) + lambda * logcosh_reg(U, nullptr);
    }
    case baseline_kind::spgd_wcr:
      return p.F_value(x, B) + wc_reg_value(B, lambda);
  }
  return 0.0;
}

}  // namespace

BaselineResult run_baseline(const HashingProblem &p, baseline_kind kind, Vec x0,
                            const BaselineParams &prm) {
  if (prm.T == 0) throw std::invalid_argument("baseline: T must be >= 1");
  if (!(prm.eta > 0.0)) throw std::invalid_argument("baseline: eta must be > 0");
  if (!(prm.momentum >= 0.0 && prm.momentum < 1.0))
    throw std::invalid_argument("baseline: momentum must lie in [0, 1)");
  if (!(prm.reg_weight >= 0.0))
    throw std::invalid_argument("baseline: reg_weight must be >= 0");
  if (prm.batch == 0) throw std::invalid_argument("baseline: batch must be >= 1");
  if (kind == baseline_kind::spgd_wcr) check_wc_prox_params(prm.tau, prm.reg_weight);

  const double n = double(p.n());
  const double lam = prm.reg_weight;
  BaselineResult res;
  res.x = std::move(x0);
  Vec x_prev = res.x;
  if (kind == baseline_kind::spgd_wcr) res.B = p.outputs(res.x);
  Rng rng(prm.seed);
  const std::size_t every = prm.log_every ? prm.log_every : default_log_every(prm.T);
  std::size_t logged = 0;

  for (std::size_t it = 1; it <= prm.T; ++it) {
    index_list idx;
    if (prm.batch < p.n()) idx = sample_indices(rng, p.n(), prm.batch);
    const Vec disp = res.x - x_prev;
    const Vec z = res.x + prm.momentum * disp;
    Vec g;
    switch (kind) {
      case baseline_kind::sgdm:
        g = p.grad_x_composite(z, idx, [&](std::size_t, const row &u) {
          return w_subgrad(u, n * lam);
        });
        break;
      case baseline_kind::dhn:
        g = p.grad_x_composite(z, idx, [&](std::size_t, const row &u) {
          return logcosh_grad(u, n * lam);
        });
        break;
      case baseline_kind::spgd_wcr:
        g = idx.empty() ? p.grad_x_F(z, res.B) : p.grad_x_F_minibatch(z, res.B, idx);
        break;
    }
    x_prev = res.x;
    res.x = z - prm.eta * g;
    if (kind == baseline_kind::spgd_wcr && lam > 0.0)
      res.B = prox_wc(Mat(res.B - prm.tau * p.grad_B_F(res.x, res.B)), prm.tau, lam);
    else if (kind == baseline_kind::spgd_wcr)
      res.B -= prm.tau * p.grad_B_F(res.x, res.B);
    res.iterations = it;

    const bool finite = res.x.allFinite() && (res.B.size() == 0 || res.B.allFinite());
    if (!finite) {
      std::ostringstream os;
      os << "aborted at iteration " << it << ": non-finite iterate";
      res.aborted = true;
      res.abort_reason = os.str();
      return res;
    }
    if (it % every != 0 && it != prm.T) continue;
    DiagnosticsRecord rec;
    rec.iter = it;
    rec.lagrangian = objective(p, kind, res.x, res.B, lam);
    if (logged % prm.full_diag_every == 0) rec.quant_error = quantization_error(p.outputs(res.x));
    ++logged;
    res.records.push_back(rec);
    if (prm.on_record) prm.on_record(rec);
  }
  return res;
}

}  // namespace dualhash
