#ifndef DUALHASH_PROBLEM_HPP
#define DUALHASH_PROBLEM_HPP

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dualhash/model.hpp"
#include "dualhash/numerics.hpp"
#include "dualhash/regularizer.hpp"

namespace dualhash {

/// F(x, B) = f(x) + gamma/(2n) sum_i ||D_i(x) - b_i||^2 with the W-type
/// regularizer h on B, split as F = (1/n) sum_j F_j. Each pair's loss is
/// shared half-and-half between its two endpoints' F_j.
class HashingProblem {
 public:
  HashingProblem(Mat inputs, MlpSpec spec, PairwiseLossSpec loss, double gamma,
                 double lambda);

  std::size_t n() const { return std::size_t(inputs_.rows()); }
  std::size_t code_length() const { return net_.spec().code_length(); }
  const Mlp &net() const { return net_; }
  const Mat &inputs() const { return inputs_; }
  const PairwiseLossSpec &loss() const { return loss_; }
  double gamma() const { return gamma_; }
  const WRegularizer<> &reg() const { return reg_; }

  Mat outputs(const Vec &x) const { return net_.forward(x, inputs_); }

  /// One forward pass with everything the value and gradient routines need.
  struct OutputEval {
    Mat U;
    Mlp::cache cache;
    double loss = 0.0;
    Mat dloss;  // gradient of f in U
  };
  OutputEval eval_outputs(const Vec &x) const;
  double F_value(const OutputEval &ev, const Mat &B) const;
  Mat grad_B_F(const OutputEval &ev, const Mat &B) const;
  Vec grad_x_F(const Vec &x, const OutputEval &ev, const Mat &B) const;
  std::optional<double> lagrangian_value(const OutputEval &ev, const Mat &B,
                                         const Mat &Lambda) const;

  double loss_value(const Vec &x) const;
  double penalty_value(const Vec &x, const Mat &B) const;
  double F_value(const Vec &x, const Mat &B) const;
  /// f(x) + sum_i h(D_i(x)): the unsplit objective.
  double primal_objective(const Vec &x) const;

  Mat grad_B_F(const Vec &x, const Mat &B) const;
  /// Full gradient via the pair-loss gradient in U and one backward pass.
  Vec grad_x_F(const Vec &x, const Mat &B) const;
  /// (1/|idx|) sum_{j in idx} grad_x F_j(x, b_j); idx may repeat entries.
  Vec grad_x_F_minibatch(const Vec &x, const Mat &B, const index_list &idx) const;

  /// Gradient of a per-sample output term r_j(D_j(x)) given its gradient.
  using row_grad =
      std::function<Eigen::RowVectorXd(std::size_t j, const Eigen::RowVectorXd &u)>;
  /// x-gradient of (1/n) sum_j [f_j(x) + r_j(D_j(x))]; with a non-empty idx,
  /// the mini-batch estimate (1/|idx|) sum_{j in idx} of the same terms.
  Vec grad_x_composite(const Vec &x, const index_list &idx, const row_grad &dr) const;

  /// nullopt when some |Lambda_ij| > lambda (h* is +inf there).
  std::optional<double> lagrangian_value(const Vec &x, const Mat &B,
                                         const Mat &Lambda) const;

  void check_shapes(const Vec &x, const Mat &B) const;

 private:
  Mat inputs_;
  Mlp net_;
  PairwiseLossSpec loss_;
  double gamma_;
  WRegularizer<> reg_;
  std::vector<std::vector<std::size_t>> incident_;  // pair ids per sample
};

struct StationarityBreakdown {
  double dx_sq = 0.0;
  double dB_sq = 0.0;
  double dLam_sq = 0.0;
  double total() const { return dx_sq + dB_sq + dLam_sq; }
};

/// Block residuals of 0 in dL: ||grad_x F||^2, ||grad_B F + Lambda||^2 and
/// the squared distance of B to dh*(Lambda), entrywise. Throws domain_error
/// when Lambda is dual infeasible.
StationarityBreakdown stationarity(const HashingProblem &p, const Vec &x,
                                   const Mat &B, const Mat &Lambda);

/// Same, with a precomputed x-gradient.
StationarityBreakdown stationarity(const HashingProblem &p, const Vec &grad_x,
                                   const Mat &grad_B, const Mat &B,
                                   const Mat &Lambda);

/// Mean over probe samples of ||grad_x F_j - grad_x F||^2.
double sigma2_hat(const HashingProblem &p, const Vec &x, const Mat &B,
                  const index_list &probe);

/// Largest |eigenvalue| of the Hessian of F in (x, B), by power iteration on
/// central-difference Hessian-vector products. The x-gradient uses the
/// probe mini-batch.
double estimate_lipschitz(const HashingProblem &p, const Vec &x, const Mat &B,
                          const index_list &probe, Rng &rng, int iters = 10);

struct Iterate {
  Vec x;
  Mat B;
  Mat Lambda;
};

struct DualIncrementReport {
  std::vector<bool> holds;   // per k
  std::vector<double> lhs;   // ||Lambda^{k+1} - Lambda^k||^2
  std::vector<double> rhs;
  bool all_hold() const;
};

/// Checks ||L^{k+1}-L^k||^2 <= 3/tau^2 ||B^{k+2}-B^{k+1}||^2
///   + 3 (1/tau + L_F)^2 ||B^{k+1}-B^k||^2 + 3 L_F^2 ||x^{k+2}-x^{k+1}||^2
/// over consecutive recorded iterates.
DualIncrementReport dual_increment_bound_check(std::span<const Iterate> history,
                                               double tau, double lipschitz,
                                               double rel_tol = 1e-9);

/// A linear-output toy instance with an exact critical triple: B = +-1,
/// Lambda = v sign(B) with 0 < v < lambda, grad_x F = 0 and
/// grad_B F = -Lambda.
struct KktToy {
  HashingProblem problem;
  Iterate point;
  double v;
};
KktToy make_kkt_toy(std::size_t code_length = 3, double gamma = 2.0,
                    double lambda = 0.5);

}  // namespace dualhash

#endif  // DUALHASH_PROBLEM_HPP
