#ifndef DUALHASH_REGULARIZER_HPP
#define DUALHASH_REGULARIZER_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "dualhash/numerics.hpp"

namespace dualhash {

/// Value on the extended real line (-inf, +inf]. Never NaN.
class ExtScalar {
 public:
  ExtScalar() = default;
  explicit ExtScalar(double v) : value_(v) {
    if (std::isnan(v)) throw domain_error("ExtScalar: NaN");
  }
  static ExtScalar infinity() {
    return ExtScalar(std::numeric_limits<double>::infinity());
  }

  bool is_finite() const { return std::isfinite(value_); }
  bool is_infinite() const { return !is_finite(); }
  double value() const { return value_; }

 private:
  double value_ = 0.0;
};

/// Closed interval [lo, hi]; either end may be infinite.
struct Interval {
  double lo;
  double hi;

  bool contains(double v, double tol = 0.0) const {
    return v >= lo - tol && v <= hi + tol;
  }
  double project(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
  double distance(double v) const { return std::abs(v - project(v)); }
};

inline constexpr double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

/// h(z) = lambda * sum_i ||z_i| - 1|, the W-shaped binarizing penalty.
///
/// Its conjugate is h*(x) = sum_i |x_i| on the box [-lambda, lambda]^n and
/// +inf outside. Both proximal maps have closed forms; prox of h* is the
/// five-branch shrink-and-clamp, prox of h shrinks toward the nearer of +-1.
template <typename Scalar = double>
class WRegularizer {
 public:
  explicit WRegularizer(Scalar lambda) : lambda_(lambda) {
    if (!(lambda > Scalar(0)))
      throw std::invalid_argument("WRegularizer: lambda must be > 0, got " +
                                  std::to_string(double(lambda)));
  }

  Scalar lambda() const { return lambda_; }

  Scalar value(Scalar z) const { return lambda_ * std::abs(std::abs(z) - 1); }

  template <typename Derived>
  Scalar value(const Eigen::MatrixBase<Derived> &z) const {
    return lambda_ * (z.array().abs() - Scalar(1)).abs().sum();
  }

  ExtScalar conj_value(Scalar x) const {
    if (std::abs(x) > lambda_) return ExtScalar::infinity();
    return ExtScalar(std::abs(x));
  }

  template <typename Derived>
  ExtScalar conj_value(const Eigen::MatrixBase<Derived> &x) const {
    if (x.size() > 0 && x.cwiseAbs().maxCoeff() > lambda_)
      return ExtScalar::infinity();
    return ExtScalar(x.cwiseAbs().sum());
  }

  /// prox_{tau h*}(y), elementwise.
  Scalar prox_conj(Scalar y, Scalar tau) const {
    if (y > lambda_ + tau) return lambda_;
    if (y > tau) return std::min(y - tau, lambda_);
    if (y >= -tau) return Scalar(0);
    if (y >= -lambda_ - tau) return std::max(y + tau, -lambda_);
    return -lambda_;
  }

  template <typename Derived>
  typename Derived::PlainObject prox_conj(const Eigen::MatrixBase<Derived> &y,
                             Scalar tau) const {
    check_tau(tau);
    return y.unaryExpr([&](Scalar v) { return prox_conj(v, tau); });
  }

  /// prox_{tau h}(y), elementwise. At y == 0 the two minimizers +-tau*lambda
  /// tie (0 itself is not a minimizer); sign(0) = +1 picks the positive one.
  Scalar prox(Scalar y, Scalar tau) const {
    const Scalar a = std::abs(y);
    const Scalar t = tau * lambda_;
    Scalar v;
    if (a > 1 + t)
      v = a - t;
    else if (a >= 1 - t)
      v = Scalar(1);
    else
      v = a + t;
    return y < 0 ? -v : v;
  }

  template <typename Derived>
  typename Derived::PlainObject prox(const Eigen::MatrixBase<Derived> &y,
                                     Scalar tau) const {
    check_tau(tau);
    return y.unaryExpr([&](Scalar v) { return prox(v, tau); });
  }

  /// The subdifferential of h* at a point of its domain.
  Interval subdiff_conj(Scalar x) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (std::abs(x) > lambda_)
      throw domain_error("subdiff_conj: |x| = " + std::to_string(double(x)) +
                         " outside [-lambda, lambda]");
    if (x == lambda_) return {1.0, inf};
    if (x == -lambda_) return {-inf, -1.0};
    if (x == Scalar(0)) return {-1.0, 1.0};
    const double s = sign_of(x);
    return {s, s};
  }

 private:
  Scalar lambda_;

  static void check_tau(Scalar tau) {
    if (!(tau > Scalar(0)))
      throw std::invalid_argument("prox: tau must be > 0");
  }
};

/// Weakly convex W-type penalty lambda * sum_i |z_i^2 - 1| (StoMHash-WCR).
template <typename Scalar = double>
Scalar wc_reg_value(Scalar z, Scalar lambda) {
  return lambda * std::abs(z * z - 1);
}

template <typename Derived>
typename Derived::Scalar wc_reg_value(const Eigen::MatrixBase<Derived> &z,
                                      typename Derived::Scalar lambda) {
  using S = typename Derived::Scalar;
  return lambda * (z.array().square() - S(1)).abs().sum();
}

/// The prox subproblem lambda|v^2 - 1| + (v - y)^2 / (2 tau) is strongly
/// convex iff 1/tau > 2 lambda.
template <typename Scalar>
void check_wc_prox_params(Scalar tau, Scalar lambda) {
  if (!(tau > Scalar(0)) || !(lambda >= Scalar(0)))
    throw std::invalid_argument("prox_wc: need tau > 0 and lambda >= 0");
  if (!(2 * lambda * tau < Scalar(1)))
    throw std::invalid_argument(
        "prox_wc: subproblem not strongly convex (need 2*lambda*tau < 1, got " +
        std::to_string(double(2 * lambda * tau)) + ")");
}

template <typename Scalar>
Scalar prox_wc(Scalar y, Scalar tau, Scalar lambda) {
  const Scalar a = std::abs(y);
  const Scalar k = 2 * lambda * tau;
  Scalar v;
  if (a > 1 + k)
    v = a / (1 + k);
  else if (a < 1 - k)
    v = a / (1 - k);
  else
    v = Scalar(1);
  return y < 0 ? -v : v;
}

template <typename Derived>
typename Derived::PlainObject prox_wc(
    const Eigen::MatrixBase<Derived> &y, typename Derived::Scalar tau,
    typename Derived::Scalar lambda) {
  using S = typename Derived::Scalar;
  check_wc_prox_params(tau, lambda);
  return y.unaryExpr([&](S v) { return prox_wc(v, tau, lambda); });
}

/// sum_i log(cosh(|z_i| - 1)) and its gradient tanh(|z_i| - 1) sign(z_i).
template <typename Derived>
typename Derived::Scalar logcosh_reg(const Eigen::MatrixBase<Derived> &z,
                                     typename Derived::PlainObject *grad) {
  using S = typename Derived::Scalar;
  S total = 0;
  if (grad) grad->resize(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const S t = std::abs(z(i, j)) - S(1);
      // log cosh t = |t| + log1p(exp(-2|t|)) - log 2, stable for large |t|
      const S at = std::abs(t);
      total += at + std::log1p(std::exp(-2 * at)) - std::log(S(2));
      if (grad) (*grad)(i, j) = std::tanh(t) * sign_of(z(i, j));
    }
  return total;
}

/// Scalar penalty evaluated by the brute-force prox oracle.
using scalar_penalty = std::function<double(double)>;

/// Grid argmin of fn(v) + (v - y)^2 / (2 tau) over [y - 3, y + 3], refined by
/// one golden-section pass on the bracketing grid cell pair. Test oracle only.
double prox_oracle(const scalar_penalty &fn, double y, double tau,
                   double grid_step = 1e-4);

}  // namespace dualhash

#endif  // DUALHASH_REGULARIZER_HPP
