#ifndef DUALHASH_MODEL_HPP
#define DUALHASH_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "dualhash/numerics.hpp"
#include "dualhash/regularizer.hpp"

namespace dualhash {

enum class output_activation { tanh, identity };

/// Dense network shape: input width, hidden widths (ELU), code length.
struct MlpSpec {
  std::vector<std::size_t> layer_widths{16, 32, 8};
  output_activation output = output_activation::tanh;

  void validate() const {
    if (layer_widths.size() < 2)
      throw std::invalid_argument("MlpSpec: need at least input and output width");
    for (auto w : layer_widths)
      if (w == 0) throw std::invalid_argument("MlpSpec: zero layer width");
  }
  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t code_length() const { return layer_widths.back(); }
  std::size_t num_layers() const { return layer_widths.size() - 1; }
  std::size_t num_params() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l)
      total += (layer_widths[l] + 1) * layer_widths[l + 1];
    return total;
  }
};

template <typename Scalar>
inline Scalar elu(Scalar a) {
  return a > Scalar(0) ? a : std::expm1(a);
}

template <typename Scalar>
inline Scalar elu_grad(Scalar a) {
  return a > Scalar(0) ? Scalar(1) : std::exp(a);
}

/// Feed-forward hashing network D(x; a): ELU hidden layers and a tanh (or
/// identity) output layer. Parameters live in one flat vector; layer l owns
/// a row-major (out x in) weight block followed by its bias.
template <typename Scalar>
class basic_mlp {
 public:
  using vec = vector_t<Scalar>;
  using mat = matrix_t<Scalar>;

  struct cache {
    std::vector<mat> pre;   // pre-activations per layer
    std::vector<mat> post;  // post[0] = input, post[l + 1] = act(pre[l])
  };

  explicit basic_mlp(MlpSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t off = 0;
    for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
      offsets_.push_back(off);
      off += (spec_.layer_widths[l] + 1) * spec_.layer_widths[l + 1];
    }
  }

  const MlpSpec &spec() const { return spec_; }
  std::size_t num_params() const { return spec_.num_params(); }

  Eigen::Map<const mat> weights(const vec &x, std::size_t l) const {
    return {x.data() + offsets_[l], Eigen::Index(out(l)), Eigen::Index(in(l))};
  }
  Eigen::Map<const vec> bias(const vec &x, std::size_t l) const {
    return {x.data() + offsets_[l] + in(l) * out(l), Eigen::Index(out(l))};
  }

  /// Kaiming fan-in normal weights, zero biases.
  vec init_params(Rng &rng) const {
    vec x = vec::Zero(Eigen::Index(num_params()));
    for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
      const Scalar sd = std::sqrt(Scalar(2) / Scalar(in(l)));
      for (std::size_t k = 0; k < in(l) * out(l); ++k)
        x[Eigen::Index(offsets_[l] + k)] = sd * Scalar(rng.normal());
    }
    return x;
  }

  /// Outputs for a batch of inputs (one sample per row).
  template <typename Derived>
  mat forward(const vec &x, const Eigen::MatrixBase<Derived> &inputs,
              cache *c = nullptr) const {
    check_params(x);
    if (std::size_t(inputs.cols()) != spec_.input_width())
      throw dimension_error("forward: input width " +
                            std::to_string(inputs.cols()) + ", expected " +
                            std::to_string(spec_.input_width()));
    mat h = inputs;
    if (c) {
      c->pre.clear();
      c->post.clear();
      c->post.push_back(h);
    }
    for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
      mat z = h * weights(x, l).transpose();
      z.rowwise() += bias(x, l).transpose();
      if (l + 1 < spec_.num_layers())
        h = z.unaryExpr([](Scalar a) { return elu(a); });
      else if (spec_.output == output_activation::tanh)
        h = z.array().tanh().matrix();
      else
        h = z;
      if (c) {
        c->pre.push_back(std::move(z));
        c->post.push_back(h);
      }
    }
    return h;
  }

  vec forward_one(const vec &x, const vec &a) const {
    return forward(x, a.transpose()).row(0).transpose();
  }

  /// Gradient in x of sum_r <cotangent_r, D(x; input_r)>, given the cache of
  /// a forward pass over the same inputs.
  template <typename Derived>
  vec backward(const vec &x, const cache &c,
               const Eigen::MatrixBase<Derived> &cotangent) const {
    check_params(x);
    const std::size_t L = spec_.num_layers();
    if (c.post.size() != L + 1 || cotangent.rows() != c.post.back().rows() ||
        std::size_t(cotangent.cols()) != spec_.code_length())
      throw dimension_error("backward: cotangent does not match forward cache");
    vec grad = vec::Zero(Eigen::Index(num_params()));
    mat delta = cotangent;
    if (spec_.output == output_activation::tanh)
      delta.array() *= Scalar(1) - c.post[L].array().square();
    for (std::size_t l = L; l-- > 0;) {
      Eigen::Map<mat> gw(grad.data() + offsets_[l], Eigen::Index(out(l)),
                         Eigen::Index(in(l)));
      Eigen::Map<vec> gb(grad.data() + offsets_[l] + in(l) * out(l),
                         Eigen::Index(out(l)));
      gw.noalias() = delta.transpose() * c.post[l];
      gb = delta.colwise().sum().transpose();
      if (l > 0) {
        mat back = delta * weights(x, l);
        back.array() *=
            c.pre[l - 1].unaryExpr([](Scalar a) { return elu_grad(a); }).array();
        delta = std::move(back);
      }
    }
    return grad;
  }

 private:
  MlpSpec spec_;
  std::vector<std::size_t> offsets_;

  std::size_t in(std::size_t l) const { return spec_.layer_widths[l]; }
  std::size_t out(std::size_t l) const { return spec_.layer_widths[l + 1]; }
  void check_params(const vec &x) const {
    if (std::size_t(x.size()) != num_params())
      throw dimension_error("mlp: parameter vector has " +
                            std::to_string(x.size()) + " entries, expected " +
                            std::to_string(num_params()));
  }
};

using Mlp = basic_mlp<double>;

struct Pair {
  std::size_t i;
  std::size_t j;
  int similar;  // 0 or 1
};

struct PairwiseLossSpec {
  double alpha_loss = 0.5;
  std::vector<Pair> pairs;

  void validate(std::size_t n) const;
};

inline double softplus(double t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double logistic(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// Loss of a single pair with inner-product similarity s = <u_i, u_j> / 2.
inline double pair_loss(double alpha, double s, int similar) {
  return softplus(alpha * s) - alpha * similar * s;
}

/// d pair_loss / d s
inline double pair_loss_slope(double alpha, double s, int similar) {
  return alpha * (logistic(alpha * s) - similar);
}

/// Negative log-likelihood of the pairwise Bernoulli similarity model,
/// averaged over pairs. Writes the gradient in U when grad is non-null.
double pairwise_loss(const PairwiseLossSpec &spec, const Mat &U, Mat *grad);

template <typename Derived>
typename Derived::PlainObject binarize(const Eigen::MatrixBase<Derived> &u) {
  using S = typename Derived::Scalar;
  return u.unaryExpr([](S v) { return S(sign_of(double(v))); });
}

void save_params(std::ostream &os, const MlpSpec &spec, const Vec &x);
void save_params(const std::string &path, const MlpSpec &spec, const Vec &x);
std::pair<MlpSpec, Vec> load_params(std::istream &is);
std::pair<MlpSpec, Vec> load_params(const std::string &path);

}  // namespace dualhash

#endif  // DUALHASH_MODEL_HPP
