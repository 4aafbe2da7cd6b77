#ifndef DUALHASH_NUMERICS_HPP
#define DUALHASH_NUMERICS_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dualhash {

template <typename Scalar>
using vector_t = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using matrix_t =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vec = vector_t<double>;
using Mat = matrix_t<double>;
using index_list = std::vector<std::size_t>;

class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline void check_same_size(Eigen::Index a, Eigen::Index b, const char *what) {
  if (a != b)
    throw dimension_error(std::string(what) + ": size mismatch (" +
                          std::to_string(a) + " vs " + std::to_string(b) + ")");
}

// a*x + y
template <typename DerivedX, typename DerivedY>
vector_t<typename DerivedX::Scalar> axpy(
    typename DerivedX::Scalar a, const Eigen::MatrixBase<DerivedX> &x,
    const Eigen::MatrixBase<DerivedY> &y) {
  check_same_size(x.size(), y.size(), "axpy");
  return a * x + y;
}

template <typename Derived>
typename Derived::Scalar frob_norm_sq(const Eigen::MatrixBase<Derived> &m) {
  return m.squaredNorm();
}

/// Deterministic pseudorandom source. Built on mt19937_64, whose output
/// sequence is fixed by the standard; all derived draws (bounded integers,
/// uniforms, normals) are implemented here so that streams do not depend on
/// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  // uniform in [0, bound)
  std::uint64_t uniform_index(std::uint64_t bound);
  // uniform in [0, 1)
  double uniform();
  double uniform(double lo, double hi);
  double normal();

  /// Independent child stream; the parent stream is not advanced.
  Rng split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// b indices drawn i.i.d. uniformly from {0, ..., n-1} with replacement.
index_list sample_indices(Rng &rng, std::size_t n, std::size_t b);

}  // namespace dualhash

#endif  // DUALHASH_NUMERICS_HPP
