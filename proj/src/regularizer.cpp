#include "dualhash/regularizer.hpp"

#include <cmath>
#include <limits>

namespace dualhash {

double prox_oracle(const scalar_penalty &fn, double y, double tau,
                   double grid_step) {
  if (!(grid_step > 0.0)) throw std::invalid_argument("prox_oracle: grid_step");
  if (!(tau > 0.0)) throw std::invalid_argument("prox_oracle: tau");
  auto objective = [&](double v) {
    const double p = fn(v);
    if (!std::isfinite(p)) return std::numeric_limits<double>::infinity();
    return p + (v - y) * (v - y) / (2.0 * tau);
  };

  const double lo = y - 3.0;
  const auto steps = static_cast<long>(std::ceil(6.0 / grid_step));
  double best_v = y;
  double best = objective(y);
  for (long s = 0; s <= steps; ++s) {
    const double v = lo + static_cast<double>(s) * grid_step;
    const double f = objective(v);
    if (f < best) {
      best = f;
      best_v = v;
    }
  }

  // golden section on the cell pair around the grid minimizer
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = best_v - grid_step, b = best_v + grid_step;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = objective(c), fd = objective(d);
  // keep the best evaluated point: near a domain edge the midpoint can land outside
  auto keep = [&](double v, double f) {
    if (f < best) {
      best = f;
      best_v = v;
    }
  };
  keep(c, fc);
  keep(d, fd);
  for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = objective(c);
      keep(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = objective(d);
      keep(d, fd);
    }
  }
  const double refined = 0.5 * (a + b);
  keep(refined, objective(refined));
  return best_v;
}

}  // namespace dualhash
