#include "concentrate/cost_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace concentrate {

CostPair::CostPair(double beta) : beta_(beta) {
  if (!(beta >= 1e-6 && beta <= 1.0))
    throw std::invalid_argument(
        "CostPair: beta must lie in [1e-6, 1] (use the (0, delta) constructor "
        "for the beta = 0 family)");
}

CostPair::CostPair(double beta, double delta) : beta_(beta), delta_(delta) {
  if (beta != 0.0)
    throw std::invalid_argument("CostPair: delta is only meaningful for beta = 0");
  if (!(delta > 0.0))
    throw std::invalid_argument("CostPair: delta must be positive");
}

double CostPair::delta() const {
  if (beta_ != 0.0)
    throw std::logic_error("CostPair: delta() requires beta = 0");
  return delta_;
}

ExtendedReal CostPair::h(double s) const {
  if (beta_ == 0.0) {
    double a = std::abs(s);
    if (a > delta_)
      return ExtendedReal::infinity();
    double u = s / delta_;
    return ExtendedReal::finite(u * u);
  }
  double a = std::abs(s);
  return ExtendedReal::finite(std::max(s * s, std::pow(a, (beta_ + 1.0) / beta_)));
}

double CostPair::lstar(double t) const {
  double a = std::abs(t);
  if (beta_ == 0.0) {
    // L*_{0,delta}(t) = L*_0(t*delta)
    double u = a * delta_;
    if (u <= 2.0)
      return u * u / 4.0;
    return u - 1.0;
  }
  if (a <= 2.0)
    return t * t / 4.0;
  double knee = (beta_ + 1.0) / beta_;
  if (a <= knee)
    return a - 1.0;
  return std::pow(beta_ / (beta_ + 1.0) * a, 1.0 + beta_) / beta_;
}

double CostPair::dlstar(double t) const {
  double sgn = t < 0.0 ? -1.0 : 1.0;
  double a = std::abs(t);
  if (beta_ == 0.0) {
    double u = a * delta_;
    if (u <= 2.0)
      return delta_ * delta_ * t / 2.0;
    return delta_ * sgn;
  }
  if (a <= 2.0)
    return t / 2.0;
  double knee = (beta_ + 1.0) / beta_;
  if (a <= knee)
    return sgn;
  return std::pow(beta_ / (beta_ + 1.0) * a, beta_) * sgn;
}

namespace {

double objective(const CostPair& cost, double t, const UniformGrid& g, std::int64_t i) {
  double s = g.point(i);
  ExtendedReal hs = cost.h(s);
  if (hs.is_infinite())
    return -std::numeric_limits<double>::infinity();
  return s * t - hs.value();
}

} // namespace

double conjugate_numeric(const CostPair& cost, double t, const UniformGrid& s_grid) {
  if (s_grid.count < 2)
    throw std::invalid_argument("conjugate_numeric: grid needs at least two points");

  // Ternary search for the peak of the concave objective, then an exhaustive
  // scan of a window around it (plateaus at rounding level are harmless for
  // the value itself, the window absorbs them).
  std::int64_t lo = 0, hi = s_grid.count - 1;
  while (hi - lo > 8) {
    std::int64_t m1 = lo + (hi - lo) / 3;
    std::int64_t m2 = hi - (hi - lo) / 3;
    if (objective(cost, t, s_grid, m1) < objective(cost, t, s_grid, m2))
      lo = m1 + 1;
    else
      hi = m2 - 1;
  }
  std::int64_t wlo = std::max<std::int64_t>(0, lo - 64);
  std::int64_t whi = std::min<std::int64_t>(s_grid.count - 1, hi + 64);
  double best = -std::numeric_limits<double>::infinity();
  for (std::int64_t i = wlo; i <= whi; ++i)
    best = std::max(best, objective(cost, t, s_grid, i));
  return best;
}

} // namespace concentrate
