#ifndef CONCENTRATE_COST_KERNEL_HPP
#define CONCENTRATE_COST_KERNEL_HPP

#include <cstdint>
#include <stdexcept>

namespace concentrate {

// Extended real with +infinity as an explicit variant.  The infinite value
// only arises from the beta=0 gradient cost evaluated outside |s| <= delta;
// it never leaks into floating-point arithmetic.
class ExtendedReal {
public:
  static ExtendedReal finite(double v) { return ExtendedReal(v, false); }
  static ExtendedReal infinity() { return ExtendedReal(0.0, true); }

  bool is_finite() const { return !infinite_; }
  bool is_infinite() const { return infinite_; }

  double value() const {
    if (infinite_)
      throw std::logic_error("ExtendedReal: value() on +infinity");
    return value_;
  }

  // Finite value, or `fallback` when infinite (for minimization contexts
  // where the infinite candidate is discarded).
  double value_or(double fallback) const { return infinite_ ? fallback : value_; }

private:
  ExtendedReal(double v, bool inf) : value_(v), infinite_(inf) {}
  double value_;
  bool infinite_;
};

// Uniform 1-D grid, virtual (points are computed, not stored).
struct UniformGrid {
  double lo = 0.0;
  double hi = 0.0;
  std::int64_t count = 0;

  double step() const { return count > 1 ? (hi - lo) / double(count - 1) : 0.0; }
  double point(std::int64_t i) const {
    return i == count - 1 ? hi : lo + double(i) * step();
  }
};

// The dual pair of cost functions used throughout: a gradient cost that is
// quadratic near zero and of power (beta+1)/beta in the large, and its
// Legendre transform, quadratic near zero with tail exponent 1+beta.  For
// beta = 0 the gradient cost is quadratic on [-delta, delta] and +infinity
// outside; delta = 1 is the unscaled pair.
class CostPair {
public:
  // beta in [1e-6, 1]; smaller positive beta is rejected because the
  // exponent (beta+1)/beta is numerically meaningless there (the beta -> 0
  // limit is a separate family, see the delta constructor).
  explicit CostPair(double beta);

  // beta = 0 family with scale delta > 0.
  CostPair(double beta, double delta);

  double beta() const { return beta_; }
  double delta() const;
  bool is_beta_zero() const { return beta_ == 0.0; }

  // Gradient-side cost H.
  ExtendedReal h(double s) const;

  // Deviation-side cost L* (the Legendre transform of H), finite everywhere.
  double lstar(double t) const;

  // d/dt L*; continuous across the breakpoints.
  double dlstar(double t) const;

private:
  double beta_;
  double delta_ = 0.0; // valid only when beta_ == 0
};

// Brute-force Legendre transform sup_s { s*t - H(s) } over a uniform grid;
// testing oracle for CostPair::lstar.  Rejects grids with fewer than two
// points.  The objective is concave in s, so the grid maximum is located by
// ternary search over indices plus a safety scan of the surrounding window;
// the returned value is a max over actual grid points.
double conjugate_numeric(const CostPair& cost, double t, const UniformGrid& s_grid);

} // namespace concentrate

#endif
