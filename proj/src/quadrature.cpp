#include "concentrate/detail/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace concentrate::detail {

namespace {

double recurse(const std::function<double(double)>& f, double a, double b,
               double fa, double fm, double fb, double whole, double tol,
               int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol)
    return left + right + diff / 15.0;
  return recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

} // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double rel_tol, int max_depth) {
  if (!(b > a))
    return 0.0;
  double fa = f(a), fm = f(0.5 * (a + b)), fb = f(b);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  double tol = std::max(1e-300, rel_tol * std::abs(whole));
  return recurse(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

} // namespace concentrate::detail
