#ifndef CONCENTRATE_DETAIL_QUADRATURE_HPP
#define CONCENTRATE_DETAIL_QUADRATURE_HPP

#include <functional>

namespace concentrate::detail {

// Adaptive Simpson on [a, b]; tolerance is relative to the first estimate.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double rel_tol = 1e-11, int max_depth = 28);

} // namespace concentrate::detail

#endif
