#ifndef CONCENTRATE_HOPF_LAX_HPP
#define CONCENTRATE_HOPF_LAX_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "concentrate/cost_kernel.hpp"
#include "concentrate/measure_model.hpp"

namespace concentrate {

// Dense function values over a product of uniform axes (row-major, last axis
// fastest).
struct GridFunction {
  std::vector<UniformGrid> axes;
  std::vector<double> values;

  std::size_t size() const;
  std::size_t dim() const { return axes.size(); }
  void validate() const; // counts >= 2, values finite, size matches

  static GridFunction sample_1d(const UniformGrid& axis,
                                const std::function<double(double)>& f);

  nlohmann::json to_json() const;
  static GridFunction from_json(const nlohmann::json& j);
  void write_csv(const std::string& path) const;
  static GridFunction read_csv(const std::string& path);
};

// Exponent schedule for the hypercontractivity inequality.  For beta > 0,
//   k(t) = 1 + (t - t0)/B            on t <= t0,
//   k(t) = (1 + (t - t0)/(B beta))^beta on t > t0,
// so k(t0) = 1 and k(0) = 1 - t0/B.  The beta = 0 family is
//   k(t) = (1/B) min{1 + (t - t0)/B, 1},
// normalized so that B k(t0) = 1.
struct Schedule {
  double beta = 1.0;
  double B = 1.0;
  double t0 = 0.0;
  double delta = 1.0; // used only when beta = 0

  double k(double t) const;
};

struct DiscreteMeasure {
  std::vector<std::pair<double, double>> atoms; // (location, mass)

  void validate(std::size_t max_atoms = 4) const;
};

// Exact grid minimum of f(y) + t lstar((x - y)/t) at every grid x, by
// divide-and-conquer over the monotone argmin rows; ties go to the smallest
// y.  boundary_active (optional) is set when some interior x picks an
// endpoint minimizer, i.e. the grid truncates the true minimization range.
GridFunction infconv_1d(const GridFunction& f, double t, const CostPair& cost,
                        bool* boundary_active = nullptr);

// Sequential per-axis application; equals the joint minimization because the
// cost separates across coordinates.
GridFunction infconv_nd(const GridFunction& f, double t, const CostPair& cost,
                        bool* boundary_active = nullptr);

struct HJReport {
  double max_residual = 0.0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0; // kinks and boundary-margin points
};

// Residual of d/dt Q + H(d/dx Q) = 0 with central differences in t and
// one-sided differences in x, excluding points whose one-sided x-slopes
// differ by more than
// sqrt(grid step).  Needs at least three t values.
HJReport hj_residual(const GridFunction& f, const std::vector<double>& t_list,
                     const CostPair& cost);

// Per-t margin log ||e^{phi}||_{k(0)} - log ||e^{Q_t phi}||_{k(t)}, with
// ||Z||_0 = exp(E log Z); expectations are composite-Simpson quadrature of
// the grid values against the spec density (grid count must be odd).
std::vector<double> hypercontractivity_margins(const MeasureSpec& spec,
                                               const GridFunction& phi,
                                               const Schedule& schedule,
                                               const std::vector<double>& t_list);

// (E e^{Q_1 phi / b})^b  e^{-E phi}; the caller compares against 1.
double dual_transport_lhs(const MeasureSpec& spec, const GridFunction& phi,
                          double b, const CostPair& cost);

struct WeakTransportResult {
  double cost = 0.0;
  std::string status; // "converged"
  std::vector<double> barycenters;
};

// min over couplings pi with marginals (nu rows, mu columns) of
//   sum_x nu(x) lstar(x - barycenter of the row kernel at x),
// by exact line search over all 2x2 circulation moves from two feasible
// starts; the objective is smooth and convex over the transportation
// polytope, so the stationary point reached is the global minimum.
WeakTransportResult weak_transport_discrete(const DiscreteMeasure& mu,
                                            const DiscreteMeasure& nu,
                                            const CostPair& cost);

// sum nu(x) log(nu(x)/mu(x)); +infinity when nu charges an atom mu misses.
double relative_entropy_discrete(const DiscreteMeasure& nu,
                                 const DiscreteMeasure& mu);

} // namespace concentrate

#endif
