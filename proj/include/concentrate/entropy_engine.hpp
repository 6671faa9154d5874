#ifndef CONCENTRATE_ENTROPY_ENGINE_HPP
#define CONCENTRATE_ENTROPY_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "concentrate/cost_kernel.hpp"
#include "concentrate/measure_model.hpp"

namespace concentrate {

// Thrown by rhs_mc in beta = 0 mode when a sampled gradient exceeds the
// admissible sup-norm bound.
struct GradientRestrictionError : std::runtime_error {
  explicit GradientRestrictionError(const std::string& what)
      : std::runtime_error(what) {}
};

// A convex test function of any dimension with exact gradient and uniform
// gradient-norm bounds (sup over x of the l_q norm of the gradient; q may be
// +infinity, passed as std::numeric_limits<double>::infinity()).
struct ConvexTestFunction {
  std::string name;
  std::function<double(const std::vector<double>&)> value;
  std::function<std::vector<double>(const std::vector<double>&)> gradient;
  std::function<double(double q)> grad_norm_bound;

  // catalog
  static ConvexTestFunction linear(std::vector<double> coeffs);
  static ConvexTestFunction max_coordinate();
  static ConvexTestFunction logsumexp(double scale);
  static ConvexTestFunction l2_norm_shifted(double center);
  static ConvexTestFunction distance_to_box(double radius);
  // s * f for s > 0
  static ConvexTestFunction scaled(const ConvexTestFunction& f, double s);
};

struct Estimate {
  double value = 0.0;
  double halfwidth = 0.0; // 3 sample standard errors

  double upper() const { return value + halfwidth; }
  double lower() const { return value - halfwidth; }
};

struct EntropyReport {
  Estimate lhs;
  Estimate rhs;
  double ratio = 0.0; // conservative: lhs upper bound over rhs lower bound
  std::size_t n = 0;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  double beta = 0.0;
  std::string spec_label;
  std::string phi_name;

  nlohmann::json to_json() const;
};

struct PoincareResult {
  bool holds = false;
  Estimate variance;
  Estimate rhs; // 2 C E |grad phi|^2
};

// Plug-in entropy estimator for Ent e^{phi(X)} over the n-fold product of
// spec, with exact constant-shift rescaling and delta-method intervals.
Estimate entropy_mc(const MeasureSpec& spec, std::size_t n,
                    const ConvexTestFunction& phi, std::size_t N,
                    std::uint64_t seed, int workers = 1);

// Right-hand side of the gradient-cost inequality.  beta = 0 requires
// m_plus_3sigma and enforces |d_i phi| <= 1/(2 m_plus_3sigma) at every
// sampled point.  Same seed means the same sample stream as entropy_mc.
Estimate rhs_mc(const MeasureSpec& spec, std::size_t n,
                const ConvexTestFunction& phi, double beta, std::size_t N,
                std::uint64_t seed,
                std::optional<double> m_plus_3sigma = std::nullopt,
                int workers = 1);

// (1/2) E (phi(X) - phi(Y)) (e^{phi(X)} - e^{phi(Y)}) over independent pairs.
Estimate symmetrized_functional(const MeasureSpec& spec, std::size_t n,
                                const ConvexTestFunction& phi, std::size_t N,
                                std::uint64_t seed, int workers = 1);

// Var phi <= 2 C E |grad phi|^2 with conservative interval widening.
PoincareResult poincare_check(const MeasureSpec& spec, std::size_t n,
                              const ConvexTestFunction& phi, double C,
                              std::size_t N, std::uint64_t seed,
                              int workers = 1);

// Composite-Simpson quadrature of
//   phi'(x) phi'(y) e^{phi(y)} P(X <= min(x,y)) P(X >= max(x,y))
// over the square grid; requires an odd point count.
double covariance_kernel_bound(const MeasureSpec& spec,
                               const ConvexTestFunction& phi,
                               const UniformGrid& x_grid);

EntropyReport make_entropy_report(const MeasureSpec& spec, std::size_t n,
                                  const ConvexTestFunction& phi, double beta,
                                  std::size_t N, std::uint64_t seed,
                                  std::optional<double> m_plus_3sigma = std::nullopt,
                                  int workers = 1);

} // namespace concentrate

#endif
