#ifndef CONCENTRATE_MEASURE_MODEL_HPP
#define CONCENTRATE_MEASURE_MODEL_HPP

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "concentrate/rng.hpp"

namespace concentrate {

// Thrown when a weighted tail integral fails to stabilize (heavy-tailed
// measure); callers treat this as a certificate of non-membership.
struct DivergentTailError : std::runtime_error {
  explicit DivergentTailError(const std::string& what) : std::runtime_error(what) {}
};

enum class Side { plus, minus };

struct SampleBatch {
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::string spec_label;
};

// A one-dimensional probability measure, given analytically (named family)
// or empirically (sorted sample / decreasing upper-tail table).  Immutable
// after construction; all queries are safe to call concurrently.
class MeasureSpec {
public:
  static MeasureSpec symmetric_exponential(double rate);
  static MeasureSpec symmetric_weibull(double p); // density proportional to exp(-|x|^p), p >= 1
  static MeasureSpec gaussian(double mean, double stddev);
  static MeasureSpec uniform(double a, double b);
  static MeasureSpec two_point(double x1, double p1, double x2);
  static MeasureSpec empirical(std::vector<double> sorted_values);
  // Knots (x, upper_tail(x)) with strictly decreasing tails in (0, 1];
  // log-linear interpolation between knots, log-linear extrapolation beyond.
  static MeasureSpec tail_table(std::vector<std::pair<double, double>> knots);

  static MeasureSpec from_json(const nlohmann::json& j);
  static MeasureSpec load(const std::string& path);
  nlohmann::json to_json() const;

  const std::string& label() const { return label_; }
  MeasureSpec& set_label(std::string l) { label_ = std::move(l); return *this; }
  const std::string& family() const;

  // mu([x, infinity)); nonincreasing, right-continuous.
  double upper_tail(double x) const;
  // mu((-infinity, x]).
  double lower_tail(double x) const;

  bool has_density() const;
  double density(double x) const;

  // Smallest x with lower_tail(x) >= q, q in (0,1).
  double quantile(double q) const;
  double median() const { return quantile(0.5); }

  // Weighted tail integral: for side = plus, int_x^inf y^beta mu([y,inf)) dy
  // (x >= 0); for side = minus the mirror image int_{-inf}^{-x} |y|^beta
  // mu((-inf,y]) dy.  Throws DivergentTailError when the integral does not
  // stabilize.  Discrete specs are summed exactly; analytic specs use
  // adaptive quadrature up to the (1 - 1e-12)-quantile plus a fitted
  // exponential-tail remainder.
  double nu_tail(double beta, double x, Side side) const;

  // n seeded inverse-CDF draws; bit-identical for identical (spec, n, seed).
  SampleBatch sample(std::size_t n, std::uint64_t seed) const;
  // Single inverse-CDF draw from a caller-managed stream.
  double draw(Prng& rng) const;

  // Purely atomic specs (two_point, empirical).
  bool is_discrete() const;
  // Ascending atom locations; empty for continuous specs.
  std::vector<double> atoms() const;

private:
  struct Impl;
  explicit MeasureSpec(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
  std::string label_;
};

// Newline-separated decimal floats, 17 significant digits.
void write_sample_file(const std::string& path, const std::vector<double>& values);
std::vector<double> read_sample_file(const std::string& path);

} // namespace concentrate

#endif
