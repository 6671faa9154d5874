#ifndef CONCENTRATE_REGULARITY_HPP
#define CONCENTRATE_REGULARITY_HPP

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "concentrate/measure_model.hpp"

namespace concentrate {

// Geometric grid on [m, x_max]; x_max defaults to the (1 - 1e-10)-quantile
// (capped at the largest sample for empirical specs, recorded as censoring).
struct GridConfig {
  std::int64_t points = 4096;
  std::optional<double> x_max;
};

struct RegularityCertificate {
  double beta = 0.0;
  double m = 0.0;
  double sigma_pow = 0.0;
  bool certified = false;
  double worst_ratio_plus = 0.0;
  double worst_ratio_minus = 0.0;
  // populated when refuted
  std::optional<double> witness_x;
  std::optional<Side> witness_side;
  std::string reason; // empty when certified
  // grid description
  double grid_min = 0.0, grid_max = 0.0;
  std::int64_t grid_points = 0;
  std::optional<double> censored_at;

  nlohmann::json to_json() const;
};

struct ShiftCondition {
  double h = 0.0;
  double alpha = 0.0;
  double m = 0.0;
};

struct ShiftCheckResult {
  bool holds = false;
  std::optional<double> witness_x;
  std::optional<Side> witness_side;
  double worst_ratio = 0.0; // max over grid of shifted tail / (alpha * tail)
};

struct TailDecayReport {
  bool fitted = false;
  double c1 = 0.0;
  double c2 = 0.0;
  double max_violation = 0.0; // max over t_grid of empirical - envelope
  std::string reason;         // set when the fit fails
};

// Both tail-domination inequalities checked on the geometric grid, with
// relative slack 1e-9.  A divergent weighted tail refutes immediately.
RegularityCertificate check_membership(const MeasureSpec& spec, double beta,
                                       double m, double sigma_pow,
                                       const GridConfig& grid = {});

// Smallest grid-certified sigma^{beta+1}: sup over grid and sides of the
// ratio nu-tail / mu-tail.  +infinity when the weighted tail diverges.
double estimate_sigma(const MeasureSpec& spec, double beta, double m,
                      const GridConfig& grid = {});

// Shifted-tail condition mu([x + h/x^beta, inf)) <= alpha * mu([x, inf))
// (and its mirror) at all grid x > m.
ShiftCheckResult check_shift_condition(const MeasureSpec& spec, double beta,
                                       const ShiftCondition& cond,
                                       const GridConfig& grid = {});

// The two directions of the tail-condition equivalence.
ShiftCondition shift_from_sigma(double sigma_pow, double m);
double sigma_from_shift(double beta, const ShiftCondition& cond);

// a + 2 sigma^{beta+1} / a^beta with a = max(m, (2 beta)^{1/(beta+1)} sigma);
// reduces to m + 2 sigma at beta = 0.
double m_tilde(double beta, double m, double sigma);

// Fits the smallest stretched-exponential envelope c1 * exp(-t^{beta+1}/c2)
// with c2 >= (beta+1) sigma^{beta+1} dominating the empirical |X| tail on
// t_grid.
TailDecayReport tail_decay_check(const SampleBatch& batch, double beta, double m,
                                 double sigma, const std::vector<double>& t_grid);

// mu([y,inf)) * log(1/mu([y,inf))) * (int_M^y density(t)^{-beta} dt)^{1/beta}
// with M the median; requires beta > 0, y >= M, and a density.
double barthe_roberto_functional(const MeasureSpec& spec, double beta, double y);

} // namespace concentrate

#endif
