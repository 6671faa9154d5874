#ifndef CONCENTRATE_HERBST_HPP
#define CONCENTRATE_HERBST_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace concentrate {

// Closed-form upper-tail bound parameters.  The constant C comes from a
// fitted battery or the caller; it is never invented here.
struct ConcentrationBound {
  enum class Mode {
    smooth,    // A = sup l2 gradient norm, B = sup l_{(beta+1)/beta} norm
    lipschitz, // L2 and L_{1+beta} Lipschitz constants take the same slots
    beta0,     // Binf = sup max-norm of the gradient, plus the m+3sigma scale
  };

  Mode mode = Mode::smooth;
  double beta = 1.0;
  double C = 1.0;
  double A = 0.0;
  double B = 0.0;             // smooth/lipschitz second scale
  double Binf = 0.0;          // beta0 only
  double m_plus_3sigma = 0.0; // beta0 only

  void validate() const;
};

// P(phi - E phi >= t) bound:
//   exp(-(3/16) min{ t^2/(C A^2), t^{1+beta}/(C^beta B^{1+beta}) })
// for beta > 0, and
//   exp(-(1/4) min{ t^2/(C A^2), t/((m+3sigma) Binf) })
// for the beta = 0 mode.
double tail_bound(const ConcentrationBound& bound, double t);

// e^{-c_prime * r}: probability of escaping the r-enlargement
// A + r^{1/2} B_2 + r^{1/(1+beta)} B_{1+beta}.
double set_enlargement_bound(double beta, double c_prime, double r);

// Splits x = y + z with y_i = x_i where x_i^2 < |x_i|^{1+beta} (ties to z),
// so that sum y_i^2 and sum |z_i|^{1+beta} are both bounded by
// sum min(x_i^2, |x_i|^{1+beta}).
std::pair<std::vector<double>, std::vector<double>>
ball_decomposition(const std::vector<double>& x, double beta);

struct TailCompareRow {
  double t = 0.0;
  double bound = 0.0;
  double empirical = 0.0;
  double band_halfwidth = 0.0; // 3 binomial standard errors
  bool violation = false;
};

struct TailCompareReport {
  std::vector<TailCompareRow> rows;
  std::size_t violations = 0;
  double sample_mean = 0.0;
  std::size_t sample_count = 0;

  nlohmann::json to_json() const;
  void write_csv(const std::string& path) const;
};

// Compares the empirical tail of centered samples phi(X) - mean against
// tail_bound on t_grid; a violation is an empirical tail exceeding the bound
// by more than three binomial standard errors.
TailCompareReport empirical_tail_compare(const std::vector<double>& samples,
                                         const ConcentrationBound& bound,
                                         const std::vector<double>& t_grid);

} // namespace concentrate

#endif
