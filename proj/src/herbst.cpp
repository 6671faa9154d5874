#include "concentrate/herbst.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace concentrate {

void ConcentrationBound::validate() const {
  if (!(C > 0.0))
    throw std::invalid_argument("ConcentrationBound: C must be positive");
  switch (mode) {
  case Mode::smooth:
  case Mode::lipschitz:
    if (!(beta > 0.0 && beta <= 1.0))
      throw std::invalid_argument(
          "ConcentrationBound: this mode needs beta in (0, 1]");
    if (!(A > 0.0) || !(B > 0.0))
      throw std::invalid_argument(
          "ConcentrationBound: scale parameters must be positive");
    break;
  case Mode::beta0:
    if (beta != 0.0)
      throw std::invalid_argument(
          "ConcentrationBound: beta0 mode requires beta = 0");
    if (!(A > 0.0) || !(Binf > 0.0) || !(m_plus_3sigma > 0.0))
      throw std::invalid_argument(
          "ConcentrationBound: scale parameters must be positive");
    break;
  }
}

double tail_bound(const ConcentrationBound& bound, double t) {
  bound.validate();
  if (!(t >= 0.0))
    throw std::invalid_argument("tail_bound: t must be nonnegative");
  double exponent;
  if (bound.mode == ConcentrationBound::Mode::beta0) {
    exponent = (1.0 / 4.0) *
               std::min(t * t / (bound.C * bound.A * bound.A),
                        t / (bound.m_plus_3sigma * bound.Binf));
  } else {
    double quad = t * t / (bound.C * bound.A * bound.A);
    double heavy = std::pow(t, 1.0 + bound.beta) /
                   (std::pow(bound.C, bound.beta) *
                    std::pow(bound.B, 1.0 + bound.beta));
    exponent = (3.0 / 16.0) * std::min(quad, heavy);
  }
  return std::exp(-exponent);
}

double set_enlargement_bound(double beta, double c_prime, double r) {
  if (!(beta >= 0.0 && beta <= 1.0))
    throw std::invalid_argument("set_enlargement_bound: beta must be in [0, 1]");
  if (!(c_prime > 0.0))
    throw std::invalid_argument("set_enlargement_bound: c_prime must be positive");
  if (!(r >= 0.0))
    throw std::invalid_argument("set_enlargement_bound: r must be nonnegative");
  return std::exp(-c_prime * r);
}

std::pair<std::vector<double>, std::vector<double>>
ball_decomposition(const std::vector<double>& x, double beta) {
  if (!(beta > 0.0 && beta <= 1.0))
    throw std::invalid_argument("ball_decomposition: beta must be in (0, 1]");
  std::vector<double> y(x.size(), 0.0), z(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double a = std::abs(x[i]);
    // strict comparison: ties (|x_i| = 1, and everything at beta = 1) go to z
    if (x[i] * x[i] < std::pow(a, 1.0 + beta))
      y[i] = x[i];
    else
      z[i] = x[i];
  }
  return {std::move(y), std::move(z)};
}

TailCompareReport empirical_tail_compare(const std::vector<double>& samples,
                                         const ConcentrationBound& bound,
                                         const std::vector<double>& t_grid) {
  bound.validate();
  if (samples.empty())
    throw std::invalid_argument("empirical_tail_compare: no samples");
  std::vector<double> centered = samples;
  double mean = std::accumulate(centered.begin(), centered.end(), 0.0) /
                double(centered.size());
  for (double& v : centered)
    v -= mean;
  std::sort(centered.begin(), centered.end());

  TailCompareReport rep;
  rep.sample_mean = mean;
  rep.sample_count = samples.size();
  double n = double(centered.size());
  for (double t : t_grid) {
    TailCompareRow row;
    row.t = t;
    row.bound = tail_bound(bound, t);
    auto it = std::lower_bound(centered.begin(), centered.end(), t);
    double exceed = double(centered.end() - it);
    row.empirical = exceed / n;
    row.band_halfwidth =
        3.0 * std::sqrt(row.empirical * (1.0 - row.empirical) / n);
    row.violation = row.empirical - row.band_halfwidth > row.bound;
    if (row.violation)
      ++rep.violations;
    rep.rows.push_back(row);
  }
  return rep;
}

nlohmann::json TailCompareReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows)
    rows_json.push_back({{"t", r.t},
                         {"bound", r.bound},
                         {"empirical_tail", r.empirical},
                         {"band_halfwidth", r.band_halfwidth},
                         {"violation", r.violation}});
  return nlohmann::json{{"rows", rows_json},
                        {"violations", violations},
                        {"sample_mean", sample_mean},
                        {"sample_count", sample_count}};
}

void TailCompareReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("TailCompareReport: cannot open '" + path + "'");
  out << "t,bound,empirical_tail,band_halfwidth\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r.t, r.bound,
                  r.empirical, r.band_halfwidth);
    out << buf;
  }
}

} // namespace concentrate
