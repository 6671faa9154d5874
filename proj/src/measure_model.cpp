#include "concentrate/measure_model.hpp"

#include <algorithm>
#include <mutex>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include <gsl/gsl_cdf.h>
#include <gsl/gsl_sf_gamma.h>

#include <nlohmann/json.hpp>

#include "concentrate/detail/quadrature.hpp"

namespace concentrate {

using detail::adaptive_simpson;

namespace {

constexpr double kTailCut = 1e-12; // quadrature truncation quantile

// Inverse standard normal CDF (Acklam's rational approximation, polished
// with one Halley step against erfc); |error| < 1e-15 over (0,1).
double norm_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r, x;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    q = p - 0.5;
    r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement.
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

enum class Family {
  sym_exponential,
  sym_weibull,
  gaussian,
  uniform,
  two_point,
  empirical,
  table,
};

const char* family_name(Family f) {
  switch (f) {
  case Family::sym_exponential: return "symmetric_exponential";
  case Family::sym_weibull: return "symmetric_weibull";
  case Family::gaussian: return "gaussian";
  case Family::uniform: return "uniform";
  case Family::two_point: return "two_point";
  case Family::empirical: return "empirical";
  case Family::table: return "table";
  }
  return "?";
}

} // namespace

struct MeasureSpec::Impl {
  static std::shared_ptr<Impl> create(Family f) {
    auto impl = std::make_shared<Impl>();
    impl->family = f;
    impl->family_str = family_name(f);
    return impl;
  }

  Family family;
  std::string family_str;

  // family parameters (unused slots left at zero)
  double rate = 0.0;       // sym_exponential
  double p = 0.0;          // sym_weibull
  double mean = 0.0, sd = 0.0; // gaussian
  double a = 0.0, b = 0.0; // uniform
  double x1 = 0.0, p1 = 0.0, x2 = 0.0; // two_point
  std::vector<double> samples;               // empirical, ascending
  std::vector<double> knot_x, knot_logt;     // table

  // Lazily built inverse-CDF interpolant used by draw() for families whose
  // exact quantile is expensive (symmetric weibull goes through the inverse
  // incomplete gamma).  Cubic Hermite in z = logit(q) with exact slopes
  // dx/dz = q(1-q)/density(x); the extreme tails fall back to the exact
  // quantile.  Deterministic, so sampling stays bit-reproducible.
  static constexpr double kSamplerL = 30.0;
  static constexpr std::size_t kSamplerN = 4097;
  mutable std::once_flag sampler_once;
  mutable std::vector<double> sampler_x, sampler_m;

  double weibull_shape() const { return 1.0 / p; }

  double upper_tail(double x) const {
    switch (family) {
    case Family::sym_exponential:
      return x >= 0.0 ? 0.5 * std::exp(-rate * x) : 1.0 - 0.5 * std::exp(rate * x);
    case Family::sym_weibull: {
      double ax = std::abs(x);
      double q = 0.5 * gsl_sf_gamma_inc_Q(weibull_shape(), std::pow(ax, p));
      return x >= 0.0 ? q : 1.0 - q;
    }
    case Family::gaussian:
      return 0.5 * std::erfc((x - mean) / (sd * std::sqrt(2.0)));
    case Family::uniform:
      if (x <= a) return 1.0;
      if (x >= b) return 0.0;
      return (b - x) / (b - a);
    case Family::two_point: {
      double t = 0.0;
      if (x <= x1) t += p1;
      if (x <= x2) t += 1.0 - p1;
      return t;
    }
    case Family::empirical: {
      auto it = std::lower_bound(samples.begin(), samples.end(), x);
      return double(samples.end() - it) / double(samples.size());
    }
    case Family::table:
      return table_tail(x);
    }
    return 0.0;
  }

  double table_tail(double x) const {
    const auto& xs = knot_x;
    const auto& lt = knot_logt;
    std::size_t n = xs.size();
    if (n == 1)
      return x <= xs[0] ? std::min(1.0, std::exp(lt[0])) : 0.0;
    double logv;
    if (x <= xs.front()) {
      double s = (lt[1] - lt[0]) / (xs[1] - xs[0]);
      logv = lt[0] + s * (x - xs[0]);
    } else if (x >= xs.back()) {
      double s = (lt[n - 1] - lt[n - 2]) / (xs[n - 1] - xs[n - 2]);
      logv = lt[n - 1] + s * (x - xs[n - 1]);
    } else {
      auto it = std::upper_bound(xs.begin(), xs.end(), x);
      std::size_t i = std::size_t(it - xs.begin());
      double s = (lt[i] - lt[i - 1]) / (xs[i] - xs[i - 1]);
      logv = lt[i - 1] + s * (x - xs[i - 1]);
    }
    return std::min(1.0, std::exp(logv));
  }

  double lower_tail(double x) const {
    switch (family) {
    case Family::sym_exponential:
      // direct branches avoid cancellation deep in the left tail
      return x <= 0.0 ? 0.5 * std::exp(rate * x) : 1.0 - 0.5 * std::exp(-rate * x);
    case Family::sym_weibull: {
      double q = 0.5 * gsl_sf_gamma_inc_Q(weibull_shape(), std::pow(std::abs(x), p));
      return x <= 0.0 ? q : 1.0 - q;
    }
    case Family::gaussian:
      return 0.5 * std::erfc((mean - x) / (sd * std::sqrt(2.0)));
    case Family::uniform:
      if (x <= a) return 0.0;
      if (x >= b) return 1.0;
      return (x - a) / (b - a);
    case Family::two_point: {
      double t = 0.0;
      if (x >= x1) t += p1;
      if (x >= x2) t += 1.0 - p1;
      return t;
    }
    case Family::empirical: {
      auto it = std::upper_bound(samples.begin(), samples.end(), x);
      return double(it - samples.begin()) / double(samples.size());
    }
    default:
      return 1.0 - upper_tail(x);
    }
  }

  bool has_density() const {
    switch (family) {
    case Family::sym_exponential:
    case Family::sym_weibull:
    case Family::gaussian:
    case Family::uniform:
      return true;
    default:
      return false;
    }
  }

  double density(double x) const {
    switch (family) {
    case Family::sym_exponential:
      return 0.5 * rate * std::exp(-rate * std::abs(x));
    case Family::sym_weibull: {
      double z = 2.0 * gsl_sf_gamma(1.0 + 1.0 / p);
      return std::exp(-std::pow(std::abs(x), p)) / z;
    }
    case Family::gaussian: {
      double u = (x - mean) / sd;
      return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * M_PI));
    }
    case Family::uniform:
      return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0;
    default:
      throw std::logic_error("MeasureSpec: density unavailable for family " +
                             std::string(family_name(family)));
    }
  }

  // Smallest x with lower_tail(x) >= q.
  double quantile(double q) const {
    if (!(q > 0.0 && q < 1.0))
      throw std::invalid_argument("quantile: q must lie in (0,1)");
    double u = 1.0 - q; // target upper tail at a continuity point
    switch (family) {
    case Family::sym_exponential:
      return u <= 0.5 ? -std::log(2.0 * u) / rate : std::log(2.0 * (1.0 - u)) / rate;
    case Family::sym_weibull: {
      double shape = weibull_shape();
      if (u <= 0.5)
        return std::pow(gsl_cdf_gamma_Qinv(2.0 * u, shape, 1.0), 1.0 / p);
      return -std::pow(gsl_cdf_gamma_Qinv(2.0 * (1.0 - u), shape, 1.0), 1.0 / p);
    }
    case Family::gaussian:
      return mean + sd * norm_quantile(q);
    case Family::uniform:
      return a + q * (b - a);
    case Family::two_point:
      return q <= p1 ? x1 : x2;
    case Family::empirical: {
      std::size_t n = samples.size();
      std::size_t k = std::size_t(std::ceil(q * double(n)));
      if (k == 0) k = 1;
      if (k > n) k = n;
      return samples[k - 1];
    }
    case Family::table:
      return table_quantile(u);
    }
    return 0.0;
  }

  double table_quantile(double u) const {
    // invert the log-linear upper tail
    const auto& xs = knot_x;
    const auto& lt = knot_logt;
    std::size_t n = xs.size();
    double lu = std::log(u);
    if (n == 1 || lu >= lt.front()) {
      double s = n > 1 ? (lt[1] - lt[0]) / (xs[1] - xs[0]) : -1.0;
      return xs.front() + (lu - lt.front()) / s;
    }
    if (lu <= lt.back()) {
      double s = (lt[n - 1] - lt[n - 2]) / (xs[n - 1] - xs[n - 2]);
      return xs.back() + (lu - lt.back()) / s;
    }
    // lt is strictly decreasing
    auto it = std::lower_bound(lt.begin(), lt.end(), lu, std::greater<double>());
    std::size_t i = std::size_t(it - lt.begin()); // first index with lt[i] <= lu
    double s = (lt[i] - lt[i - 1]) / (xs[i] - xs[i - 1]);
    return xs[i - 1] + (lu - lt[i - 1]) / s;
  }

  bool is_discrete() const {
    return family == Family::two_point || family == Family::empirical;
  }

  double fast_quantile(double q) const {
    double z = std::log(q / (1.0 - q));
    if (!(std::abs(z) < kSamplerL))
      return quantile(q);
    std::call_once(sampler_once, [&] {
      std::vector<double> xs(kSamplerN), ms(kSamplerN);
      double h = 2.0 * kSamplerL / double(kSamplerN - 1);
      for (std::size_t i = 0; i < kSamplerN; ++i) {
        double zi = -kSamplerL + double(i) * h;
        double qi = 1.0 / (1.0 + std::exp(-zi));
        double xi = quantile(qi);
        xs[i] = xi;
        ms[i] = qi * (1.0 - qi) / density(xi);
      }
      sampler_x = std::move(xs);
      sampler_m = std::move(ms);
    });
    double h = 2.0 * kSamplerL / double(kSamplerN - 1);
    double pos = (z + kSamplerL) / h;
    std::size_t i = std::min(kSamplerN - 2, std::size_t(pos));
    double t = pos - double(i);
    double t2 = t * t, t3 = t2 * t;
    return (2.0 * t3 - 3.0 * t2 + 1.0) * sampler_x[i] +
           (t3 - 2.0 * t2 + t) * h * sampler_m[i] +
           (-2.0 * t3 + 3.0 * t2) * sampler_x[i + 1] +
           (t3 - t2) * h * sampler_m[i + 1];
  }

  double draw(Prng& rng) const {
    double u = rng.uniform01();
    switch (family) {
    case Family::sym_weibull:
      return fast_quantile(u);
    case Family::two_point:
      return u <= p1 ? x1 : x2;
    case Family::empirical: {
      std::size_t n = samples.size();
      std::size_t k = std::min(n - 1, std::size_t(u * double(n)));
      return samples[k];
    }
    default:
      return quantile(u);
    }
  }

  double nu_tail_discrete(double beta, double x, Side side) const {
    // atoms and masses in the orientation of the chosen side
    std::vector<std::pair<double, double>> atoms; // (location, mass), ascending
    if (family == Family::two_point) {
      atoms = {{x1, p1}, {x2, 1.0 - p1}};
    } else {
      double w = 1.0 / double(samples.size());
      for (double v : samples)
        atoms.emplace_back(v, w);
    }
    if (side == Side::minus) {
      for (auto& a : atoms)
        a.first = -a.first;
      std::sort(atoms.begin(), atoms.end());
    }
    // T(y) on (c_{j-1}, c_j] equals the mass at or above c_j
    double total = 0.0;
    double suffix = 0.0;
    for (std::size_t j = atoms.size(); j-- > 0;) {
      suffix += atoms[j].second;
      double hi = atoms[j].first;
      double lo = j > 0 ? atoms[j - 1].first : -std::numeric_limits<double>::infinity();
      lo = std::max(lo, x);
      if (hi <= lo)
        continue;
      double tail_on_interval = suffix; // includes atom at hi
      total += tail_on_interval *
               (std::pow(hi, beta + 1.0) - std::pow(lo, beta + 1.0)) / (beta + 1.0);
    }
    return total;
  }

  double nu_tail(double beta, double x, Side side) const {
    if (!(x >= 0.0))
      throw std::invalid_argument("nu_tail: x must be nonnegative");
    if (is_discrete())
      return nu_tail_discrete(beta, x, side);

    auto tail = [&](double y) {
      return side == Side::plus ? upper_tail(y) : lower_tail(-y);
    };
    if (tail(x) <= 0.0)
      return 0.0;
    double T = side == Side::plus ? quantile(1.0 - kTailCut) : -quantile(kTailCut);
    auto f = [&](double y) { return std::pow(y, beta) * tail(y); };

    double total = 0.0;
    if (T > x) {
      // dyadic windows; failure of the window contributions to decay flags a
      // divergent integral
      double base = std::max(x, 1.0);
      double lo = x;
      double prev = -1.0;
      int nondecaying = 0;
      int k = 0;
      while (lo < T) {
        double hi = std::min(T, base * std::pow(2.0, double(k + 1)));
        if (hi <= lo) { ++k; continue; }
        double w = adaptive_simpson(f, lo, hi);
        total += w;
        if (prev > 0.0 && w >= 0.5 * prev && w > 1e-9 * total)
          ++nondecaying;
        else
          nondecaying = 0;
        if (nondecaying >= 8)
          throw DivergentTailError("nu_tail: weighted tail integral of '" +
                                   std::string(family_name(family)) +
                                   "' fails to stabilize (nu-tail infinite)");
        prev = w;
        lo = hi;
        if (++k > 200)
          throw DivergentTailError("nu_tail: truncation point not reached");
      }
    }
    double Teff = std::max(T, x);
    // fitted exponential remainder beyond the truncation point
    double tT = tail(Teff);
    if (tT > 0.0) {
      double h = std::max(1e-6, 1e-4 * std::abs(Teff));
      double tL = tail(Teff - h);
      if (!(tL > tT))
        throw DivergentTailError("nu_tail: tail not decaying at truncation point");
      double lambda = (std::log(tL) - std::log(tT)) / h;
      total += std::pow(Teff, beta) * tT / lambda;
    }
    return total;
  }
};

MeasureSpec::MeasureSpec(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {
  label_ = impl_->family_str;
}

MeasureSpec MeasureSpec::symmetric_exponential(double rate) {
  if (!(rate > 0.0))
    throw std::invalid_argument("symmetric_exponential: rate must be positive");
  auto i = Impl::create(Family::sym_exponential);
  i->rate = rate;
  return MeasureSpec(i);
}

MeasureSpec MeasureSpec::symmetric_weibull(double p) {
  if (!(p >= 1.0))
    throw std::invalid_argument("symmetric_weibull: p must be >= 1");
  auto i = Impl::create(Family::sym_weibull);
  i->p = p;
  return MeasureSpec(i);
}

MeasureSpec MeasureSpec::gaussian(double mean, double stddev) {
  if (!(stddev > 0.0))
    throw std::invalid_argument("gaussian: stddev must be positive");
  auto i = Impl::create(Family::gaussian);
  i->mean = mean;
  i->sd = stddev;
  return MeasureSpec(i);
}

MeasureSpec MeasureSpec::uniform(double a, double b) {
  if (!(a < b))
    throw std::invalid_argument("uniform: need a < b");
  auto i = Impl::create(Family::uniform);
  i->a = a;
  i->b = b;
  return MeasureSpec(i);
}

MeasureSpec MeasureSpec::two_point(double x1, double p1, double x2) {
  if (!(p1 > 0.0 && p1 < 1.0))
    throw std::invalid_argument("two_point: p1 must lie in (0,1)");
  if (x1 == x2)
    throw std::invalid_argument("two_point: atoms must be distinct");
  auto i = Impl::create(Family::two_point);
  if (x1 < x2) {
    i->x1 = x1; i->p1 = p1; i->x2 = x2;
  } else {
    i->x1 = x2; i->p1 = 1.0 - p1; i->x2 = x1;
  }
  return MeasureSpec(i);
}

MeasureSpec MeasureSpec::empirical(std::vector<double> sorted_values) {
  if (sorted_values.empty())
    throw std::invalid_argument("empirical: sample list must be nonempty");
  if (!std::is_sorted(sorted_values.begin(), sorted_values.end()))
    throw std::invalid_argument("empirical: sample list must be sorted");
  auto i = Impl::create(Family::empirical);
  i->samples = std::move(sorted_values);
  return MeasureSpec(i);
}

MeasureSpec MeasureSpec::tail_table(std::vector<std::pair<double, double>> knots) {
  if (knots.empty())
    throw std::invalid_argument("tail_table: need at least one knot");
  auto i = Impl::create(Family::table);
  double prev_x = -std::numeric_limits<double>::infinity();
  double prev_t = 2.0;
  for (auto& [x, t] : knots) {
    if (!(t > 0.0 && t <= 1.0))
      throw std::invalid_argument("tail_table: tail values must lie in (0,1]");
    if (!(x > prev_x && t < prev_t))
      throw std::invalid_argument("tail_table: knots must be strictly decreasing");
    prev_x = x;
    prev_t = t;
    i->knot_x.push_back(x);
    i->knot_logt.push_back(std::log(t));
  }
  return MeasureSpec(i);
}

const std::string& MeasureSpec::family() const { return impl_->family_str; }

double MeasureSpec::upper_tail(double x) const { return impl_->upper_tail(x); }
double MeasureSpec::lower_tail(double x) const { return impl_->lower_tail(x); }
bool MeasureSpec::has_density() const { return impl_->has_density(); }
double MeasureSpec::density(double x) const { return impl_->density(x); }
double MeasureSpec::quantile(double q) const { return impl_->quantile(q); }
bool MeasureSpec::is_discrete() const { return impl_->is_discrete(); }

std::vector<double> MeasureSpec::atoms() const {
  if (impl_->family == Family::two_point)
    return {impl_->x1, impl_->x2};
  if (impl_->family == Family::empirical)
    return impl_->samples;
  return {};
}

double MeasureSpec::nu_tail(double beta, double x, Side side) const {
  return impl_->nu_tail(beta, x, side);
}

double MeasureSpec::draw(Prng& rng) const { return impl_->draw(rng); }

SampleBatch MeasureSpec::sample(std::size_t n, std::uint64_t seed) const {
  if (n < 1)
    throw std::invalid_argument("sample: n must be >= 1");
  SampleBatch batch;
  batch.seed = seed;
  batch.spec_label = label_;
  batch.values.reserve(n);
  Prng rng(seed);
  for (std::size_t i = 0; i < n; ++i)
    batch.values.push_back(impl_->draw(rng));
  return batch;
}

MeasureSpec MeasureSpec::from_json(const nlohmann::json& j) {
  std::string fam = j.at("family").get<std::string>();
  auto params = j.value("params", nlohmann::json::object());
  MeasureSpec spec = [&]() {
    if (fam == "symmetric_exponential")
      return symmetric_exponential(params.at("rate").get<double>());
    if (fam == "symmetric_weibull")
      return symmetric_weibull(params.at("p").get<double>());
    if (fam == "gaussian")
      return gaussian(params.at("mean").get<double>(), params.at("stddev").get<double>());
    if (fam == "uniform")
      return uniform(params.at("a").get<double>(), params.at("b").get<double>());
    if (fam == "two_point")
      return two_point(params.at("x1").get<double>(), params.at("p1").get<double>(),
                       params.at("x2").get<double>());
    if (fam == "empirical") {
      std::vector<double> v;
      if (j.contains("path"))
        v = read_sample_file(j.at("path").get<std::string>());
      else
        v = j.at("values").get<std::vector<double>>();
      std::sort(v.begin(), v.end());
      return empirical(std::move(v));
    }
    if (fam == "table") {
      std::vector<std::pair<double, double>> knots;
      for (const auto& k : j.at("knots"))
        knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
      return tail_table(std::move(knots));
    }
    throw std::invalid_argument("MeasureSpec: unknown family '" + fam + "'");
  }();
  if (j.contains("label"))
    spec.set_label(j.at("label").get<std::string>());
  return spec;
}

MeasureSpec MeasureSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("MeasureSpec: cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

nlohmann::json MeasureSpec::to_json() const {
  nlohmann::json j;
  j["family"] = impl_->family_str;
  j["label"] = label_;
  nlohmann::json p = nlohmann::json::object();
  switch (impl_->family) {
  case Family::sym_exponential: p["rate"] = impl_->rate; break;
  case Family::sym_weibull: p["p"] = impl_->p; break;
  case Family::gaussian: p["mean"] = impl_->mean; p["stddev"] = impl_->sd; break;
  case Family::uniform: p["a"] = impl_->a; p["b"] = impl_->b; break;
  case Family::two_point:
    p["x1"] = impl_->x1; p["p1"] = impl_->p1; p["x2"] = impl_->x2;
    break;
  case Family::empirical:
    j["values"] = impl_->samples;
    break;
  case Family::table: {
    nlohmann::json knots = nlohmann::json::array();
    for (std::size_t i = 0; i < impl_->knot_x.size(); ++i)
      knots.push_back({impl_->knot_x[i], std::exp(impl_->knot_logt[i])});
    j["knots"] = knots;
    break;
  }
  }
  j["params"] = p;
  return j;
}

void write_sample_file(const std::string& path, const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("write_sample_file: cannot open '" + path + "'");
  char buf[64];
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
}

std::vector<double> read_sample_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("read_sample_file: cannot open '" + path + "'");
  std::vector<double> v;
  double x;
  while (in >> x)
    v.push_back(x);
  return v;
}

} // namespace concentrate
