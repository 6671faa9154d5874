#include "concentrate/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "concentrate/detail/quadrature.hpp"

namespace concentrate {

namespace {

constexpr double kSlack = 1e-9; // relative slack on certificate inequalities
constexpr double kGridTailCut = 1e-10;

double side_tail(const MeasureSpec& spec, Side side, double x) {
  return side == Side::plus ? spec.upper_tail(x) : spec.lower_tail(-x);
}

struct SideProfile {
  std::vector<double> xs;
  std::vector<double> nu;
  std::vector<double> tail;
  bool censored = false;
  double censor_x = 0.0;
};

std::vector<double> build_grid(const MeasureSpec& spec, double m, Side side,
                               const GridConfig& cfg, bool* censored,
                               double* censor_x) {
  if (!(m > 0.0))
    throw std::invalid_argument("regularity: m must be positive");
  if (cfg.points < 2)
    throw std::invalid_argument("regularity: grid needs at least two points");
  double x_max;
  if (cfg.x_max) {
    x_max = *cfg.x_max;
  } else {
    x_max = side == Side::plus ? spec.quantile(1.0 - kGridTailCut)
                               : -spec.quantile(kGridTailCut);
  }
  if (censored)
    *censored = false;
  if (spec.is_discrete()) {
    // finite data: check only up to the largest observation on this side
    double top = side == Side::plus ? spec.quantile(1.0 - 1e-16)
                                    : -spec.quantile(1e-16);
    x_max = std::min(x_max, top);
    if (censored && spec.family() == "empirical") {
      *censored = true;
      *censor_x = x_max;
    }
  }
  if (!(x_max > m))
    return {m};
  std::vector<double> xs;
  xs.reserve(std::size_t(cfg.points));
  double lr = std::log(x_max / m);
  for (std::int64_t i = 0; i < cfg.points; ++i)
    xs.push_back(i == cfg.points - 1
                     ? x_max
                     : m * std::exp(lr * double(i) / double(cfg.points - 1)));
  if (spec.is_discrete()) {
    // include the jump points of the empirical tail
    for (double atom : spec.atoms()) {
      double a = side == Side::plus ? atom : -atom;
      if (a > m && a < x_max)
        xs.push_back(a);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  }
  return xs;
}

SideProfile side_profile(const MeasureSpec& spec, double beta, double m,
                         Side side, const GridConfig& cfg) {
  SideProfile p;
  p.xs = build_grid(spec, m, side, cfg, &p.censored, &p.censor_x);
  std::size_t n = p.xs.size();
  p.tail.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    p.tail[i] = side_tail(spec, side, p.xs[i]);
  p.nu.resize(n);

  if (spec.is_discrete()) {
    for (std::size_t i = 0; i < n; ++i)
      p.nu[i] = spec.nu_tail(beta, p.xs[i], side);
    return p;
  }

  // segment integrals between grid points, suffix-accumulated from the top
  // piece; dyadic blocks of segments are watched for failure to decay
  std::vector<double> seg(n > 0 ? n - 1 : 0, 0.0);
  auto f = [&](double y) { return std::pow(y, beta) * side_tail(spec, side, y); };
  for (std::size_t i = 0; i + 1 < n; ++i)
    seg[i] = detail::adaptive_simpson(f, p.xs[i], p.xs[i + 1]);

  double base = std::max(p.xs.front(), 1.0);
  double block_hi = 2.0 * base;
  double block_sum = 0.0, prev_block = -1.0, running = 0.0;
  int nondecaying = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    running += seg[i];
    double mid = 0.5 * (p.xs[i] + p.xs[i + 1]);
    if (mid > block_hi) {
      if (prev_block > 0.0 && block_sum >= 0.5 * prev_block &&
          block_sum > 1e-9 * running) {
        if (++nondecaying >= 8)
          throw DivergentTailError(
              "regularity: weighted tail integral fails to stabilize");
      } else {
        nondecaying = 0;
      }
      prev_block = block_sum;
      block_sum = 0.0;
      while (mid > block_hi)
        block_hi *= 2.0;
    }
    block_sum += seg[i];
  }

  double top = spec.nu_tail(beta, p.xs.back(), side);
  double acc = top;
  p.nu[n - 1] = acc;
  for (std::size_t i = n - 1; i-- > 0;) {
    acc += seg[i];
    p.nu[i] = acc;
  }
  return p;
}

} // namespace

RegularityCertificate check_membership(const MeasureSpec& spec, double beta,
                                       double m, double sigma_pow,
                                       const GridConfig& grid) {
  RegularityCertificate cert;
  cert.beta = beta;
  cert.m = m;
  cert.sigma_pow = sigma_pow;
  for (Side side : {Side::plus, Side::minus}) {
    SideProfile p;
    try {
      p = side_profile(spec, beta, m, side, grid);
    } catch (const DivergentTailError&) {
      cert.certified = false;
      cert.witness_x = m;
      cert.witness_side = side;
      cert.reason = "nu-tail infinite";
      return cert;
    }
    double worst = 0.0;
    std::optional<double> witness;
    for (std::size_t i = 0; i < p.xs.size(); ++i) {
      if (p.tail[i] <= 0.0)
        continue;
      double r = p.nu[i] / (sigma_pow * p.tail[i]);
      if (r > worst) {
        worst = r;
        if (r > 1.0 + kSlack)
          witness = p.xs[i];
      }
    }
    if (side == Side::plus) {
      cert.worst_ratio_plus = worst;
      cert.grid_min = p.xs.front();
      cert.grid_max = p.xs.back();
      cert.grid_points = std::int64_t(p.xs.size());
      if (p.censored)
        cert.censored_at = p.censor_x;
    } else {
      cert.worst_ratio_minus = worst;
    }
    if (witness && !cert.witness_x) {
      cert.witness_x = *witness;
      cert.witness_side = side;
      cert.reason = "tail-domination inequality violated";
    }
  }
  cert.certified = cert.worst_ratio_plus <= 1.0 + kSlack &&
                   cert.worst_ratio_minus <= 1.0 + kSlack;
  if (cert.certified) {
    cert.witness_x.reset();
    cert.witness_side.reset();
    cert.reason.clear();
  }
  return cert;
}

double estimate_sigma(const MeasureSpec& spec, double beta, double m,
                      const GridConfig& grid) {
  double worst = 0.0;
  for (Side side : {Side::plus, Side::minus}) {
    SideProfile p;
    try {
      p = side_profile(spec, beta, m, side, grid);
    } catch (const DivergentTailError&) {
      return std::numeric_limits<double>::infinity();
    }
    for (std::size_t i = 0; i < p.xs.size(); ++i)
      if (p.tail[i] > 0.0)
        worst = std::max(worst, p.nu[i] / p.tail[i]);
  }
  return worst;
}

ShiftCheckResult check_shift_condition(const MeasureSpec& spec, double beta,
                                       const ShiftCondition& cond,
                                       const GridConfig& grid) {
  if (!(cond.h > 0.0) || !(cond.alpha > 0.0 && cond.alpha < 1.0))
    throw std::invalid_argument("check_shift_condition: need h > 0, alpha in (0,1)");
  ShiftCheckResult res;
  res.holds = true;
  for (Side side : {Side::plus, Side::minus}) {
    auto xs = build_grid(spec, cond.m, side, grid, nullptr, nullptr);
    for (double x : xs) {
      if (!(x > cond.m))
        continue;
      double t = side_tail(spec, side, x);
      if (t <= 0.0)
        continue;
      double shifted = side_tail(spec, side, x + cond.h / std::pow(x, beta));
      double r = shifted / (cond.alpha * t);
      res.worst_ratio = std::max(res.worst_ratio, r);
      if (r > 1.0 + kSlack && res.holds) {
        res.holds = false;
        res.witness_x = x;
        res.witness_side = side;
      }
    }
  }
  return res;
}

ShiftCondition shift_from_sigma(double sigma_pow, double m) {
  if (!(sigma_pow > 0.0))
    throw std::invalid_argument("shift_from_sigma: sigma_pow must be positive");
  return {2.0 * sigma_pow, 0.5, m};
}

double sigma_from_shift(double beta, const ShiftCondition& cond) {
  if (!(cond.h > 0.0) || !(cond.alpha > 0.0 && cond.alpha < 1.0) || !(cond.m > 0.0))
    throw std::invalid_argument("sigma_from_shift: invalid shift condition");
  return cond.h * std::pow(1.0 + cond.h / std::pow(cond.m, beta + 1.0), beta) /
         (1.0 - cond.alpha);
}

double m_tilde(double beta, double m, double sigma) {
  if (!(beta >= 0.0 && beta <= 1.0) || !(m > 0.0) || !(sigma >= 0.0))
    throw std::invalid_argument("m_tilde: need beta in [0,1], m > 0, sigma >= 0");
  double a = std::max(m, std::pow(2.0 * beta, 1.0 / (beta + 1.0)) * sigma);
  return a + 2.0 * std::pow(sigma, beta + 1.0) / std::pow(a, beta);
}

TailDecayReport tail_decay_check(const SampleBatch& batch, double beta, double m,
                                 double sigma, const std::vector<double>& t_grid) {
  (void)m;
  if (batch.values.size() < 10000)
    throw std::invalid_argument("tail_decay_check: batch size must be >= 1e4");
  if (t_grid.empty())
    throw std::invalid_argument("tail_decay_check: empty t grid");
  std::vector<double> abs_sorted;
  abs_sorted.reserve(batch.values.size());
  for (double v : batch.values)
    abs_sorted.push_back(std::abs(v));
  std::sort(abs_sorted.begin(), abs_sorted.end());
  auto emp_tail = [&](double t) {
    auto it = std::lower_bound(abs_sorted.begin(), abs_sorted.end(), t);
    return double(abs_sorted.end() - it) / double(abs_sorted.size());
  };

  TailDecayReport rep;
  double c2 = (beta + 1.0) * std::pow(sigma, beta + 1.0);
  if (!(c2 > 0.0)) {
    // least-squares decay scale from the positive part of the empirical tail
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t k = 0;
    for (double t : t_grid) {
      double e = emp_tail(t);
      if (e <= 0.0)
        continue;
      double u = std::pow(t, beta + 1.0);
      sx += u; sy += std::log(e); sxx += u * u; sxy += u * std::log(e);
      ++k;
    }
    double denom = double(k) * sxx - sx * sx;
    double slope = denom != 0.0 ? (double(k) * sxy - sx * sy) / denom : 0.0;
    if (!(slope < 0.0)) {
      rep.reason = "empirical tail does not decay on the given grid";
      return rep;
    }
    c2 = -1.0 / slope;
  }
  double log_c1 = -std::numeric_limits<double>::infinity();
  for (double t : t_grid) {
    double e = emp_tail(t);
    if (e > 0.0)
      log_c1 = std::max(log_c1, std::log(e) + std::pow(t, beta + 1.0) / c2);
  }
  if (!(log_c1 < 700.0)) {
    rep.reason = "no dominating envelope at this decay scale";
    return rep;
  }
  rep.fitted = true;
  rep.c1 = std::exp(std::max(log_c1, -700.0));
  rep.c2 = c2;
  rep.max_violation = -std::numeric_limits<double>::infinity();
  for (double t : t_grid)
    rep.max_violation =
        std::max(rep.max_violation,
                 emp_tail(t) - rep.c1 * std::exp(-std::pow(t, beta + 1.0) / c2));
  return rep;
}

double barthe_roberto_functional(const MeasureSpec& spec, double beta, double y) {
  if (!(beta > 0.0 && beta <= 1.0))
    throw std::invalid_argument("barthe_roberto_functional: need beta in (0,1]");
  if (!spec.has_density())
    throw std::logic_error("barthe_roberto_functional: spec has no density");
  double med = spec.median();
  if (y < med)
    throw std::invalid_argument("barthe_roberto_functional: need y >= median");
  double tail = spec.upper_tail(y);
  if (tail <= 0.0 || tail >= 1.0)
    return 0.0;
  auto f = [&](double t) { return std::pow(spec.density(t), -beta); };
  double integral = detail::adaptive_simpson(f, med, y);
  return tail * std::log(1.0 / tail) * std::pow(integral, 1.0 / beta);
}

nlohmann::json RegularityCertificate::to_json() const {
  nlohmann::json j;
  j["beta"] = beta;
  j["m"] = m;
  j["sigma_pow"] = sigma_pow;
  j["status"] = certified ? "certified" : "refuted";
  j["worst_ratio_plus"] = worst_ratio_plus;
  j["worst_ratio_minus"] = worst_ratio_minus;
  j["grid"] = {{"min", grid_min},
               {"max", grid_max},
               {"points", grid_points},
               {"kind", "geometric"}};
  if (!certified) {
    j["reason"] = reason;
    if (witness_x)
      j["witness_x"] = *witness_x;
    if (witness_side)
      j["witness_side"] = *witness_side == Side::plus ? "plus" : "minus";
  }
  if (censored_at)
    j["censored_at"] = *censored_at;
  return j;
}

} // namespace concentrate
