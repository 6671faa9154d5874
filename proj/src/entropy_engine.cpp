#include "concentrate/entropy_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <thread>

#include <nlohmann/json.hpp>

namespace concentrate {

namespace {

constexpr std::size_t kChunk = 4096;

double lq_norm(const std::vector<double>& v, double q) {
  if (std::isinf(q)) {
    double m = 0.0;
    for (double x : v)
      m = std::max(m, std::abs(x));
    return m;
  }
  double s = 0.0;
  for (double x : v)
    s += std::pow(std::abs(x), q);
  return std::pow(s, 1.0 / q);
}

// Runs fn(chunk_index, offset, size) over ceil(N / kChunk) chunks; each chunk
// writes only its own state, so the result is worker-count independent.
template <typename Fn>
void for_each_chunk(std::size_t N, int workers, Fn&& fn) {
  std::size_t n_chunks = (N + kChunk - 1) / kChunk;
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c)
      fn(c, c * kChunk, std::min(kChunk, N - c * kChunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= n_chunks)
        return;
      fn(c, c * kChunk, std::min(kChunk, N - c * kChunk));
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back(worker);
  for (auto& t : pool)
    t.join();
}

std::size_t chunk_count(std::size_t N) { return (N + kChunk - 1) / kChunk; }

void draw_point(const MeasureSpec& spec, std::size_t n, Prng& rng,
                std::vector<double>& x) {
  x.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = spec.draw(rng);
}

// Maximum of phi over the whole sample stream (the exact-shift constant).
double max_phi(const MeasureSpec& spec, std::size_t n,
               const ConvexTestFunction& phi, std::size_t N, std::uint64_t seed,
               int workers) {
  std::vector<double> maxima(chunk_count(N),
                             -std::numeric_limits<double>::infinity());
  for_each_chunk(N, workers, [&](std::size_t c, std::size_t, std::size_t size) {
    Prng rng(seed, c);
    std::vector<double> x;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size; ++i) {
      draw_point(spec, n, rng, x);
      m = std::max(m, phi.value(x));
    }
    maxima[c] = m;
  });
  double m = -std::numeric_limits<double>::infinity();
  for (double v : maxima)
    m = std::max(m, v);
  return m;
}

struct MeanVar {
  double mean = 0.0;
  double var = 0.0; // of the per-sample values
};

// Mean and variance of f(x) over the stream, reduced in fixed chunk order.
template <typename F>
MeanVar stream_moments(const MeasureSpec& spec, std::size_t n, std::size_t N,
                       std::uint64_t seed, int workers, F&& f) {
  std::size_t nc = chunk_count(N);
  std::vector<double> s1(nc, 0.0), s2(nc, 0.0);
  for_each_chunk(N, workers, [&](std::size_t c, std::size_t, std::size_t size) {
    Prng rng(seed, c);
    std::vector<double> x;
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
      draw_point(spec, n, rng, x);
      double v = f(x);
      a += v;
      b += v * v;
    }
    s1[c] = a;
    s2[c] = b;
  });
  double a = 0.0, b = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    a += s1[c];
    b += s2[c];
  }
  MeanVar mv;
  mv.mean = a / double(N);
  mv.var = std::max(0.0, b / double(N) - mv.mean * mv.mean);
  return mv;
}

} // namespace

ConvexTestFunction ConvexTestFunction::linear(std::vector<double> coeffs) {
  ConvexTestFunction f;
  f.name = "linear";
  auto a = std::make_shared<std::vector<double>>(std::move(coeffs));
  f.value = [a](const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      s += (*a)[i % a->size()] * x[i];
    return s;
  };
  f.gradient = [a](const std::vector<double>& x) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      g[i] = (*a)[i % a->size()];
    return g;
  };
  f.grad_norm_bound = [a](double q) { return lq_norm(*a, q); };
  return f;
}

ConvexTestFunction ConvexTestFunction::max_coordinate() {
  ConvexTestFunction f;
  f.name = "max_coordinate";
  f.value = [](const std::vector<double>& x) {
    return *std::max_element(x.begin(), x.end());
  };
  f.gradient = [](const std::vector<double>& x) {
    // subgradient: indicator of the lowest-index maximizer
    std::vector<double> g(x.size(), 0.0);
    g[std::size_t(std::max_element(x.begin(), x.end()) - x.begin())] = 1.0;
    return g;
  };
  f.grad_norm_bound = [](double) { return 1.0; };
  return f;
}

ConvexTestFunction ConvexTestFunction::logsumexp(double scale) {
  ConvexTestFunction f;
  f.name = "logsumexp";
  f.value = [scale](const std::vector<double>& x) {
    double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x)
      s += std::exp((v - m) / scale);
    return m + scale * std::log(s);
  };
  f.gradient = [scale](const std::vector<double>& x) {
    double m = *std::max_element(x.begin(), x.end());
    std::vector<double> g(x.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      g[i] = std::exp((x[i] - m) / scale);
      s += g[i];
    }
    for (double& v : g)
      v /= s;
    return g;
  };
  // softmax weights lie in the probability simplex
  f.grad_norm_bound = [](double) { return 1.0; };
  return f;
}

ConvexTestFunction ConvexTestFunction::l2_norm_shifted(double center) {
  ConvexTestFunction f;
  f.name = "l2_norm_shifted";
  f.value = [center](const std::vector<double>& x) {
    double s = 1.0;
    for (double v : x)
      s += (v - center) * (v - center);
    return std::sqrt(s);
  };
  f.gradient = [center](const std::vector<double>& x) {
    double s = 1.0;
    for (double v : x)
      s += (v - center) * (v - center);
    double r = std::sqrt(s);
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      g[i] = (x[i] - center) / r;
    return g;
  };
  // gradient lies in the open Euclidean unit ball; l_q norms with q >= 2
  // (and q = infinity) are then at most 1
  f.grad_norm_bound = [](double q) {
    if (q >= 2.0 || std::isinf(q))
      return 1.0;
    throw std::invalid_argument("l2_norm_shifted: no uniform bound for q < 2");
  };
  return f;
}

ConvexTestFunction ConvexTestFunction::distance_to_box(double radius) {
  ConvexTestFunction f;
  f.name = "distance_to_box";
  auto excess = [radius](double v) {
    return std::max(0.0, std::abs(v) - radius);
  };
  f.value = [excess](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x)
      s += excess(v) * excess(v);
    return std::sqrt(s);
  };
  f.gradient = [excess, radius](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x)
      s += excess(v) * excess(v);
    double r = std::sqrt(s);
    std::vector<double> g(x.size(), 0.0);
    if (r == 0.0)
      return g;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (std::abs(x[i]) > radius)
        g[i] = (std::abs(x[i]) - radius) / r * (x[i] < 0.0 ? -1.0 : 1.0);
    return g;
  };
  f.grad_norm_bound = [](double q) {
    if (q >= 2.0 || std::isinf(q))
      return 1.0;
    throw std::invalid_argument("distance_to_box: no uniform bound for q < 2");
  };
  return f;
}

ConvexTestFunction ConvexTestFunction::scaled(const ConvexTestFunction& f,
                                              double s) {
  if (!(s > 0.0))
    throw std::invalid_argument("ConvexTestFunction::scaled: s must be positive");
  ConvexTestFunction g;
  g.name = f.name + "_x" + std::to_string(s);
  auto val = f.value;
  auto grad = f.gradient;
  auto bound = f.grad_norm_bound;
  g.value = [val, s](const std::vector<double>& x) { return s * val(x); };
  g.gradient = [grad, s](const std::vector<double>& x) {
    auto v = grad(x);
    for (double& u : v)
      u *= s;
    return v;
  };
  g.grad_norm_bound = [bound, s](double q) { return s * bound(q); };
  return g;
}

Estimate entropy_mc(const MeasureSpec& spec, std::size_t n,
                    const ConvexTestFunction& phi, std::size_t N,
                    std::uint64_t seed, int workers) {
  if (N < 2)
    throw std::invalid_argument("entropy_mc: N must be >= 2");
  double c = max_phi(spec, n, phi, N, seed, workers);

  std::size_t nc = chunk_count(N);
  std::vector<double> sA(nc, 0.0), sB(nc, 0.0), sAA(nc, 0.0), sBB(nc, 0.0),
      sAB(nc, 0.0);
  for_each_chunk(N, workers, [&](std::size_t ci, std::size_t, std::size_t size) {
    Prng rng(seed, ci);
    std::vector<double> x;
    double a = 0, b = 0, aa = 0, bb = 0, ab = 0;
    for (std::size_t i = 0; i < size; ++i) {
      draw_point(spec, n, rng, x);
      double w = phi.value(x) - c; // <= 0, so exp never overflows
      double ew = std::exp(w);
      double wew = w * ew;
      a += wew;
      b += ew;
      aa += wew * wew;
      bb += ew * ew;
      ab += wew * ew;
    }
    sA[ci] = a; sB[ci] = b; sAA[ci] = aa; sBB[ci] = bb; sAB[ci] = ab;
  });
  double A = 0, B = 0, AA = 0, BB = 0, AB = 0;
  for (std::size_t ci = 0; ci < nc; ++ci) {
    A += sA[ci]; B += sB[ci]; AA += sAA[ci]; BB += sBB[ci]; AB += sAB[ci];
  }
  double dN = double(N);
  A /= dN; B /= dN; AA /= dN; BB /= dN; AB /= dN;
  double varA = std::max(0.0, AA - A * A);
  double varB = std::max(0.0, BB - B * B);
  double covAB = AB - A * B;

  // Ent e^{phi} = e^c (E w e^w - E e^w log E e^w), exact under the shift
  double ent = std::exp(c) * (A - B * std::log(B));
  // delta method: d/dA = 1, d/dB = -(log B + 1)
  double dB = -(std::log(B) + 1.0);
  double var_est =
      std::max(0.0, varA + dB * dB * varB + 2.0 * dB * covAB) / dN;
  return {ent, 3.0 * std::exp(c) * std::sqrt(var_est)};
}

Estimate rhs_mc(const MeasureSpec& spec, std::size_t n,
                const ConvexTestFunction& phi, double beta, std::size_t N,
                std::uint64_t seed, std::optional<double> m_plus_3sigma,
                int workers) {
  if (N < 2)
    throw std::invalid_argument("rhs_mc: N must be >= 2");
  bool beta_zero = beta == 0.0;
  if (!beta_zero && !(beta >= 1e-6 && beta <= 1.0))
    throw std::invalid_argument("rhs_mc: beta must be 0 or in [1e-6, 1]");
  if (beta_zero && !m_plus_3sigma)
    throw std::invalid_argument("rhs_mc: beta = 0 requires m_plus_3sigma");
  double grad_cap =
      beta_zero ? 1.0 / (2.0 * *m_plus_3sigma) : 0.0;
  double q = beta_zero ? 0.0 : (beta + 1.0) / beta;

  double c = max_phi(spec, n, phi, N, seed, workers);
  std::atomic<bool> violated{false};
  auto g_of = [&](const std::vector<double>& x) {
    auto g = phi.gradient(x);
    double l2 = 0.0;
    for (double v : g)
      l2 += v * v;
    if (beta_zero) {
      for (double v : g)
        if (std::abs(v) > grad_cap + 1e-12)
          violated.store(true);
      return l2;
    }
    double lq = 0.0;
    for (double v : g)
      lq += std::pow(std::abs(v), q);
    return std::max(l2, lq);
  };
  auto mv = stream_moments(spec, n, N, seed, workers,
                           [&](const std::vector<double>& x) {
                             return g_of(x) * std::exp(phi.value(x) - c);
                           });
  if (violated.load())
    throw GradientRestrictionError(
        "rhs_mc: sampled gradient exceeds 1/(2(m+3sigma))");
  double scale = std::exp(c);
  return {scale * mv.mean, 3.0 * scale * std::sqrt(mv.var / double(N))};
}

Estimate symmetrized_functional(const MeasureSpec& spec, std::size_t n,
                                const ConvexTestFunction& phi, std::size_t N,
                                std::uint64_t seed, int workers) {
  if (N < 2)
    throw std::invalid_argument("symmetrized_functional: N must be >= 2");
  std::size_t nc = chunk_count(N);
  // paired independent streams: chunks [0, nc) and [nc, 2 nc)
  double c = std::max(max_phi(spec, n, phi, N, seed, workers),
                      [&] {
                        std::vector<double> maxima(nc, 0.0);
                        for_each_chunk(N, workers, [&](std::size_t ci, std::size_t,
                                                       std::size_t size) {
                          Prng rng(seed, nc + ci);
                          std::vector<double> y;
                          double m = -std::numeric_limits<double>::infinity();
                          for (std::size_t i = 0; i < size; ++i) {
                            draw_point(spec, n, rng, y);
                            m = std::max(m, phi.value(y));
                          }
                          maxima[ci] = m;
                        });
                        double m = -std::numeric_limits<double>::infinity();
                        for (double v : maxima)
                          m = std::max(m, v);
                        return m;
                      }());
  std::vector<double> s1(nc, 0.0), s2(nc, 0.0);
  for_each_chunk(N, workers, [&](std::size_t ci, std::size_t, std::size_t size) {
    Prng rx(seed, ci), ry(seed, nc + ci);
    std::vector<double> x, y;
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
      draw_point(spec, n, rx, x);
      draw_point(spec, n, ry, y);
      double px = phi.value(x), py = phi.value(y);
      double v = 0.5 * (px - py) * (std::exp(px - c) - std::exp(py - c));
      a += v;
      b += v * v;
    }
    s1[ci] = a;
    s2[ci] = b;
  });
  double a = 0.0, b = 0.0;
  for (std::size_t ci = 0; ci < nc; ++ci) {
    a += s1[ci];
    b += s2[ci];
  }
  double mean = a / double(N);
  double var = std::max(0.0, b / double(N) - mean * mean);
  double scale = std::exp(c);
  return {scale * mean, 3.0 * scale * std::sqrt(var / double(N))};
}

PoincareResult poincare_check(const MeasureSpec& spec, std::size_t n,
                              const ConvexTestFunction& phi, double C,
                              std::size_t N, std::uint64_t seed, int workers) {
  auto phi_mv = stream_moments(spec, n, N, seed, workers,
                               [&](const std::vector<double>& x) {
                                 return phi.value(x);
                               });
  // spread of the squared deviations around the sample mean
  auto dev2 = stream_moments(spec, n, N, seed, workers,
                             [&](const std::vector<double>& x) {
                               double d = phi.value(x) - phi_mv.mean;
                               return d * d;
                             });
  auto grad_mv = stream_moments(spec, n, N, seed, workers,
                                [&](const std::vector<double>& x) {
                                  auto g = phi.gradient(x);
                                  double s = 0.0;
                                  for (double v : g)
                                    s += v * v;
                                  return s;
                                });
  PoincareResult res;
  res.variance = {dev2.mean, 3.0 * std::sqrt(dev2.var / double(N))};
  res.rhs = {2.0 * C * grad_mv.mean,
             2.0 * C * 3.0 * std::sqrt(grad_mv.var / double(N))};
  res.holds = res.variance.lower() <= res.rhs.upper();
  return res;
}

double covariance_kernel_bound(const MeasureSpec& spec,
                               const ConvexTestFunction& phi,
                               const UniformGrid& x_grid) {
  if (x_grid.count < 3 || x_grid.count % 2 == 0)
    throw std::invalid_argument(
        "covariance_kernel_bound: grid count must be odd and >= 3");
  std::size_t n = std::size_t(x_grid.count);
  double h = x_grid.step();
  std::vector<double> w(n), dphi(n), ephi(n), lower(n), upper(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = (i == 0 || i == n - 1) ? h / 3.0
                                  : (i % 2 == 1 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
    double x = x_grid.point(std::int64_t(i));
    dphi[i] = phi.gradient({x})[0];
    ephi[i] = std::exp(phi.value({x}));
    lower[i] = spec.lower_tail(x);
    upper[i] = spec.upper_tail(x);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t lo = std::min(i, j), hi = std::max(i, j);
      total += w[i] * w[j] * dphi[i] * dphi[j] * ephi[j] * lower[lo] * upper[hi];
    }
  return total;
}

EntropyReport make_entropy_report(const MeasureSpec& spec, std::size_t n,
                                  const ConvexTestFunction& phi, double beta,
                                  std::size_t N, std::uint64_t seed,
                                  std::optional<double> m_plus_3sigma,
                                  int workers) {
  EntropyReport rep;
  rep.lhs = entropy_mc(spec, n, phi, N, seed, workers);
  rep.rhs = rhs_mc(spec, n, phi, beta, N, seed, m_plus_3sigma, workers);
  rep.ratio = rep.rhs.lower() > 0.0
                  ? rep.lhs.upper() / rep.rhs.lower()
                  : std::numeric_limits<double>::infinity();
  rep.n = n;
  rep.N = N;
  rep.seed = seed;
  rep.beta = beta;
  rep.spec_label = spec.label();
  rep.phi_name = phi.name;
  return rep;
}

nlohmann::json EntropyReport::to_json() const {
  return nlohmann::json{
      {"lhs", {{"value", lhs.value}, {"halfwidth", lhs.halfwidth}}},
      {"rhs", {{"value", rhs.value}, {"halfwidth", rhs.halfwidth}}},
      {"ratio", ratio},
      {"n", n},
      {"N", N},
      {"seed", seed},
      {"beta", beta},
      {"spec", spec_label},
      {"phi", phi_name},
      {"generator", "splitmix64+mt19937_64"}};
}

} // namespace concentrate
