#include "concentrate/hopf_lax.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace concentrate {

std::size_t GridFunction::size() const {
  std::size_t s = 1;
  for (const auto& a : axes)
    s *= std::size_t(a.count);
  return axes.empty() ? 0 : s;
}

void GridFunction::validate() const {
  if (axes.empty())
    throw std::invalid_argument("GridFunction: no axes");
  for (const auto& a : axes)
    if (a.count < 2 || !(a.hi > a.lo))
      throw std::invalid_argument("GridFunction: axis needs count >= 2, hi > lo");
  if (values.size() != size())
    throw std::invalid_argument("GridFunction: value count does not match axes");
  for (double v : values)
    if (!std::isfinite(v))
      throw std::invalid_argument("GridFunction: values must be finite");
}

GridFunction GridFunction::sample_1d(const UniformGrid& axis,
                                     const std::function<double(double)>& f) {
  GridFunction g;
  g.axes = {axis};
  g.values.reserve(std::size_t(axis.count));
  for (std::int64_t i = 0; i < axis.count; ++i)
    g.values.push_back(f(axis.point(i)));
  g.validate();
  return g;
}

nlohmann::json GridFunction::to_json() const {
  nlohmann::json ax = nlohmann::json::array();
  for (const auto& a : axes)
    ax.push_back({{"min", a.lo}, {"max", a.hi}, {"count", a.count}});
  return nlohmann::json{{"axes", ax}, {"values", values}};
}

GridFunction GridFunction::from_json(const nlohmann::json& j) {
  GridFunction g;
  for (const auto& a : j.at("axes"))
    g.axes.push_back(UniformGrid{a.at("min").get<double>(),
                                 a.at("max").get<double>(),
                                 a.at("count").get<std::int64_t>()});
  g.values = j.at("values").get<std::vector<double>>();
  g.validate();
  return g;
}

void GridFunction::write_csv(const std::string& path) const {
  validate();
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("GridFunction: cannot open '" + path + "'");
  out << "# axes:";
  for (const auto& a : axes)
    out << " " << a.lo << ":" << a.hi << ":" << a.count;
  out << "\n";
  char buf[64];
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
}

GridFunction GridFunction::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("GridFunction: cannot open '" + path + "'");
  std::string header;
  std::getline(in, header);
  GridFunction g;
  auto pos = header.find("axes:");
  if (pos == std::string::npos)
    throw std::runtime_error("GridFunction: missing axes header in '" + path + "'");
  std::istringstream hs(header.substr(pos + 5));
  std::string tok;
  while (hs >> tok) {
    UniformGrid a;
    if (std::sscanf(tok.c_str(), "%lf:%lf:%lld", &a.lo, &a.hi,
                    reinterpret_cast<long long*>(&a.count)) != 3)
      throw std::runtime_error("GridFunction: malformed axis token '" + tok + "'");
    g.axes.push_back(a);
  }
  double v;
  while (in >> v)
    g.values.push_back(v);
  g.validate();
  return g;
}

double Schedule::k(double t) const {
  if (!(B > 0.0) || !(t0 >= 0.0 && t0 <= B))
    throw std::invalid_argument("Schedule: need B > 0 and t0 in [0, B]");
  if (beta == 0.0)
    return std::min(1.0 + (t - t0) / B, 1.0) / B;
  return t <= t0 ? 1.0 + (t - t0) / B
                 : std::pow(1.0 + (t - t0) / (B * beta), beta);
}

void DiscreteMeasure::validate(std::size_t max_atoms) const {
  if (atoms.empty() || atoms.size() > max_atoms)
    throw std::invalid_argument("DiscreteMeasure: support size out of range");
  double total = 0.0;
  for (const auto& [x, p] : atoms) {
    if (!(p > 0.0 && p <= 1.0) || !std::isfinite(x))
      throw std::invalid_argument("DiscreteMeasure: masses must lie in (0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("DiscreteMeasure: masses must sum to 1");
}

namespace {

// t * lstar(d h / t) for every index offset d in [-(N-1), N-1]
std::vector<double> displacement_kernel(const CostPair& cost, double t, double h,
                                        std::int64_t n) {
  std::vector<double> k(std::size_t(2 * n - 1));
  for (std::int64_t d = -(n - 1); d <= n - 1; ++d)
    k[std::size_t(d + n - 1)] = t * cost.lstar(double(d) * h / t);
  return k;
}

// Leftmost-argmin rows of f[j] + K[i-j] are nondecreasing in i because the
// kernel is convex in the offset; divide and conquer on that monotonicity.
void infconv_line(const double* f, std::int64_t stride, std::int64_t n,
                  const std::vector<double>& kernel, double* out,
                  std::int64_t out_stride, std::int64_t* argmin) {
  struct Frame {
    std::int64_t ilo, ihi, jlo, jhi;
  };
  std::vector<Frame> stack{{0, n - 1, 0, n - 1}};
  while (!stack.empty()) {
    Frame fr = stack.back();
    stack.pop_back();
    if (fr.ilo > fr.ihi)
      continue;
    std::int64_t i = fr.ilo + (fr.ihi - fr.ilo) / 2;
    double best = std::numeric_limits<double>::infinity();
    std::int64_t bestj = fr.jlo;
    for (std::int64_t j = fr.jlo; j <= fr.jhi; ++j) {
      double v = f[j * stride] + kernel[std::size_t(i - j + n - 1)];
      if (v < best) {
        best = v;
        bestj = j;
      }
    }
    out[i * out_stride] = best;
    argmin[i] = bestj;
    stack.push_back({fr.ilo, i - 1, fr.jlo, bestj});
    stack.push_back({i + 1, fr.ihi, bestj, fr.jhi});
  }
}

} // namespace

GridFunction infconv_1d(const GridFunction& f, double t, const CostPair& cost,
                        bool* boundary_active) {
  f.validate();
  if (f.dim() != 1)
    throw std::invalid_argument("infconv_1d: input must be one-dimensional");
  if (!(t > 0.0))
    throw std::invalid_argument("infconv_1d: t must be positive");
  std::int64_t n = f.axes[0].count;
  auto kernel = displacement_kernel(cost, t, f.axes[0].step(), n);
  GridFunction q;
  q.axes = f.axes;
  q.values.assign(std::size_t(n), 0.0);
  std::vector<std::int64_t> arg(static_cast<std::size_t>(n));
  infconv_line(f.values.data(), 1, n, kernel, q.values.data(), 1, arg.data());
  if (boundary_active) {
    *boundary_active = false;
    for (std::int64_t i = 0; i < n; ++i)
      if ((arg[std::size_t(i)] == 0 && i != 0) ||
          (arg[std::size_t(i)] == n - 1 && i != n - 1))
        *boundary_active = true;
  }
  return q;
}

GridFunction infconv_nd(const GridFunction& f, double t, const CostPair& cost,
                        bool* boundary_active) {
  f.validate();
  if (f.dim() > 3)
    throw std::invalid_argument("infconv_nd: dimension must be <= 3");
  if (!(t > 0.0))
    throw std::invalid_argument("infconv_nd: t must be positive");
  if (boundary_active)
    *boundary_active = false;
  GridFunction q = f;
  std::size_t d = f.dim();
  // strides, last axis fastest
  std::vector<std::int64_t> stride(d, 1);
  for (std::size_t a = d; a-- > 1;)
    stride[a - 1] = stride[a] * f.axes[a].count;

  for (std::size_t a = 0; a < d; ++a) {
    std::int64_t n = q.axes[a].count;
    auto kernel = displacement_kernel(cost, t, q.axes[a].step(), n);
    std::vector<std::int64_t> arg(static_cast<std::size_t>(n));
    std::vector<double> out(static_cast<std::size_t>(n));
    std::size_t lines = q.size() / std::size_t(n);
    for (std::size_t line = 0; line < lines; ++line) {
      // base offset of this line: enumerate all index tuples with axis a = 0
      std::size_t rem = line;
      std::int64_t base = 0;
      for (std::size_t b = d; b-- > 0;) {
        if (b == a)
          continue;
        std::size_t cnt = std::size_t(q.axes[b].count);
        base += std::int64_t(rem % cnt) * stride[b];
        rem /= cnt;
      }
      infconv_line(q.values.data() + base, stride[a], n, kernel, out.data(), 1,
                   arg.data());
      for (std::int64_t i = 0; i < n; ++i)
        q.values[std::size_t(base + i * stride[a])] = out[std::size_t(i)];
      if (boundary_active)
        for (std::int64_t i = 0; i < n; ++i)
          if ((arg[std::size_t(i)] == 0 && i != 0) ||
              (arg[std::size_t(i)] == n - 1 && i != n - 1))
            *boundary_active = true;
    }
  }
  return q;
}

HJReport hj_residual(const GridFunction& f, const std::vector<double>& t_list,
                     const CostPair& cost) {
  f.validate();
  if (f.dim() != 1)
    throw std::invalid_argument("hj_residual: input must be one-dimensional");
  if (t_list.size() < 3)
    throw std::invalid_argument("hj_residual: need at least three t values");
  for (std::size_t k = 0; k + 1 < t_list.size(); ++k)
    if (!(t_list[k] > 0.0) || !(t_list[k + 1] > t_list[k]))
      throw std::invalid_argument("hj_residual: t_list must be positive increasing");

  auto hval = [&](double s) {
    if (cost.is_beta_zero()) {
      double u = s / cost.delta();
      return u * u;
    }
    return cost.h(s).value();
  };

  std::int64_t n = f.axes[0].count;
  double h = f.axes[0].step();
  double kink_jump = std::sqrt(h);

  std::vector<GridFunction> q;
  std::vector<std::vector<std::int64_t>> args;
  for (double t : t_list) {
    auto kernel = displacement_kernel(cost, t, h, n);
    GridFunction qt;
    qt.axes = f.axes;
    qt.values.assign(std::size_t(n), 0.0);
    std::vector<std::int64_t> arg(static_cast<std::size_t>(n));
    infconv_line(f.values.data(), 1, n, kernel, qt.values.data(), 1, arg.data());
    q.push_back(std::move(qt));
    args.push_back(std::move(arg));
  }

  HJReport rep;
  for (std::size_t k = 1; k + 1 < t_list.size(); ++k) {
    const auto& qm = q[k].values;
    for (std::int64_t i = 1; i + 1 < n; ++i) {
      std::size_t ui = std::size_t(i);
      double left = (qm[ui] - qm[ui - 1]) / h;
      double right = (qm[ui + 1] - qm[ui]) / h;
      bool kink = std::abs(right - left) > kink_jump;
      // the t-difference touches three time levels; a clipped minimizer at
      // any of them pollutes the residual
      bool boundary = false;
      for (std::size_t l : {k - 1, k, k + 1})
        if (args[l][ui] == 0 || args[l][ui] == n - 1)
          boundary = true;
      if (kink || boundary) {
        ++rep.excluded;
        continue;
      }
      double dt = (q[k + 1].values[ui] - q[k - 1].values[ui]) /
                  (t_list[k + 1] - t_list[k - 1]);
      rep.max_residual = std::max(rep.max_residual, std::abs(dt + hval(left)));
      ++rep.evaluated;
    }
  }
  return rep;
}

namespace {

// composite-Simpson expectation of tabulated values against the spec density
double grid_expectation(const MeasureSpec& spec, const UniformGrid& axis,
                        const std::vector<double>& g) {
  if (axis.count < 3 || axis.count % 2 == 0)
    throw std::invalid_argument("grid_expectation: need an odd grid count >= 3");
  double h = axis.step();
  double total = 0.0;
  double mass = 0.0;
  for (std::int64_t i = 0; i < axis.count; ++i) {
    double w = (i == 0 || i == axis.count - 1)
                   ? h / 3.0
                   : (i % 2 == 1 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
    double wd = w * spec.density(axis.point(i));
    total += wd * g[std::size_t(i)];
    mass += wd;
  }
  // self-normalize so that the quadrature is exact on constants
  return total / mass;
}

// log || e^{phi} ||_k with the k -> 0 norm exp(E phi)
double log_exp_norm(const MeasureSpec& spec, const UniformGrid& axis,
                    const std::vector<double>& phi, double k) {
  if (k == 0.0)
    return grid_expectation(spec, axis, phi);
  double c = *std::max_element(phi.begin(), phi.end());
  std::vector<double> e(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i)
    e[i] = std::exp(k * (phi[i] - c));
  return c + std::log(grid_expectation(spec, axis, e)) / k;
}

} // namespace

std::vector<double> hypercontractivity_margins(const MeasureSpec& spec,
                                               const GridFunction& phi,
                                               const Schedule& schedule,
                                               const std::vector<double>& t_list) {
  phi.validate();
  if (phi.dim() != 1)
    throw std::invalid_argument("hypercontractivity_margins: phi must be 1-D");
  CostPair cost = schedule.beta == 0.0 ? CostPair(0.0, schedule.delta)
                                       : CostPair(schedule.beta);
  double k0 = schedule.k(0.0);
  if (k0 < 0.0)
    throw std::invalid_argument("hypercontractivity_margins: k(0) < 0");
  double log_rhs = log_exp_norm(spec, phi.axes[0], phi.values, k0);
  std::vector<double> margins;
  for (double t : t_list) {
    double kt = schedule.k(t);
    if (kt < 0.0)
      throw std::invalid_argument("hypercontractivity_margins: k(t) < 0");
    GridFunction qt = t > 0.0 ? infconv_1d(phi, t, cost) : phi;
    double log_lhs = log_exp_norm(spec, phi.axes[0], qt.values, kt);
    margins.push_back(log_rhs - log_lhs);
  }
  return margins;
}

double dual_transport_lhs(const MeasureSpec& spec, const GridFunction& phi,
                          double b, const CostPair& cost) {
  phi.validate();
  if (phi.dim() != 1)
    throw std::invalid_argument("dual_transport_lhs: phi must be 1-D");
  if (!(b > 0.0))
    throw std::invalid_argument("dual_transport_lhs: b must be positive");
  GridFunction q1 = infconv_1d(phi, 1.0, cost);
  std::vector<double> scaled(q1.values.size());
  for (std::size_t i = 0; i < scaled.size(); ++i)
    scaled[i] = q1.values[i] / b;
  double log_term = log_exp_norm(spec, phi.axes[0], scaled, 1.0);
  double mean_phi = grid_expectation(spec, phi.axes[0], phi.values);
  return std::exp(b * log_term - mean_phi);
}

namespace {

double transport_objective(const std::vector<std::vector<double>>& pi,
                           const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           const CostPair& cost) {
  double obj = 0.0;
  for (std::size_t r = 0; r < nu.atoms.size(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < mu.atoms.size(); ++c)
      s += mu.atoms[c].first * pi[r][c];
    double bar = s / nu.atoms[r].second;
    obj += nu.atoms[r].second * cost.lstar(nu.atoms[r].first - bar);
  }
  return obj;
}

double polish(std::vector<std::vector<double>>& pi, const DiscreteMeasure& mu,
              const DiscreteMeasure& nu, const CostPair& cost) {
  std::size_t R = nu.atoms.size(), C = mu.atoms.size();
  double obj = transport_objective(pi, mu, nu, cost);
  for (int sweep = 0; sweep < 2000; ++sweep) {
    double improved = 0.0;
    for (std::size_t r1 = 0; r1 < R; ++r1)
      for (std::size_t r2 = r1 + 1; r2 < R; ++r2)
        for (std::size_t c1 = 0; c1 < C; ++c1)
          for (std::size_t c2 = c1 + 1; c2 < C; ++c2) {
            // feasible circulation range for the 2x2 move
            double lo = -std::min(pi[r1][c1], pi[r2][c2]);
            double hi = std::min(pi[r1][c2], pi[r2][c1]);
            if (hi - lo <= 0.0)
              continue;
            auto eval = [&](double th) {
              pi[r1][c1] += th;
              pi[r2][c2] += th;
              pi[r1][c2] -= th;
              pi[r2][c1] -= th;
              double v = transport_objective(pi, mu, nu, cost);
              pi[r1][c1] -= th;
              pi[r2][c2] -= th;
              pi[r1][c2] += th;
              pi[r2][c1] += th;
              return v;
            };
            double a = lo, b = hi;
            for (int it = 0; it < 200; ++it) {
              double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
              if (eval(m1) <= eval(m2))
                b = m2;
              else
                a = m1;
            }
            double th = 0.5 * (a + b);
            double v = eval(th);
            if (v < obj - 1e-16) {
              improved += obj - v;
              pi[r1][c1] += th;
              pi[r2][c2] += th;
              pi[r1][c2] -= th;
              pi[r2][c1] -= th;
              // clip tiny negative residues from the line search
              for (auto* cell : {&pi[r1][c1], &pi[r1][c2], &pi[r2][c1], &pi[r2][c2]})
                if (*cell < 0.0)
                  *cell = 0.0;
              obj = transport_objective(pi, mu, nu, cost);
            }
          }
    if (improved < 1e-14)
      break;
  }
  return obj;
}

} // namespace

WeakTransportResult weak_transport_discrete(const DiscreteMeasure& mu,
                                            const DiscreteMeasure& nu,
                                            const CostPair& cost) {
  mu.validate();
  nu.validate();
  std::size_t R = nu.atoms.size(), C = mu.atoms.size();

  // independent coupling
  std::vector<std::vector<double>> indep(R, std::vector<double>(C));
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c)
      indep[r][c] = nu.atoms[r].second * mu.atoms[c].second;

  // northwest-corner coupling
  std::vector<std::vector<double>> nw(R, std::vector<double>(C, 0.0));
  {
    std::vector<double> row(R), col(C);
    for (std::size_t r = 0; r < R; ++r)
      row[r] = nu.atoms[r].second;
    for (std::size_t c = 0; c < C; ++c)
      col[c] = mu.atoms[c].second;
    std::size_t r = 0, c = 0;
    while (r < R && c < C) {
      double m = std::min(row[r], col[c]);
      nw[r][c] = m;
      row[r] -= m;
      col[c] -= m;
      if (row[r] <= col[c])
        ++r;
      else
        ++c;
    }
  }

  double o1 = polish(indep, mu, nu, cost);
  double o2 = polish(nw, mu, nu, cost);
  const auto& best = o1 <= o2 ? indep : nw;

  WeakTransportResult res;
  res.cost = std::min(o1, o2);
  res.status = "converged";
  for (std::size_t r = 0; r < R; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c)
      s += mu.atoms[c].first * best[r][c];
    res.barycenters.push_back(s / nu.atoms[r].second);
  }
  return res;
}

double relative_entropy_discrete(const DiscreteMeasure& nu,
                                 const DiscreteMeasure& mu) {
  nu.validate(std::numeric_limits<std::size_t>::max());
  mu.validate(std::numeric_limits<std::size_t>::max());
  std::map<double, double> mu_mass;
  for (const auto& [x, p] : mu.atoms)
    mu_mass[x] += p;
  double h = 0.0;
  for (const auto& [x, p] : nu.atoms) {
    auto it = mu_mass.find(x);
    if (it == mu_mass.end())
      return std::numeric_limits<double>::infinity();
    h += p * std::log(p / it->second);
  }
  return h;
}

} // namespace concentrate
