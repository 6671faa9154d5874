// Command-line front end for the concentrate library: tail certificates,
// seeded Monte Carlo entropy checks, grid Hopf-Lax transforms, transport
// inequalities, and closed-form concentration bounds.
//
// Exit codes: 0 = success and every checked inequality holds;
//             1 = usage or input error;
//             2 = a checked inequality is violated (witness in the report).

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "concentrate/cost_kernel.hpp"
#include "concentrate/entropy_engine.hpp"
#include "concentrate/herbst.hpp"
#include "concentrate/hopf_lax.hpp"
#include "concentrate/measure_model.hpp"
#include "concentrate/regularity.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitViolation = 2;

using nlohmann::json;
using namespace concentrate;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("CONCENTRATE_SEED"))
    return std::strtoull(env, nullptr, 10);
  return 12345;
}

void emit(const json& j, const std::string& output) {
  if (output.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(output);
  if (!out)
    throw std::runtime_error("cannot open output file '" + output + "'");
  out << j.dump(2) << "\n";
}

json base_report(const json& config) {
  return json{{"version", kVersion}, {"config", config}};
}

CostPair make_cost(double beta, double delta) {
  return beta == 0.0 ? CostPair(0.0, delta) : CostPair(beta);
}

ConvexTestFunction make_phi(const std::string& name, double param,
                            double scale) {
  ConvexTestFunction phi = [&]() {
    if (name == "linear")
      return ConvexTestFunction::linear({param});
    if (name == "max_coordinate")
      return ConvexTestFunction::max_coordinate();
    if (name == "logsumexp")
      return ConvexTestFunction::logsumexp(param);
    if (name == "l2_norm_shifted")
      return ConvexTestFunction::l2_norm_shifted(param);
    if (name == "distance_to_box")
      return ConvexTestFunction::distance_to_box(param);
    throw std::invalid_argument("unknown test function '" + name + "'");
  }();
  return scale == 1.0 ? phi : ConvexTestFunction::scaled(phi, scale);
}

DiscreteMeasure parse_discrete(const std::string& text) {
  DiscreteMeasure m;
  std::istringstream in(text);
  std::string atom;
  while (std::getline(in, atom, ',')) {
    double x, p;
    if (std::sscanf(atom.c_str(), "%lf:%lf", &x, &p) != 2)
      throw std::invalid_argument("bad atom '" + atom +
                                  "', expected location:mass");
    m.atoms.push_back({x, p});
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------

int run_conjugate(double beta, double delta, std::optional<double> t,
                  double tmin, double tmax, std::int64_t points,
                  const std::string& output) {
  CostPair cost = make_cost(beta, delta);
  if (t) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", cost.lstar(*t));
    std::cout << buf << "\n";
    return kExitOk;
  }
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!output.empty()) {
    file.open(output);
    if (!file)
      throw std::runtime_error("cannot open output file '" + output + "'");
    out = &file;
  }
  *out << "t,h,lstar,dlstar\n";
  UniformGrid grid{tmin, tmax, points};
  char buf[160];
  for (std::int64_t i = 0; i < grid.count; ++i) {
    double x = grid.point(i);
    auto h = cost.h(x);
    if (h.is_finite())
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", x, h.value(),
                    cost.lstar(x), cost.dlstar(x));
    else
      std::snprintf(buf, sizeof buf, "%.17g,inf,%.17g,%.17g\n", x,
                    cost.lstar(x), cost.dlstar(x));
    *out << buf;
  }
  return kExitOk;
}

int run_check_tail(const std::string& spec_path, double beta, double m,
                   double sigma, double sigma_pow, const std::string& output) {
  auto spec = MeasureSpec::load(spec_path);
  double pow_val = sigma_pow > 0.0 ? sigma_pow : std::pow(sigma, beta + 1.0);
  auto cert = check_membership(spec, beta, m, pow_val);
  json rep = base_report({{"command", "check-tail"},
                          {"spec", spec_path},
                          {"beta", beta},
                          {"m", m},
                          {"sigma_pow", pow_val}});
  rep["certificate"] = cert.to_json();
  emit(rep, output);
  return cert.certified ? kExitOk : kExitViolation;
}

int run_estimate_sigma(const std::string& spec_path, double beta, double m,
                       const std::string& output) {
  auto spec = MeasureSpec::load(spec_path);
  double pow_val = estimate_sigma(spec, beta, m);
  json rep = base_report(
      {{"command", "estimate-sigma"}, {"spec", spec_path}, {"beta", beta}, {"m", m}});
  if (std::isinf(pow_val)) {
    rep["divergent"] = true;
    emit(rep, output);
    return kExitViolation;
  }
  rep["sigma_pow"] = pow_val;
  rep["sigma"] = std::pow(pow_val, 1.0 / (beta + 1.0));
  emit(rep, output);
  return kExitOk;
}

int run_shift_check(const std::string& spec_path, double beta, double h,
                    double alpha, double m, const std::string& output) {
  auto spec = MeasureSpec::load(spec_path);
  auto res = check_shift_condition(spec, beta, ShiftCondition{h, alpha, m});
  json rep = base_report({{"command", "shift-check"},
                          {"spec", spec_path},
                          {"beta", beta},
                          {"h", h},
                          {"alpha", alpha},
                          {"m", m}});
  rep["holds"] = res.holds;
  rep["worst_ratio"] = res.worst_ratio;
  if (res.witness_x)
    rep["witness_x"] = *res.witness_x;
  emit(rep, output);
  return res.holds ? kExitOk : kExitViolation;
}

int run_herbst(const ConcentrationBound& bound, double tmin, double tmax,
               std::int64_t points, const std::string& samples_path,
               const std::string& output, const std::string& format) {
  std::vector<double> t_grid;
  UniformGrid grid{tmin, tmax, points};
  for (std::int64_t i = 0; i < grid.count; ++i)
    t_grid.push_back(grid.point(i));

  if (!samples_path.empty()) {
    auto samples = read_sample_file(samples_path);
    auto rep = empirical_tail_compare(samples, bound, t_grid);
    if (format == "csv" && !output.empty()) {
      rep.write_csv(output);
    } else {
      json j = base_report({{"command", "herbst-bound"},
                            {"samples", samples_path},
                            {"beta", bound.beta},
                            {"C", bound.C}});
      j["report"] = rep.to_json();
      emit(j, output);
    }
    return rep.violations == 0 ? kExitOk : kExitViolation;
  }

  if (format == "csv") {
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!output.empty()) {
      file.open(output);
      if (!file)
        throw std::runtime_error("cannot open output file '" + output + "'");
      out = &file;
    }
    *out << "t,bound\n";
    char buf[80];
    for (double t : t_grid) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", t, tail_bound(bound, t));
      *out << buf;
    }
  } else {
    json rows = json::array();
    for (double t : t_grid)
      rows.push_back({{"t", t}, {"bound", tail_bound(bound, t)}});
    json j = base_report(
        {{"command", "herbst-bound"}, {"beta", bound.beta}, {"C", bound.C}});
    j["rows"] = rows;
    emit(j, output);
  }
  return kExitOk;
}

int run_mc_lsi(const std::string& spec_path, double beta, double C,
               const std::vector<std::size_t>& n_list, std::size_t N,
               std::uint64_t seed, const std::string& phi_name,
               double phi_param, double phi_scale,
               std::optional<double> m3s, int workers,
               const std::string& output) {
  auto spec = MeasureSpec::load(spec_path);
  auto phi = make_phi(phi_name, phi_param, phi_scale);
  json battery = json::array();
  bool all_hold = true;
  for (std::size_t n : n_list) {
    auto rep = make_entropy_report(spec, n, phi, beta, N, seed, m3s, workers);
    bool holds = rep.lhs.lower() <= C * rep.rhs.upper();
    all_hold = all_hold && holds;
    json item = rep.to_json();
    item["C"] = C;
    item["holds"] = holds;
    battery.push_back(item);
  }
  json rep = base_report({{"command", "mc-lsi"},
                          {"spec", spec_path},
                          {"beta", beta},
                          {"C", C},
                          {"N", N},
                          {"seed", seed},
                          {"phi", phi_name},
                          {"phi_param", phi_param},
                          {"phi_scale", phi_scale},
                          {"workers", workers}});
  rep["battery"] = battery;
  rep["all_hold"] = all_hold;
  emit(rep, output);
  return all_hold ? kExitOk : kExitViolation;
}

int run_infconv(const std::string& input, const std::string& output, double t,
                double beta, double delta) {
  auto f = GridFunction::read_csv(input);
  bool boundary = false;
  auto q = infconv_nd(f, t, make_cost(beta, delta), &boundary);
  q.write_csv(output);
  if (boundary)
    std::cerr << "warning: grid boundary truncated some minimizers\n";
  return kExitOk;
}

int run_hj_check(const std::string& input, double beta, double delta,
                 const std::vector<double>& t_list, double tol,
                 const std::string& output) {
  auto f = GridFunction::read_csv(input);
  auto rep = hj_residual(f, t_list, make_cost(beta, delta));
  json j = base_report({{"command", "hj-check"},
                        {"input", input},
                        {"beta", beta},
                        {"t", t_list},
                        {"tol", tol}});
  j["max_residual"] = rep.max_residual;
  j["evaluated"] = rep.evaluated;
  j["excluded"] = rep.excluded;
  j["holds"] = rep.max_residual <= tol;
  emit(j, output);
  return rep.max_residual <= tol ? kExitOk : kExitViolation;
}

int run_hypercontract(const std::string& spec_path, const std::string& input,
                      double beta, double B, double t0, double delta,
                      const std::vector<double>& t_list, double tol,
                      const std::string& output) {
  auto spec = MeasureSpec::load(spec_path);
  auto phi = GridFunction::read_csv(input);
  Schedule sched{beta, B, t0, delta};
  auto margins = hypercontractivity_margins(spec, phi, sched, t_list);
  bool all_hold = true;
  json rows = json::array();
  for (std::size_t i = 0; i < t_list.size(); ++i) {
    bool holds = margins[i] >= -tol;
    all_hold = all_hold && holds;
    rows.push_back({{"t", t_list[i]}, {"margin", margins[i]}, {"holds", holds}});
  }
  json rep = base_report({{"command", "hypercontract"},
                          {"spec", spec_path},
                          {"input", input},
                          {"beta", beta},
                          {"B", B},
                          {"t0", t0},
                          {"tol", tol}});
  rep["rows"] = rows;
  rep["all_hold"] = all_hold;
  emit(rep, output);
  return all_hold ? kExitOk : kExitViolation;
}

int run_dual_transport(const std::string& spec_path, const std::string& input,
                       double b, double beta, double delta, double tol,
                       const std::string& output) {
  auto spec = MeasureSpec::load(spec_path);
  auto phi = GridFunction::read_csv(input);
  double lhs = dual_transport_lhs(spec, phi, b, make_cost(beta, delta));
  bool holds = lhs <= 1.0 + tol;
  json rep = base_report({{"command", "dual-transport"},
                          {"spec", spec_path},
                          {"input", input},
                          {"b", b},
                          {"beta", beta},
                          {"tol", tol}});
  rep["lhs"] = lhs;
  rep["holds"] = holds;
  emit(rep, output);
  return holds ? kExitOk : kExitViolation;
}

int run_weak_transport(const std::string& mu_text, const std::string& nu_text,
                       double beta, double delta, std::optional<double> b,
                       const std::string& output) {
  auto mu = parse_discrete(mu_text);
  auto nu = parse_discrete(nu_text);
  auto res = weak_transport_discrete(mu, nu, make_cost(beta, delta));
  double rel_ent = relative_entropy_discrete(nu, mu);
  json rep = base_report({{"command", "weak-transport"},
                          {"mu", mu_text},
                          {"nu", nu_text},
                          {"beta", beta}});
  rep["cost"] = res.cost;
  rep["status"] = res.status;
  rep["barycenters"] = res.barycenters;
  rep["relative_entropy"] =
      std::isinf(rel_ent) ? json("inf") : json(rel_ent);
  bool holds = true;
  if (b) {
    holds = res.cost <= *b * rel_ent + 1e-9;
    rep["b"] = *b;
    rep["holds"] = holds;
  }
  emit(rep, output);
  return holds ? kExitOk : kExitViolation;
}

int run_report(const std::string& spec_path, double beta, double m,
               double sigma, double C, std::size_t n, std::size_t N,
               std::uint64_t seed, int workers, const std::string& output) {
  auto spec = MeasureSpec::load(spec_path);
  double sigma_pow = std::pow(sigma, beta + 1.0);
  json rep = base_report({{"command", "report"},
                          {"spec", spec_path},
                          {"beta", beta},
                          {"m", m},
                          {"sigma", sigma},
                          {"C", C},
                          {"n", n},
                          {"N", N},
                          {"seed", seed},
                          {"workers", workers}});

  auto cert = check_membership(spec, beta, m, sigma_pow);
  rep["certificate"] = cert.to_json();

  double est = estimate_sigma(spec, beta, m);
  rep["estimated_sigma_pow"] =
      std::isinf(est) ? json("inf") : json(est);

  std::optional<double> m3s;
  if (beta == 0.0)
    m3s = m + 3.0 * sigma;
  auto phi = ConvexTestFunction::scaled(ConvexTestFunction::logsumexp(1.0),
                                        beta == 0.0 ? 0.2 : 1.0);
  auto ent = make_entropy_report(spec, n, phi, beta, N, seed, m3s, workers);
  bool mc_holds = ent.lhs.lower() <= C * ent.rhs.upper();
  json ent_json = ent.to_json();
  ent_json["C"] = C;
  ent_json["holds"] = mc_holds;
  rep["entropy"] = ent_json;

  emit(rep, output);
  return cert.certified && mc_holds ? kExitOk : kExitViolation;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"concentration-of-measure verification toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string spec_path, input, output, format = "json";
  std::string mu_text, nu_text, samples_path;
  std::string phi_name = "logsumexp";
  double beta = 1.0, delta = 1.0, m = 1.0, sigma = 1.0, sigma_pow = 0.0;
  double h = 1.0, alpha = 0.5, C = 1.0, b = 1.0, B = 1.0, t0 = 0.0;
  double tmin = 0.0, tmax = 10.0, tol = 1e-6, tconv = 1.0;
  double phi_param = 1.0, phi_scale = 1.0, A = 1.0, B2 = 1.0, Binf = 1.0,
         m3s_val = 0.0;
  std::int64_t points = 101;
  std::size_t N = 100000, n = 1;
  std::uint64_t seed = default_seed();
  int workers = 1;
  std::optional<double> t_single;
  std::vector<double> t_list;
  std::vector<std::size_t> n_list = {1, 2, 4};
  std::string mode = "smooth";
  bool have_b = false;

  auto add_spec = [&](CLI::App* cmd) {
    cmd->add_option("--spec", spec_path, "measure spec JSON file")->required();
  };
  auto add_out = [&](CLI::App* cmd) {
    cmd->add_option("--output,-o", output, "output file (default stdout)");
  };

  auto* conj = app.add_subcommand("conjugate", "cost pair tables and values");
  conj->add_option("--beta", beta)->required();
  conj->add_option("--delta", delta);
  conj->add_option("--t", t_single, "single point: print lstar(t)");
  conj->add_option("--tmin", tmin);
  conj->add_option("--tmax", tmax);
  conj->add_option("--points", points);
  add_out(conj);

  auto* ct = app.add_subcommand("check-tail", "tail-domination certificate");
  add_spec(ct);
  ct->add_option("--beta", beta)->required();
  ct->add_option("--m", m)->required();
  ct->add_option("--sigma", sigma);
  ct->add_option("--sigma-pow", sigma_pow);
  add_out(ct);

  auto* es = app.add_subcommand("estimate-sigma", "smallest certified sigma");
  add_spec(es);
  es->add_option("--beta", beta)->required();
  es->add_option("--m", m)->required();
  add_out(es);

  auto* sc = app.add_subcommand("shift-check", "shifted-tail condition");
  add_spec(sc);
  sc->add_option("--beta", beta)->required();
  sc->add_option("--shift", h, "tail shift amount h")->required();
  sc->add_option("--alpha", alpha)->required();
  sc->add_option("--m", m)->required();
  add_out(sc);

  auto* hb = app.add_subcommand("herbst-bound", "closed-form tail bounds");
  hb->add_option("--beta", beta)->required();
  hb->add_option("--C", C)->required();
  hb->add_option("--mode", mode)
      ->check(CLI::IsMember({"smooth", "lipschitz", "beta0"}));
  hb->add_option("--A", A);
  hb->add_option("--B", B2);
  hb->add_option("--binf", Binf);
  hb->add_option("--m3s", m3s_val);
  hb->add_option("--tmin", tmin);
  hb->add_option("--tmax", tmax);
  hb->add_option("--points", points);
  hb->add_option("--samples", samples_path, "sample file for empirical compare");
  hb->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));
  add_out(hb);

  auto* mc = app.add_subcommand("mc-lsi", "Monte Carlo entropy inequality");
  add_spec(mc);
  mc->add_option("--beta", beta)->required();
  mc->add_option("--C", C)->required();
  mc->add_option("--n-list", n_list, "product dimensions");
  mc->add_option("--N", N);
  mc->add_option("--seed", seed);
  mc->add_option("--phi", phi_name);
  mc->add_option("--phi-param", phi_param);
  mc->add_option("--phi-scale", phi_scale);
  mc->add_option("--m3s", m3s_val, "m + 3 sigma (required for beta = 0)");
  mc->add_option("--workers", workers);
  add_out(mc);

  auto* ic = app.add_subcommand("infconv", "grid infimum convolution");
  ic->add_option("--input", input, "grid function CSV")->required();
  ic->add_option("--output,-o", output, "result CSV")->required();
  ic->add_option("--t", tconv)->required();
  ic->add_option("--beta", beta)->required();
  ic->add_option("--delta", delta);

  auto* hj = app.add_subcommand("hj-check", "Hamilton-Jacobi residual");
  hj->add_option("--input", input, "grid function CSV")->required();
  hj->add_option("--beta", beta)->required();
  hj->add_option("--delta", delta);
  hj->add_option("--t", t_list, "at least three increasing times")->required();
  hj->add_option("--tol", tol);
  add_out(hj);

  auto* hc = app.add_subcommand("hypercontract", "norm-monotonicity margins");
  add_spec(hc);
  hc->add_option("--input", input, "grid function CSV")->required();
  hc->add_option("--beta", beta)->required();
  hc->add_option("--B", B)->required();
  hc->add_option("--t0", t0);
  hc->add_option("--delta", delta);
  hc->add_option("--t", t_list)->required();
  hc->add_option("--tol", tol);
  add_out(hc);

  auto* dt = app.add_subcommand("dual-transport", "dual transport inequality");
  add_spec(dt);
  dt->add_option("--input", input, "grid function CSV")->required();
  dt->add_option("--b", b)->required();
  dt->add_option("--beta", beta)->required();
  dt->add_option("--delta", delta);
  dt->add_option("--tol", tol);
  add_out(dt);

  auto* wt = app.add_subcommand("weak-transport", "discrete weak transport");
  wt->add_option("--mu", mu_text, "atoms as loc:mass,loc:mass")->required();
  wt->add_option("--nu", nu_text, "atoms as loc:mass,loc:mass")->required();
  wt->add_option("--beta", beta)->required();
  wt->add_option("--delta", delta);
  wt->add_flag("--check-entropy", have_b,
               "verify cost <= b * relative entropy");
  wt->add_option("--b", b);
  add_out(wt);

  auto* rp = app.add_subcommand("report", "bundled certificate and MC report");
  add_spec(rp);
  rp->add_option("--beta", beta)->required();
  rp->add_option("--m", m)->required();
  rp->add_option("--sigma", sigma)->required();
  rp->add_option("--C", C)->required();
  rp->add_option("--n", n);
  rp->add_option("--N", N);
  rp->add_option("--seed", seed);
  rp->add_option("--workers", workers);
  add_out(rp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    if (conj->parsed())
      return run_conjugate(beta, delta, t_single, tmin, tmax, points, output);
    if (ct->parsed())
      return run_check_tail(spec_path, beta, m, sigma, sigma_pow, output);
    if (es->parsed())
      return run_estimate_sigma(spec_path, beta, m, output);
    if (sc->parsed())
      return run_shift_check(spec_path, beta, h, alpha, m, output);
    if (hb->parsed()) {
      ConcentrationBound bound;
      bound.mode = mode == "smooth" ? ConcentrationBound::Mode::smooth
                   : mode == "lipschitz" ? ConcentrationBound::Mode::lipschitz
                                         : ConcentrationBound::Mode::beta0;
      bound.beta = beta;
      bound.C = C;
      bound.A = A;
      bound.B = B2;
      bound.Binf = Binf;
      bound.m_plus_3sigma = m3s_val;
      return run_herbst(bound, tmin, tmax, points, samples_path, output, format);
    }
    if (mc->parsed())
      return run_mc_lsi(spec_path, beta, C, n_list, N, seed, phi_name,
                        phi_param, phi_scale,
                        mc->count("--m3s") ? std::optional<double>(m3s_val)
                                           : std::nullopt,
                        workers, output);
    if (ic->parsed())
      return run_infconv(input, output, tconv, beta, delta);
    if (hj->parsed())
      return run_hj_check(input, beta, delta, t_list, tol, output);
    if (hc->parsed())
      return run_hypercontract(spec_path, input, beta, B, t0, delta, t_list,
                               tol, output);
    if (dt->parsed())
      return run_dual_transport(spec_path, input, b, beta, delta, tol, output);
    if (wt->parsed())
      return run_weak_transport(mu_text, nu_text, beta, delta,
                                have_b ? std::optional<double>(b) : std::nullopt,
                                output);
    if (rp->parsed())
      return run_report(spec_path, beta, m, sigma, C, n, N, seed, workers,
                        output);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
