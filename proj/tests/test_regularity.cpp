#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "concentrate/regularity.hpp"

using namespace concentrate;

namespace {

MeasureSpec cauchy_table() {
  std::vector<std::pair<double, double>> knots;
  for (int k = 0; k <= 40; ++k) {
    double x = 0.5 * std::pow(2.0, double(k));
    knots.emplace_back(x, 0.5 - std::atan(x) / M_PI);
  }
  return MeasureSpec::tail_table(std::move(knots));
}

} // namespace

TEST_CASE("exponential measure saturates the tail-domination ratio") {
  auto spec = MeasureSpec::symmetric_exponential(1.0);
  auto cert = check_membership(spec, 0.0, 1.0, 1.0);
  CHECK(cert.certified);
  CHECK(cert.worst_ratio_plus == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(cert.worst_ratio_minus == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(estimate_sigma(spec, 0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("heavy-tailed table spec is refuted") {
  auto spec = cauchy_table();
  for (double sigma_pow : {1.0, 100.0}) {
    auto cert = check_membership(spec, 0.0, 1.0, sigma_pow);
    CHECK(!cert.certified);
    CHECK(cert.reason == "nu-tail infinite");
  }
  CHECK(std::isinf(estimate_sigma(spec, 0.0, 1.0)));
}

TEST_CASE("estimated scale is self-consistent") {
  auto g = MeasureSpec::gaussian(0.0, 1.0);
  double est = estimate_sigma(g, 1.0, 1.0);
  CHECK(std::isfinite(est));
  CHECK(check_membership(g, 1.0, 1.0, est + 1e-6).certified);
  CHECK(!check_membership(g, 1.0, 1.0, est * 0.99).certified);

  auto u = MeasureSpec::uniform(-1.0, 1.0);
  double eu = estimate_sigma(u, 0.0, 0.5);
  CHECK(std::isfinite(eu));
  CHECK(check_membership(u, 0.0, 0.5, eu).certified);
}

TEST_CASE("estimated scale is stable under grid refinement") {
  auto w = MeasureSpec::symmetric_weibull(1.5);
  GridConfig coarse{4096, std::nullopt}, fine{8192, std::nullopt};
  double a = estimate_sigma(w, 0.5, 1.0, coarse);
  double b = estimate_sigma(w, 0.5, 1.0, fine);
  CHECK(std::abs(a - b) <= 1e-4 * std::abs(a));
}

TEST_CASE("certificate is monotone in m and sigma") {
  auto spec = MeasureSpec::symmetric_weibull(2.0);
  double est = estimate_sigma(spec, 1.0, 1.0);
  CHECK(check_membership(spec, 1.0, 1.0, est).certified);
  CHECK(check_membership(spec, 1.0, 1.0, 2.0 * est).certified);
  CHECK(check_membership(spec, 1.0, 1.5, est).certified);
}

TEST_CASE("shifted-tail condition") {
  auto expo = MeasureSpec::symmetric_exponential(1.0);
  CHECK(check_shift_condition(expo, 0.0, {2.0, 0.5, 1.0}).holds);

  auto g = MeasureSpec::gaussian(0.0, 1.0);
  double est = estimate_sigma(g, 1.0, 1.0);
  CHECK(check_shift_condition(g, 1.0, {2.0 * est, 0.5, 1.0}).holds);

  auto res = check_shift_condition(cauchy_table(), 0.0, {2.0, 0.5, 1.0});
  CHECK(!res.holds);
  CHECK(res.witness_x.has_value());
}

TEST_CASE("conversions between the two tail conditions") {
  auto c = shift_from_sigma(1.0, 1.0);
  CHECK(c.h == 2.0);
  CHECK(c.alpha == 0.5);
  CHECK(sigma_from_shift(0.0, {2.0, 0.5, 1.0}) == doctest::Approx(4.0));
  CHECK(sigma_from_shift(1.0, {1.0, 0.5, 1.0}) == doctest::Approx(4.0));
}

TEST_CASE("condition conversion round trip") {
  for (double beta : {0.0, 0.5}) {
    auto spec = beta == 0.0 ? MeasureSpec::symmetric_exponential(1.0)
                            : MeasureSpec::symmetric_weibull(1.0 + beta);
    double m = 1.0;
    double est = estimate_sigma(spec, beta, m);
    REQUIRE(std::isfinite(est));
    REQUIRE(check_membership(spec, beta, m, est).certified);
    auto cond = shift_from_sigma(est, m);
    CHECK(check_shift_condition(spec, beta, cond).holds);
    double back = sigma_from_shift(beta, cond);
    CHECK(check_membership(spec, beta, m, back).certified);
  }
}

TEST_CASE("effective truncation constant") {
  CHECK(m_tilde(1.0, 1.0, 1.0) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(m_tilde(0.0, 1.0, 1.0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(m_tilde(1.0, 10.0, 0.0) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("stretched-exponential envelope fit") {
  std::vector<double> t_grid;
  for (double t = 0.0; t <= 8.0; t += 0.25)
    t_grid.push_back(t);

  auto expo = MeasureSpec::symmetric_exponential(1.0);
  auto rep = tail_decay_check(expo.sample(20000, 3), 0.0, 1.0, 1.0, t_grid);
  CHECK(rep.fitted);
  CHECK(rep.c2 >= 1.0);
  CHECK(rep.max_violation <= 0.0);

  auto g = MeasureSpec::gaussian(0.0, 1.0);
  double est = estimate_sigma(g, 1.0, 1.0);
  auto rg = tail_decay_check(g.sample(20000, 3), 1.0, 1.0, std::sqrt(est), t_grid);
  CHECK(rg.fitted);
  CHECK(rg.c2 >= 2.0 * est);
  CHECK(rg.max_violation <= 0.0);

  CHECK_THROWS_AS(tail_decay_check(expo.sample(100, 3), 0.0, 1.0, 1.0, t_grid),
                  std::invalid_argument);
}

TEST_CASE("density-weighted tail functional") {
  auto expo = MeasureSpec::symmetric_exponential(1.0);
  CHECK(barthe_roberto_functional(expo, 1.0, expo.median()) == 0.0);
  // closed form: (y + log 2)(1 - e^{-y}) for the unit two-sided exponential
  double y = 3.0;
  CHECK(barthe_roberto_functional(expo, 1.0, y) ==
        doctest::Approx((y + std::log(2.0)) * (1.0 - std::exp(-y))).epsilon(1e-8));
  double sup = 0.0;
  for (double yy = 0.0; yy <= 20.0; yy += 0.5)
    sup = std::max(sup, barthe_roberto_functional(expo, 1.0, yy));
  CHECK(std::isfinite(sup));

  auto w = MeasureSpec::symmetric_weibull(1.2);
  double supw = 0.0;
  for (double yy = 0.0; yy <= 20.0; yy += 0.5)
    supw = std::max(supw, barthe_roberto_functional(w, 0.2, yy));
  CHECK(std::isfinite(supw));

  CHECK_THROWS_AS(
      barthe_roberto_functional(MeasureSpec::empirical({0.0, 1.0}), 0.5, 1.0),
      std::logic_error);
  CHECK_THROWS_AS(barthe_roberto_functional(expo, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("certificate serialization") {
  auto cert = check_membership(MeasureSpec::symmetric_exponential(1.0), 0.0, 1.0, 1.0);
  auto j = cert.to_json();
  CHECK(j["status"] == "certified");
  CHECK(j["grid"]["kind"] == "geometric");
  CHECK(double(j["worst_ratio_plus"]) == doctest::Approx(1.0).epsilon(1e-9));

  auto bad = check_membership(cauchy_table(), 0.0, 1.0, 1.0);
  auto jb = bad.to_json();
  CHECK(jb["status"] == "refuted");
  CHECK(jb["reason"] == "nu-tail infinite");
}

TEST_CASE("empirical membership is censored at the largest sample") {
  auto spec = MeasureSpec::symmetric_exponential(1.0);
  auto batch = spec.sample(5000, 9);
  auto sorted = batch.values;
  std::sort(sorted.begin(), sorted.end());
  auto emp = MeasureSpec::empirical(sorted);
  double est = estimate_sigma(emp, 0.0, 1.0);
  REQUIRE(std::isfinite(est));
  auto cert = check_membership(emp, 0.0, 1.0, est);
  CHECK(cert.certified);
  CHECK(cert.censored_at.has_value());
  CHECK(*cert.censored_at == doctest::Approx(sorted.back()));
}
