#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "concentrate/herbst.hpp"
#include "concentrate/measure_model.hpp"
#include "concentrate/rng.hpp"

using namespace concentrate;

namespace {

ConcentrationBound smooth_bound(double beta, double C, double A, double B) {
  ConcentrationBound b;
  b.mode = ConcentrationBound::Mode::smooth;
  b.beta = beta;
  b.C = C;
  b.A = A;
  b.B = B;
  return b;
}

ConcentrationBound beta0_bound(double C, double A, double Binf, double m3s) {
  ConcentrationBound b;
  b.mode = ConcentrationBound::Mode::beta0;
  b.beta = 0.0;
  b.C = C;
  b.A = A;
  b.Binf = Binf;
  b.m_plus_3sigma = m3s;
  return b;
}

} // namespace

TEST_CASE("tail bound spot values") {
  CHECK(tail_bound(smooth_bound(1.0, 1.0, 1.0, 1.0), 4.0) == std::exp(-3.0));
  CHECK(tail_bound(beta0_bound(1.0, 1.0, 1.0, 1.0), 2.0) == std::exp(-0.5));
  CHECK(tail_bound(smooth_bound(0.5, 2.0, 1.5, 0.8), 0.0) == 1.0);
  CHECK(tail_bound(beta0_bound(2.0, 1.5, 0.8, 1.2), 0.0) == 1.0);
}

TEST_CASE("tail bound shape") {
  auto b = smooth_bound(0.5, 2.0, 1.0, 1.5);
  double prev = 1.0;
  for (double t = 0.0; t <= 20.0; t += 0.25) {
    double v = tail_bound(b, t);
    CHECK(v <= prev + 1e-15);
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
    prev = v;
  }

  // log bound follows the quadratic branch before the crossover and the
  // heavy branch after; crossover where the two min-arguments coincide
  auto log_quad = [&](double t) {
    return -(3.0 / 16.0) * t * t / (b.C * b.A * b.A);
  };
  auto log_heavy = [&](double t) {
    return -(3.0 / 16.0) * std::pow(t, 1.0 + b.beta) /
           (std::pow(b.C, b.beta) * std::pow(b.B, 1.0 + b.beta));
  };
  // t^2/(C A^2) = t^{1+beta}/(C^beta B^{1+beta})  =>  solve for t
  double cross = std::pow(std::pow(b.C, b.beta) * std::pow(b.B, 1.0 + b.beta) /
                              (b.C * b.A * b.A),
                          1.0 / (b.beta - 1.0));
  for (double t : {0.25 * cross, 0.5 * cross}) {
    CHECK(std::log(tail_bound(b, t)) == doctest::Approx(log_quad(t)));
    CHECK(log_quad(t) >= log_heavy(t) - 1e-12);
  }
  for (double t : {2.0 * cross, 4.0 * cross}) {
    CHECK(std::log(tail_bound(b, t)) == doctest::Approx(log_heavy(t)));
    CHECK(log_heavy(t) >= log_quad(t) - 1e-12);
  }
}

TEST_CASE("tail bound scale covariance") {
  for (double beta : {0.3, 0.7, 1.0})
    for (double c : {0.5, 2.0, 7.0}) {
      auto base = smooth_bound(beta, 1.7, 0.9, 1.3);
      auto scaled = smooth_bound(beta, 1.7, c * 0.9, c * 1.3);
      for (double t : {0.5, 1.0, 3.0, 10.0})
        CHECK(tail_bound(scaled, c * t) ==
              doctest::Approx(tail_bound(base, t)).epsilon(1e-13));
    }
}

TEST_CASE("lipschitz mode uses the same displayed formula") {
  auto smooth = smooth_bound(0.5, 2.0, 1.1, 0.9);
  auto lip = smooth;
  lip.mode = ConcentrationBound::Mode::lipschitz;
  for (double t : {0.5, 2.0, 8.0})
    CHECK(tail_bound(lip, t) == tail_bound(smooth, t));
}

TEST_CASE("bound parameter validation") {
  CHECK_THROWS_AS(tail_bound(smooth_bound(0.0, 1.0, 1.0, 1.0), 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(tail_bound(smooth_bound(1.0, -1.0, 1.0, 1.0), 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(tail_bound(smooth_bound(1.0, 1.0, 0.0, 1.0), 1.0),
                  std::invalid_argument);
  auto b0 = beta0_bound(1.0, 1.0, 1.0, 1.0);
  b0.beta = 0.5;
  CHECK_THROWS_AS(tail_bound(b0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(tail_bound(smooth_bound(1.0, 1.0, 1.0, 1.0), -1.0),
                  std::invalid_argument);
}

TEST_CASE("set enlargement bound") {
  CHECK(set_enlargement_bound(0.5, 0.3, 0.0) == 1.0);
  CHECK(set_enlargement_bound(1.0, 0.1, 50.0) == std::exp(-5.0));
  double prev = 1.0;
  for (double r = 0.0; r <= 30.0; r += 0.5) {
    double v = set_enlargement_bound(0.25, 0.2, r);
    CHECK(v <= prev);
    prev = v;
  }
  CHECK_THROWS_AS(set_enlargement_bound(0.5, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(set_enlargement_bound(0.5, 0.3, -1.0), std::invalid_argument);
}

TEST_CASE("ball decomposition split") {
  auto [y0, z0] = ball_decomposition({0.0, 0.0}, 0.5);
  CHECK(y0 == std::vector<double>{0.0, 0.0});
  CHECK(z0 == std::vector<double>{0.0, 0.0});

  // beta = 1: the strict criterion never holds, everything goes to z
  auto [y1, z1] = ball_decomposition({0.5, 3.0}, 1.0);
  CHECK(y1 == std::vector<double>{0.0, 0.0});
  CHECK(z1 == std::vector<double>{0.5, 3.0});

  auto [y, z] = ball_decomposition({0.5, 3.0}, 0.5);
  CHECK(y == std::vector<double>{0.5, 0.0});
  CHECK(z == std::vector<double>{0.0, 3.0});
  double min_sum = std::min(0.25, std::pow(0.5, 1.5)) +
                   std::min(9.0, std::pow(3.0, 1.5));
  CHECK(0.5 * 0.5 <= min_sum);
  CHECK(std::pow(3.0, 1.5) <= min_sum);

  CHECK_THROWS_AS(ball_decomposition({1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("ball decomposition norm inequalities on random vectors") {
  Prng rng(515);
  for (double beta : {0.25, 0.6, 1.0}) {
    for (int rep = 0; rep < 100; ++rep) {
      std::size_t n = 1 + rng.next_u64() % 8;
      std::vector<double> x(n);
      for (double& v : x)
        v = 4.0 * (2.0 * rng.uniform01() - 1.0);
      auto [y, z] = ball_decomposition(x, beta);
      double min_sum = 0.0, y2 = 0.0, z1b = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(y[i] + z[i] == x[i]); // exact split
        CHECK((y[i] == 0.0 || z[i] == 0.0));
        min_sum += std::min(x[i] * x[i], std::pow(std::abs(x[i]), 1.0 + beta));
        y2 += y[i] * y[i];
        z1b += std::pow(std::abs(z[i]), 1.0 + beta);
      }
      CHECK(y2 <= min_sum + 1e-12);
      CHECK(z1b <= min_sum + 1e-12);
      // membership in the scaled balls whenever the min-sum is below s
      double s = min_sum + 1e-9;
      CHECK(std::sqrt(y2) <= std::sqrt(s));
      CHECK(std::pow(z1b, 1.0 / (1.0 + beta)) <=
            std::pow(s, 1.0 / (1.0 + beta)));
    }
  }
}

TEST_CASE("empirical tails stay under an inflated bound") {
  // linear functional of a standard gaussian: gradient norms are all 1
  auto g = MeasureSpec::gaussian(0.0, 1.0);
  auto batch = g.sample(200000, 2718);
  std::vector<double> t_grid;
  for (double t = 0.0; t <= 6.0; t += 0.25)
    t_grid.push_back(t);

  auto rep =
      empirical_tail_compare(batch.values, smooth_bound(1.0, 10.0, 1.0, 1.0),
                             t_grid);
  CHECK(rep.violations == 0);
  CHECK(rep.sample_count == 200000);
  CHECK(std::abs(rep.sample_mean) < 0.02);
  CHECK(rep.rows.front().empirical == doctest::Approx(0.5).epsilon(0.01));

  // beyond the largest sample the empirical tail is zero
  auto far = empirical_tail_compare(batch.values,
                                    smooth_bound(1.0, 10.0, 1.0, 1.0), {100.0});
  CHECK(far.rows[0].empirical == 0.0);
  CHECK(far.rows[0].empirical <= far.rows[0].bound);

  // a crushed constant forces detectable violations
  auto bad = empirical_tail_compare(batch.values,
                                    smooth_bound(1.0, 1e-4, 1.0, 1.0), t_grid);
  CHECK(bad.violations > 0);
  bool flagged = false;
  for (const auto& row : bad.rows)
    if (row.violation) {
      flagged = true;
      CHECK(row.empirical - row.band_halfwidth > row.bound);
    }
  CHECK(flagged);

  CHECK_THROWS_AS(
      empirical_tail_compare({}, smooth_bound(1.0, 1.0, 1.0, 1.0), t_grid),
      std::invalid_argument);
}

TEST_CASE("tail compare report serialization") {
  auto g = MeasureSpec::uniform(-1.0, 1.0);
  auto batch = g.sample(10000, 5);
  auto rep = empirical_tail_compare(batch.values,
                                    smooth_bound(1.0, 5.0, 1.0, 1.0),
                                    {0.0, 0.5, 1.0});
  auto j = rep.to_json();
  CHECK(j["rows"].size() == 3);
  CHECK(j["sample_count"] == 10000);
  CHECK(double(j["rows"][1]["t"]) == 0.5);

  const char* path = "herbst_report.csv";
  rep.write_csv(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,bound,empirical_tail,band_halfwidth");
  int lines = 0;
  std::string line;
  while (std::getline(in, line))
    ++lines;
  CHECK(lines == 3);
  std::remove(path);
}
