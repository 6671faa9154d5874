#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <vector>

#include <nlohmann/json.hpp>

#include "concentrate/measure_model.hpp"

using namespace concentrate;

namespace {

MeasureSpec cauchy_table() {
  // heavy-tailed table: upper tail 1/2 - atan(x)/pi sampled geometrically
  std::vector<std::pair<double, double>> knots;
  for (int k = 0; k <= 40; ++k) {
    double x = 0.5 * std::pow(2.0, double(k));
    knots.emplace_back(x, 0.5 - std::atan(x) / M_PI);
  }
  return MeasureSpec::tail_table(std::move(knots));
}

} // namespace

TEST_CASE("analytic tails") {
  CHECK(MeasureSpec::symmetric_exponential(1.0).upper_tail(0.0) == 0.5);
  CHECK(MeasureSpec::uniform(0.0, 1.0).upper_tail(2.0) == 0.0);
  CHECK(MeasureSpec::gaussian(0.0, 1.0).upper_tail(1.0) ==
        doctest::Approx(0.15865525393145707).epsilon(1e-9));
  CHECK(MeasureSpec::symmetric_weibull(2.0).upper_tail(0.0) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("weighted tail integrals") {
  auto expo = MeasureSpec::symmetric_exponential(1.0);
  CHECK(expo.nu_tail(0.0, 1.0, Side::plus) ==
        doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-9));
  CHECK(expo.nu_tail(0.0, 1.0, Side::minus) ==
        doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-9));
  CHECK(MeasureSpec::uniform(0.0, 1.0).nu_tail(1.0, 1.0, Side::plus) == 0.0);
  // int_{1/2}^{1} y (1-y) dy = 1/12
  CHECK(MeasureSpec::uniform(0.0, 1.0).nu_tail(1.0, 0.5, Side::plus) ==
        doctest::Approx(1.0 / 12.0).epsilon(1e-9));
  CHECK_THROWS_AS(cauchy_table().nu_tail(0.0, 1.0, Side::plus), DivergentTailError);
  CHECK_THROWS_AS(expo.nu_tail(0.0, -1.0, Side::plus), std::invalid_argument);
}

TEST_CASE("weighted tail integrals on atomic specs are exact") {
  auto tp = MeasureSpec::two_point(0.0, 0.5, 2.0);
  // tail is 1/2 on (0,2], so the weight-1 integral from 0 is y^2/4 at 2
  CHECK(tp.nu_tail(1.0, 0.0, Side::plus) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(tp.nu_tail(1.0, 1.0, Side::plus) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(tp.nu_tail(1.0, 2.0, Side::plus) == 0.0);
  auto tn = MeasureSpec::two_point(-2.0, 0.5, 0.0);
  CHECK(tn.nu_tail(1.0, 1.0, Side::minus) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("weighted tail integral is nonincreasing and vanishes") {
  for (const auto& spec :
       {MeasureSpec::symmetric_exponential(0.7), MeasureSpec::gaussian(0.0, 1.0),
        MeasureSpec::symmetric_weibull(1.5)}) {
    double prev = spec.nu_tail(0.5, 0.0, Side::plus);
    for (double x : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
      double cur = spec.nu_tail(0.5, x, Side::plus);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
    CHECK(prev <= 1e-6);
  }
}

TEST_CASE("quantile and tail agree at continuity points") {
  std::vector<MeasureSpec> specs{
      MeasureSpec::symmetric_exponential(2.0), MeasureSpec::gaussian(0.3, 1.7),
      MeasureSpec::symmetric_weibull(1.5), MeasureSpec::uniform(-1.0, 3.0)};
  for (const auto& spec : specs)
    for (double q : {1e-6, 0.01, 0.25, 0.5, 0.75, 0.99, 1.0 - 1e-6}) {
      double x = spec.quantile(q);
      CHECK(spec.upper_tail(x) == doctest::Approx(1.0 - q).epsilon(1e-9));
    }
}

TEST_CASE("sampling is deterministic and consistent") {
  auto u = MeasureSpec::uniform(0.0, 1.0);
  auto a = u.sample(5, 42);
  auto b = u.sample(5, 42);
  CHECK(a.values == b.values);

  auto big = u.sample(100000, 7);
  double mean = 0.0;
  for (double v : big.values)
    mean += v;
  mean /= double(big.values.size());
  CHECK(std::abs(mean - 0.5) <= 0.01);

  auto expo = MeasureSpec::symmetric_exponential(1.0);
  auto eb = expo.sample(100000, 7);
  double tail1 = 0.0;
  for (double v : eb.values)
    if (v >= 1.0)
      tail1 += 1.0;
  tail1 /= double(eb.values.size());
  CHECK(std::abs(tail1 - 0.5 * std::exp(-1.0)) <= 0.005);
}

TEST_CASE("sampled empirical tail tracks the analytic tail uniformly") {
  for (const auto& spec :
       {MeasureSpec::gaussian(0.0, 1.0), MeasureSpec::symmetric_exponential(1.0)}) {
    auto batch = spec.sample(100000, 11);
    auto emp = MeasureSpec::empirical([&] {
      auto v = batch.values;
      std::sort(v.begin(), v.end());
      return v;
    }());
    for (double x = -4.0; x <= 4.0; x += 0.25)
      CHECK(std::abs(emp.upper_tail(x) - spec.upper_tail(x)) <= 0.01);
  }
}

TEST_CASE("empirical tails are right-closed steps") {
  auto e = MeasureSpec::empirical({1.0, 2.0, 2.0, 4.0});
  CHECK(e.upper_tail(2.0) == 0.75);
  CHECK(e.upper_tail(2.0 + 1e-12) == 0.25);
  CHECK(e.lower_tail(2.0) == 0.75);
  CHECK(e.quantile(0.5) == 2.0);
  CHECK(e.quantile(0.76) == 4.0);
  CHECK(e.is_discrete());
  CHECK(!e.has_density());
}

TEST_CASE("tail table interpolates log-linearly") {
  auto t = MeasureSpec::tail_table({{1.0, 0.1}, {3.0, 0.001}});
  CHECK(t.upper_tail(1.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(t.upper_tail(2.0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(t.upper_tail(5.0) == doctest::Approx(1e-5).epsilon(1e-10));
  CHECK(t.quantile(1.0 - 0.01) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK_THROWS_AS(MeasureSpec::tail_table({{1.0, 0.5}, {2.0, 0.5}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(MeasureSpec::tail_table({{1.0, 1.5}}), std::invalid_argument);
}

TEST_CASE("json round trip") {
  auto spec = MeasureSpec::gaussian(0.25, 2.0).set_label("anchor");
  auto back = MeasureSpec::from_json(spec.to_json());
  CHECK(back.family() == "gaussian");
  CHECK(back.label() == "anchor");
  for (double x : {-3.0, 0.0, 1.5})
    CHECK(back.upper_tail(x) == spec.upper_tail(x));

  auto tp = MeasureSpec::from_json(nlohmann::json{
      {"family", "two_point"},
      {"params", {{"x1", 0.0}, {"p1", 0.5}, {"x2", 1.0}}}});
  CHECK(tp.upper_tail(0.5) == 0.5);
}

TEST_CASE("sample files round trip at full precision") {
  std::vector<double> vals{-1.2345678901234567, 0.1, 7.5e-11, 3.0};
  std::string path = "test_samples_tmp.txt";
  write_sample_file(path, vals);
  auto back = read_sample_file(path);
  CHECK(back == vals);
  std::remove(path.c_str());
}

TEST_CASE("construction guards") {
  CHECK_THROWS_AS(MeasureSpec::symmetric_exponential(0.0), std::invalid_argument);
  CHECK_THROWS_AS(MeasureSpec::symmetric_weibull(0.5), std::invalid_argument);
  CHECK_THROWS_AS(MeasureSpec::gaussian(0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(MeasureSpec::uniform(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(MeasureSpec::two_point(0.0, 1.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(MeasureSpec::empirical({}), std::invalid_argument);
  CHECK_THROWS_AS(MeasureSpec::empirical({2.0, 1.0}), std::invalid_argument);
}
