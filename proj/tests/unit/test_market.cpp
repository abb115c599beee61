#include <doctest.h>

#include <cmath>

#include "evomarket/market.hpp"

using namespace evomarket;

TEST_CASE("unit_cost arithmetic") {
  CHECK(unit_cost(1.0, {1.0, 0.0, 1.0}) == doctest::Approx(2.0));
  CHECK(unit_cost(2.0, {4.0, 3.0, 1.0}) == doctest::Approx(7.0));
  CHECK(unit_cost(0.37, {0.0, 5.0, 0.0}) == doctest::Approx(5.0));
  CHECK_THROWS_AS(unit_cost(0.0, {1.0, 1.0, 1.0}), domain_error);
  CHECK_THROWS_AS(unit_cost(-1.0, {1.0, 1.0, 1.0}), domain_error);
}

TEST_CASE("capacity_limit value and minimality") {
  CHECK(capacity_limit({4.0, 0.0, 1.0}).value() == doctest::Approx(2.0));
  CHECK(capacity_limit({1.0, 0.0, 1.0}).value() == doctest::Approx(1.0));
  CHECK(!capacity_limit({1.0, 1.0, 0.0}).has_value());

  const CostCoefficients c{9.0, 0.0, 4.0};
  const double s_star = capacity_limit(c).value();
  CHECK(s_star == doctest::Approx(1.5));
  CHECK(unit_cost(s_star + 0.1, c) > unit_cost(s_star, c));
  CHECK(unit_cost(s_star - 0.1, c) > unit_cost(s_star, c));
}

TEST_CASE("capacity_limit minimizes unit_cost over random coefficients") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    CostCoefficients c;
    c.c0 = 0.1 + 10.0 * rng.uniform();
    c.c1 = 5.0 * rng.uniform();
    c.c2 = 0.1 + 10.0 * rng.uniform();
    const double s_star = capacity_limit(c).value();
    const double best = unit_cost(s_star, c);
    for (int k = 1; k <= 50; ++k) {
      const double s = s_star * std::exp(0.2 * (k - 25));
      CHECK(unit_cost(s, c) >= best - 1e-12);
    }
  }
}

TEST_CASE("income_pdf values and normalization") {
  CHECK(income_pdf(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(income_pdf(2.5, 2.5) == doctest::Approx(std::exp(-1.0) / 2.5));
  CHECK_THROWS_AS(income_pdf(-0.1, 1.0), domain_error);
  CHECK_THROWS_AS(income_pdf(1.0, 0.0), domain_error);

  // Simpson quadrature over [0, 60*I]; the remainder is below 1e-20.
  const double mean_income = 1.7;
  const std::size_t n = 60000;
  const double h = 60.0 * mean_income / n;
  double integral = income_pdf(0.0, mean_income);
  for (std::size_t i = 1; i < n; ++i)
    integral += (i % 2 ? 4.0 : 2.0) * income_pdf(i * h, mean_income);
  integral += income_pdf(n * h, mean_income);
  integral *= h / 3.0;
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("sample_income mean matches the distribution mean") {
  Rng rng(21);
  const std::size_t n = 1000000;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += sample_income(2.0, rng);
  CHECK(acc / n == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("market_volume boundary values") {
  MarketParams p;
  CHECK(market_volume(p.natural_price, p) == doctest::Approx(1.0));
  CHECK(market_volume(0.0, p) == doctest::Approx(1.0));  // clamped below mu_n
  CHECK(market_volume(1e6, p) == doctest::Approx(p.upper_share));
  // Gaussian half-height point of the price-sensitive share.
  const double mu_half = p.natural_price + p.demand_width * std::sqrt(2.0 * std::log(2.0));
  CHECK(market_volume(mu_half, p) ==
        doctest::Approx(0.5 * p.lower_share() + p.upper_share).epsilon(1e-12));
  CHECK_THROWS_AS(market_volume(-0.01, p), domain_error);
}

TEST_CASE("market_volume is non-increasing and continuous at the natural price") {
  MarketParams p;
  double prev = market_volume(0.0, p);
  for (int i = 1; i <= 400; ++i) {
    const double mu = 0.001 * i;
    const double v = market_volume(mu, p);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
  const double eps = 1e-9;
  CHECK(market_volume(p.natural_price - eps, p) ==
        doctest::Approx(market_volume(p.natural_price + eps, p)).epsilon(1e-6));
}

TEST_CASE("demand_rate values and quadratic expansion accuracy") {
  MarketParams p;
  CHECK(demand_rate(p.natural_price, 0.1, p) == doctest::Approx(0.1));
  CHECK(demand_rate(0.5, 0.0, p) == doctest::Approx(0.0));
  CHECK_THROWS_AS(demand_rate(0.1, -0.1, p), domain_error);

  // Near the natural price the quadratic expansion tracks the exact curve.
  for (int i = -10; i <= 10; ++i) {
    const double mu = p.natural_price + 0.01 * i * p.demand_width;
    const double exact = demand_rate(mu, 0.1, p);
    const double quad = demand_rate_quadratic(mu, 0.1, p);
    CHECK(std::fabs(quad - exact) / exact < 0.01);
  }
}

TEST_CASE("MarketParams validation messages") {
  MarketParams p;
  p.upper_share = 1.5;
  CHECK_THROWS_WITH_AS(p.validate(), "upper_share out of [0,1]", domain_error);
  p = MarketParams{};
  p.epsilon = 0.5;
  CHECK_THROWS_AS(p.validate(), domain_error);
  p = MarketParams{};
  p.demand_width = 0.0;
  CHECK_THROWS_AS(p.validate(), domain_error);
  CHECK_NOTHROW(MarketParams{}.validate());
}

TEST_CASE("MarketState aggregates") {
  MarketState st;
  st.products.resize(3);
  st.products[0] = {0, 0.1, 0.1, 0.5, 0.03};
  st.products[1] = {1, 0.2, 0.2, 0.5, 0.05};
  st.products[2] = {2, 0.3, 0.3, 0.5, 0.01};
  CHECK(st.total_sales() == doctest::Approx(0.6));
  CHECK(st.total_inventory() == doctest::Approx(1.5));
  // Sales-weighted mean price.
  CHECK(st.recompute_mean_price() ==
        doctest::Approx((0.1 * 0.03 + 0.2 * 0.05 + 0.3 * 0.01) / 0.6));
  st.products[1].alive = false;
  CHECK(st.total_sales() == doctest::Approx(0.4));
  st.tau = 50;
  CHECK(st.long_time(0.02) == doctest::Approx(1.0));
}
