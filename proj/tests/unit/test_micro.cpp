#include <doctest.h>

#include <cmath>

#include "evomarket/micro.hpp"
#include "evomarket/stats.hpp"

using namespace evomarket;

namespace {

ProductState make_product(ProductId id, double sales, double price,
                          double preference = 1.0, double reproduction = 0.0) {
  ProductState p;
  p.id = id;
  p.sales = sales;
  p.supply = (1.0 + reproduction) * sales;
  p.inventory = 1.0;
  p.price = price;
  p.preference = preference;
  p.reproduction = reproduction;
  return p;
}

}  // namespace

TEST_CASE("purchase_rate is the product of its densities") {
  ProductState p = make_product(0, 0.0, 0.025, 1.0);
  p.inventory = 0.5;
  CHECK(purchase_rate(p, 0.2) == doctest::Approx(0.1));
  CHECK(purchase_rate(p, 0.0) == doctest::Approx(0.0));
  p.inventory = 1.0;
  CHECK(purchase_rate(p, 0.2) == doctest::Approx(0.2));  // doubling z doubles y
  p.preference = 0.0;
  CHECK(purchase_rate(p, 0.2) == doctest::Approx(0.0));
  CHECK_THROWS_AS(purchase_rate(p, -1.0), domain_error);
}

TEST_CASE("step_inventory follows the excess-supply balance") {
  ProductState p = make_product(0, 1.0, 0.025, 1.0, 0.0);
  step_inventory(p, 0.01);
  CHECK(p.inventory == doctest::Approx(1.0));  // gamma = 0: unchanged

  p = make_product(0, 1.0, 0.025, 1.0, 0.1);
  step_inventory(p, 0.01);
  CHECK(p.inventory == doctest::Approx(1.001));

  // Clamps at zero and reports the stockout.
  p = make_product(0, 1.0, 0.025, 1.0, -0.5);
  p.inventory = 0.001;
  CHECK(step_inventory(p, 0.01));
  CHECK(p.inventory == doctest::Approx(0.0));
}

TEST_CASE("inventory aggregation equals mean excess supply times total sales") {
  std::vector<ProductState> prods = {make_product(0, 0.4, 0.02, 1.0, 0.1),
                                     make_product(1, 0.6, 0.03, 1.0, 0.2)};
  const double dt = 0.01;
  double dz = 0.0;
  for (auto& p : prods) {
    const double before = p.inventory;
    step_inventory(p, dt);
    dz += p.inventory - before;
  }
  // Sales-weighted mean gamma: (0.4*0.1 + 0.6*0.2) / 1.0.
  CHECK(dz == doctest::Approx(0.16 * 1.0 * dt));
}

TEST_CASE("step_consumers: stationary point and exponential relaxation") {
  MarketParams params;
  // Constant demand at the natural price; sales respond linearly to psi so
  // a deviation from the balance point decays exponentially at rate
  // sum(eta * z) (closed form of the linear relaxation ODE).
  const double d = demand_rate(params.natural_price, params.repurchase_rate, params);

  MarketState st;
  st.products = {make_product(0, 0.0, params.natural_price, 0.06),
                 make_product(1, 0.0, params.natural_price, 0.04)};
  st.products[0].inventory = 1.0;
  st.products[1].inventory = 1.0;
  st.mean_price = params.natural_price;
  const double rate = 0.06 + 0.04;  // sum eta_i * z_i
  const double psi_star = d / rate;

  // At stationarity psi does not move.
  st.consumer_density = psi_star;
  for (auto& p : st.products) p.sales = purchase_rate(p, st.consumer_density);
  step_consumers(st, params, 1e-3);
  CHECK(st.consumer_density == doctest::Approx(psi_star).epsilon(1e-12));

  // Off stationarity: compare against the closed-form decay.
  const double delta0 = 0.3 * psi_star;
  st.consumer_density = psi_star + delta0;
  const double dt = 1e-3;
  const double horizon = 2.0;
  const auto n_steps = static_cast<std::size_t>(horizon / dt);
  for (std::size_t i = 0; i < n_steps; ++i) {
    for (auto& p : st.products) p.sales = purchase_rate(p, st.consumer_density);
    step_consumers(st, params, dt);
  }
  const double expected = psi_star + delta0 * std::exp(-rate * horizon);
  CHECK(std::fabs(st.consumer_density - expected) / expected < 1e-4);
}

TEST_CASE("product_fitness and the sales-weighted mean") {
  ProductState p = make_product(0, 1.0, 0.025, 1.0, 0.1);
  CHECK(product_fitness(p, 0.2) == doctest::Approx(0.02));
  p.reproduction = 0.0;
  CHECK(product_fitness(p, 0.2) == doctest::Approx(0.0));

  std::vector<ProductState> prods = {make_product(0, 0.2, 0.02),
                                     make_product(1, 0.8, 0.02)};
  prods[0].fitness = 0.5;
  prods[1].fitness = 0.1;
  CHECK(mean_fitness(prods) == doctest::Approx((0.2 * 0.5 + 0.8 * 0.1) / 1.0));
  prods[1].alive = false;
  CHECK(mean_fitness(prods) == doctest::Approx(0.5));
}

TEST_CASE("replicator_step: selection arithmetic and neutrality") {
  std::vector<ProductState> prods = {make_product(0, 0.5, 0.02),
                                     make_product(1, 0.5, 0.02)};
  prods[0].fitness = 0.1;
  prods[1].fitness = 0.0;
  replicator_step(prods, 1.0);
  CHECK(prods[0].sales == doctest::Approx(0.525));
  CHECK(prods[1].sales == doctest::Approx(0.475));

  for (auto& p : prods) p.fitness = 0.37;  // equal fitness: no motion
  const double y0 = prods[0].sales, y1 = prods[1].sales;
  replicator_step(prods, 1.0);
  CHECK(prods[0].sales == doctest::Approx(y0).epsilon(1e-15));
  CHECK(prods[1].sales == doctest::Approx(y1).epsilon(1e-15));
}

TEST_CASE("replicator_step conserves total sales") {
  Rng rng(31);
  std::vector<ProductState> prods;
  for (int i = 0; i < 200; ++i) {
    auto p = make_product(i, 0.01 + rng.uniform(), 0.02);
    p.fitness = rng.normal();
    prods.push_back(p);
  }
  double total = 0.0;
  for (const auto& p : prods) total += p.sales;
  for (int step = 0; step < 1000; ++step) {
    for (auto& p : prods) p.fitness = 0.1 * rng.normal();
    replicator_step(prods, 0.01);
    double after = 0.0;
    for (const auto& p : prods) after += p.sales;
    CHECK(std::fabs(after - total) / total < 1e-10);
    total = after;
  }
}

TEST_CASE("replicator with constant fitness gap follows the logistic curve") {
  // Two products, fitness gap s: the winner's share x obeys
  // dx/dtau = s x (1 - x), whose solution is the logistic function.
  const double s = 1.0, dt = 1e-4, horizon = 5.0;
  std::vector<ProductState> prods = {make_product(0, 0.1, 0.02),
                                     make_product(1, 0.9, 0.02)};
  prods[0].fitness = s;
  prods[1].fitness = 0.0;
  const double x0 = 0.1;
  const auto n_steps = static_cast<std::size_t>(horizon / dt);
  for (std::size_t i = 1; i <= n_steps; ++i) {
    replicator_step(prods, dt);
    if (i % 5000 == 0) {
      const double t = dt * static_cast<double>(i);
      const double x = prods[0].sales / (prods[0].sales + prods[1].sales);
      const double logistic =
          x0 * std::exp(s * t) / (1.0 + x0 * (std::exp(s * t) - 1.0));
      CHECK(std::fabs(x - logistic) / logistic < 1e-3);
    }
  }
}

TEST_CASE("growth_rate log ratio") {
  CHECK(growth_rate(0.4, 0.4) == doctest::Approx(0.0));
  CHECK(growth_rate(0.4, 0.8) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(growth_rate(0.0, 1.0), domain_error);
  CHECK_THROWS_AS(growth_rate(1.0, 0.0), domain_error);
}

TEST_CASE("price_fluctuation_step: restoring force and fixed point") {
  MicroConfig cfg;
  cfg.restoring_strength = 1.0;
  CHECK(price_fluctuation_step(0.5, 0.0, cfg, 0.01) == doctest::Approx(0.49));
  CHECK(price_fluctuation_step(-0.5, 0.0, cfg, 0.01) == doctest::Approx(-0.49));
  CHECK(price_fluctuation_step(0.0, 0.0, cfg, 0.01) == doctest::Approx(0.0));
}

TEST_CASE("stationary price deviations are Laplace rather than Gaussian") {
  MicroConfig cfg;
  cfg.restoring_strength = 2.0;
  cfg.price_noise.amplitude = 0.5;
  const double dt = 0.002;
  const double sigma = std::sqrt(2.0 * cfg.price_noise.amplitude * dt);
  Rng rng(8);
  double dev = 0.0;
  for (int i = 0; i < 20000; ++i)
    dev = price_fluctuation_step(dev, sigma * rng.normal(), cfg, dt);
  std::vector<double> samples;
  samples.reserve(100000);
  while (samples.size() < 100000) {
    // Thin by several relaxation times so the samples are near-independent.
    for (int k = 0; k < 200; ++k)
      dev = price_fluctuation_step(dev, sigma * rng.normal(), cfg, dt);
    samples.push_back(dev);
  }
  const auto lap = fit_laplace(samples, FitOptions{0, 0});
  CHECK(lap.loglik > gaussian_loglik(samples));
  // Mean reversion: the thinned samples are nearly independent, so the
  // plain standard error is a fair yardstick.
  CHECK(std::fabs(mean(samples)) <
        4.0 * stdev(samples) / std::sqrt(static_cast<double>(samples.size())));
}

TEST_CASE("run_micro: zero steps, fixed point, determinism") {
  MarketParams params;
  MicroConfig cfg;
  cfg.dt = 0.01;
  cfg.enable_price_fluctuations = false;
  cfg.enable_fitness_fluctuations = false;
  cfg.fitness_mode = FitnessMode::direct;
  cfg.record_every = 10;

  auto make_state = [&] {
    MarketState st;
    st.products = {make_product(0, 0.05, params.natural_price),
                   make_product(1, 0.05, params.natural_price)};
    st.consumer_density =
        demand_rate(params.natural_price, params.repurchase_rate, params) / 0.1;
    return st;
  };

  MarketState st = make_state();
  const auto rec0 = run_micro(st, cfg, params, 0, 1);
  CHECK(rec0.snapshots.size() == 1);

  // Zero noise and equal (zero) fitness: the state is a fixed point up to
  // the consumer balance, which is started at its stationary value.
  st = make_state();
  const auto rec = run_micro(st, cfg, params, 100, 1);
  const auto& first = rec.snapshots.front();
  const auto& last = rec.snapshots.back();
  CHECK(last.total_sales == doctest::Approx(first.total_sales).epsilon(1e-12));
  CHECK(last.mean_price == doctest::Approx(first.mean_price).epsilon(1e-12));

  // Bit-identical reruns under the same seed and config.
  cfg.enable_price_fluctuations = true;
  cfg.enable_fitness_fluctuations = true;
  cfg.fitness_noise.amplitude = 0.005;
  cfg.price_noise.amplitude = 0.001;
  MarketState a = make_state(), b = make_state();
  const auto ra = run_micro(a, cfg, params, 500, 42);
  const auto rb = run_micro(b, cfg, params, 500, 42);
  REQUIRE(ra.snapshots.size() == rb.snapshots.size());
  for (std::size_t i = 0; i < ra.snapshots.size(); ++i) {
    CHECK(ra.snapshots[i].total_sales == rb.snapshots[i].total_sales);
    CHECK(ra.snapshots[i].mean_price == rb.snapshots[i].mean_price);
    for (std::size_t k = 0; k < ra.snapshots[i].products.size(); ++k) {
      CHECK(ra.snapshots[i].products[k].sales == rb.snapshots[i].products[k].sales);
      CHECK(ra.snapshots[i].products[k].price == rb.snapshots[i].products[k].price);
    }
  }
}

TEST_CASE("run_micro aborts when dt violates the replicator stability bound") {
  MarketParams params;
  MicroConfig cfg;
  cfg.dt = 0.01;
  cfg.enable_price_fluctuations = false;
  cfg.fitness_mode = FitnessMode::direct;
  // Per-step fitness shock std is sqrt(2*D*dt)/dt = 10: far beyond the
  // stability bound 0.1/dt across a hundred products.
  cfg.fitness_noise.amplitude = 50.0;

  MarketState st;
  for (int i = 0; i < 100; ++i)
    st.products.push_back(make_product(i, 0.01, params.natural_price));
  st.consumer_density = 1.0;
  CHECK_THROWS_AS(run_micro(st, cfg, params, 10, 5), consistency_error);
}

TEST_CASE("mean growth rate over products stays near zero on the short scale") {
  MarketParams params;
  MicroConfig cfg;
  cfg.dt = 0.01;
  cfg.enable_price_fluctuations = false;
  cfg.fitness_mode = FitnessMode::direct;
  // Small amplitude keeps the multiplicative bias of the log growth well
  // below the ensemble standard error.
  cfg.fitness_noise.amplitude = 2e-4;
  cfg.record_every = 1000;

  MarketState st;
  const int n = 2000;
  for (int i = 0; i < n; ++i)
    st.products.push_back(make_product(i, 1.0, params.natural_price));
  st.consumer_density = 1.0;
  const auto rec = run_micro(st, cfg, params, 1000, 17);
  std::vector<double> rates;
  const auto& last = rec.snapshots.back();
  for (int i = 0; i < n; ++i)
    rates.push_back(growth_rate(1.0, last.products[i].sales));
  const double se = stdev(rates) / std::sqrt(static_cast<double>(n));
  CHECK(std::fabs(mean(rates)) < 3.0 * se + 1e-3);
}

TEST_CASE("cull_dead_products drops floored products and updates firms") {
  MarketState st;
  st.products = {make_product(0, 1e-12, 0.02), make_product(1, 0.5, 0.02)};
  FirmState firm;
  firm.id = 0;
  firm.product_ids = {0, 1};
  st.firms.push_back(firm);
  cull_dead_products(st, 1e-9);
  CHECK(!st.products[0].alive);
  CHECK(st.products[1].alive);
  CHECK(st.firms[0].product_ids.count(0) == 0);
  CHECK(st.firms[0].sales == doctest::Approx(0.5));
  CHECK(st.firms[0].active);
}
