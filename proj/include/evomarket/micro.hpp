#pragma once

// Short time scale tau: purchase events, inventory and consumer balances,
// replicator sales dynamics, and mean-reverting price fluctuations.

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "evomarket/common.hpp"
#include "evomarket/market.hpp"
#include "evomarket/noise.hpp"
#include "evomarket/record.hpp"

namespace evomarket {

enum class FitnessMode {
  direct,      // growth rate applied as the drawn fitness fluctuation (Gibrat)
  decomposed,  // f_i = psi(mu_i) * eta_i * gamma_i
};

struct MicroConfig {
  double dt = 0.01;
  NoiseSpec price_noise{NoiseKind::white, 0.5, 0.4, 1, 0, 1.0};
  NoiseSpec fitness_noise{NoiseKind::white, 0.5, 0.4, 2, 0, 1.0};
  double restoring_strength = 1.0;  // magnitude of the sign force on d(mu)
  double y_floor = 1e-9;            // sales below this exit the market
  std::size_t record_every = 100;
  FitnessMode fitness_mode = FitnessMode::direct;
  bool enable_price_fluctuations = true;
  bool enable_fitness_fluctuations = true;

  void validate() const {
    if (dt <= 0.0) throw domain_error("MicroConfig: dt must be > 0");
    if (y_floor < 0.0) throw domain_error("MicroConfig: y_floor must be >= 0");
    if (record_every == 0) throw domain_error("MicroConfig: record_every must be > 0");
  }
};

// Purchase frequency y = eta * z * psi.
inline double purchase_rate(const ProductState& prod, double psi_at_price) {
  if (psi_at_price < 0.0)
    throw domain_error("purchase_rate: consumer density must be >= 0");
  return prod.preference * prod.inventory * psi_at_price;
}

// dz/dtau = s - y = gamma * y; clamped at zero. Returns true on stockout.
inline bool step_inventory(ProductState& prod, double dt) {
  prod.inventory += prod.reproduction * prod.sales * dt;
  if (prod.inventory < 0.0) {
    prod.inventory = 0.0;
    return true;
  }
  return false;
}

// dpsi/dtau = d(<mu>) - y_t.
inline void step_consumers(MarketState& state, const MarketParams& params,
                           double dt) {
  const double d = demand_rate(state.mean_price, params.repurchase_rate, params);
  state.consumer_density += (d - state.total_sales()) * dt;
  if (state.consumer_density < 0.0) state.consumer_density = 0.0;
}

inline double product_fitness(const ProductState& prod, double psi_at_price) {
  return psi_at_price * prod.preference * prod.reproduction;
}

// Sales-weighted mean fitness over alive products.
inline double mean_fitness(const std::vector<ProductState>& products) {
  double num = 0.0, den = 0.0;
  for (const auto& p : products) {
    if (!p.alive) continue;
    num += p.sales * p.fitness;
    den += p.sales;
  }
  return den > 0.0 ? num / den : 0.0;
}

// dy_i/dtau = (f_i - <f>) y_i. The mean is recomputed from current weights
// so the discretized step conserves total sales exactly (up to roundoff).
// Products use the fitness cached in ProductState::fitness.
inline void replicator_step(std::vector<ProductState>& products, double dt) {
  const double fbar = mean_fitness(products);
  for (auto& p : products) {
    if (!p.alive) continue;
    p.sales += (p.fitness - fbar) * p.sales * dt;
    if (p.sales < 0.0) p.sales = 0.0;
    p.supply = (1.0 + p.reproduction) * p.sales;
  }
}

// Log growth rate over a window; both endpoints must be positive.
inline double growth_rate(double sales_before, double sales_after) {
  if (sales_before <= 0.0 || sales_after <= 0.0)
    throw domain_error("growth_rate: sales must be > 0 at both ends");
  return std::log(sales_after / sales_before);
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// d(dmu)/dtau = -Phi * sign(dmu) + noise. Returns the updated deviation.
inline double price_fluctuation_step(double price_deviation, double noise_value,
                                     const MicroConfig& cfg, double dt) {
  return price_deviation - cfg.restoring_strength * sign(price_deviation) * dt +
         noise_value;
}

namespace detail {

inline void check_finite(const ProductState& p, std::uint64_t step) {
  if (!std::isfinite(p.sales) || !std::isfinite(p.inventory) ||
      !std::isfinite(p.price) || !std::isfinite(p.fitness))
    throw consistency_error("micro step " + std::to_string(step) +
                            ": non-finite state in product " +
                            std::to_string(p.id));
}

}  // namespace detail

inline Snapshot take_snapshot(const MarketState& state, double epsilon,
                              double alpha_mean) {
  Snapshot snap;
  snap.tau = state.tau;
  snap.time = state.long_time(epsilon);
  snap.mean_price = state.recompute_mean_price();
  snap.consumer_density = state.consumer_density;
  for (const auto& p : state.products) {
    if (!p.alive) continue;
    snap.products.push_back({p.id, p.sales, p.inventory, p.price, p.fitness});
    snap.total_sales += p.sales;
    snap.total_supply += p.supply;
  }
  snap.n_products = snap.products.size();
  for (const auto& f : state.firms) {
    if (!f.active) continue;
    snap.firms.push_back({f.id, f.sales, f.product_ids.size()});
  }
  snap.n_firms = snap.firms.size();
  snap.revenue = snap.mean_price * snap.total_sales;
  snap.cost = alpha_mean * snap.revenue;
  snap.profit = snap.revenue - snap.cost;
  return snap;
}

// Removes products below the sales floor and detaches them from their
// firms; firm aggregates are recomputed afterwards.
inline void cull_dead_products(MarketState& state, double y_floor) {
  bool any = false;
  for (auto& p : state.products) {
    if (p.alive && p.sales < y_floor) {
      p.alive = false;
      any = true;
    }
  }
  if (!any && state.firms.empty()) return;
  for (auto& firm : state.firms) {
    if (any)
      for (const auto& p : state.products)
        if (!p.alive) firm.product_ids.erase(p.id);
    double x = 0.0;
    for (const auto& p : state.products)
      if (p.alive && firm.product_ids.count(p.id)) x += p.sales;
    firm.sales = x;
    firm.active = !firm.product_ids.empty();
  }
}

// Advances the market n_steps on the short scale, interleaving consumer,
// inventory, fitness, replicator, and price updates. Snapshots are taken
// every record_every steps; the run is deterministic in (state, cfg, seed).
inline RunRecord run_micro(MarketState& state, const MicroConfig& cfg,
                           const MarketParams& params, std::size_t n_steps,
                           std::uint64_t seed) {
  cfg.validate();
  RunRecord rec;
  rec.seed = seed;

  Rng master(seed);
  Rng fitness_rng = master.spawn();
  Rng price_rng = master.spawn();

  const double fitness_sigma =
      std::sqrt(2.0 * cfg.fitness_noise.amplitude * cfg.dt);
  const double price_sigma =
      std::sqrt(2.0 * cfg.price_noise.amplitude * cfg.dt);

  state.mean_price = state.recompute_mean_price();
  rec.snapshots.push_back(take_snapshot(state, params.epsilon, params.alpha_mean));

  for (std::size_t step = 1; step <= n_steps; ++step) {
    // Reduction phase: aggregates feeding every per-product update.
    state.mean_price = state.recompute_mean_price();
    step_consumers(state, params, cfg.dt);

    double max_gap = 0.0;
    for (auto& p : state.products) {
      if (!p.alive) continue;
      step_inventory(p, cfg.dt);
      if (cfg.fitness_mode == FitnessMode::decomposed) {
        p.fitness = product_fitness(p, state.consumer_density);
      } else {
        p.fitness = cfg.enable_fitness_fluctuations
                        ? fitness_sigma * fitness_rng.normal() / cfg.dt
                        : 0.0;
      }
    }
    const double fbar = mean_fitness(state.products);
    for (const auto& p : state.products)
      if (p.alive) max_gap = std::max(max_gap, std::fabs(p.fitness - fbar));
    if (max_gap > 0.0 && cfg.dt > 0.1 / max_gap)
      throw consistency_error(
          "micro step " + std::to_string(step) +
          ": dt exceeds stability bound 0.1/max|f - <f>| = " +
          std::to_string(0.1 / max_gap));

    replicator_step(state.products, cfg.dt);

    if (cfg.enable_price_fluctuations) {
      // Deviations live on the short scale around a mean price that only
      // moves on the long scale; recentering keeps the sales-weighted mean
      // from random-walking with the finite ensemble.
      double dev_mean = 0.0, weight = 0.0;
      for (auto& p : state.products) {
        if (!p.alive) continue;
        const double dev = p.price - state.mean_price;
        const double next =
            price_fluctuation_step(dev, price_sigma * price_rng.normal(), cfg, cfg.dt);
        p.price = state.mean_price + next;
        dev_mean += p.sales * next;
        weight += p.sales;
      }
      if (weight > 0.0) {
        dev_mean /= weight;
        for (auto& p : state.products)
          if (p.alive) p.price -= dev_mean;
      }
    }

    for (const auto& p : state.products)
      if (p.alive) detail::check_finite(p, step);

    ++state.tau;
    if (step % cfg.record_every == 0 || step == n_steps) {
      cull_dead_products(state, cfg.y_floor);
      rec.snapshots.push_back(
          take_snapshot(state, params.epsilon, params.alpha_mean));
    }
  }
  return rec;
}

}  // namespace evomarket
