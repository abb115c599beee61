#pragma once

// Domain types and the static (per-tick, closed-form) market relations:
// unit costs, capacity limit, income distribution, market volume and the
// equilibrium demand curve. All prices are real prices (nominal / mean
// income); nominal values exist only at the I/O boundary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "evomarket/common.hpp"

namespace evomarket {

using ProductId = std::uint64_t;
using FirmId = std::uint64_t;

struct MarketParams {
  double market_potential = 1.0e6;   // agents interested in the good, M
  double upper_share = 0.02;         // m_U, price-insensitive fraction
  double mean_income = 1.0;          // I, currency / year
  double natural_price = 0.025;      // mu_n, real price
  double demand_width = 0.05;        // Theta, real-price units
  double repurchase_rate = 0.1;      // q, 1 / short-time unit
  double epsilon = 0.02;             // short/long time-scale ratio
  double multiple_purchase_rate = 0.05;  // q_m, 1 / long-time unit
  double replacement_fraction = 0.8;     // chi
  double product_lifetime = 8.0;         // t_p, long-time units
  double alpha_mean = 0.8;               // <alpha>_N, cost/price ratio

  double lower_share() const { return 1.0 - upper_share; }

  void validate() const {
    if (upper_share < 0.0 || upper_share > 1.0)
      throw domain_error("upper_share out of [0,1]");
    if (demand_width <= 0.0) throw domain_error("demand_width must be > 0");
    if (mean_income <= 0.0) throw domain_error("mean_income must be > 0");
    if (natural_price < 0.0) throw domain_error("natural_price must be >= 0");
    if (epsilon <= 0.0 || epsilon >= 0.1)
      throw domain_error("epsilon must be in (0, 0.1)");
    if (alpha_mean <= 0.0 || alpha_mean > 1.0)
      throw domain_error("alpha_mean must be in (0,1]");
    if (replacement_fraction < 0.0 || replacement_fraction > 1.0)
      throw domain_error("replacement_fraction out of [0,1]");
    if (repurchase_rate < 0.0) throw domain_error("repurchase_rate must be >= 0");
    if (product_lifetime <= 0.0) throw domain_error("product_lifetime must be > 0");
    if (market_potential <= 0.0) throw domain_error("market_potential must be > 0");
  }
};

struct CostCoefficients {
  double c0 = 0.0;  // fixed cost per unit time
  double c1 = 0.0;  // linear variable cost per unit
  double c2 = 0.0;  // quadratic cost coefficient

  void validate() const {
    if (c0 < 0.0 || c1 < 0.0 || c2 < 0.0)
      throw domain_error("cost coefficients must be >= 0");
  }
};

struct ProductState {
  ProductId id = 0;
  double sales = 0.0;        // y, units / (time * market potential)
  double supply = 0.0;       // s, same units
  double inventory = 0.0;    // z, units / market potential
  double price = 0.0;        // mu, real price
  double preference = 1.0;   // eta, 1 / (density * time)
  double reproduction = 0.0; // gamma, excess-supply coefficient
  CostCoefficients costs;
  double fitness = 0.0;      // f, 1 / time, cached per tick
  bool alive = true;
};

struct FirmState {
  FirmId id = 0;
  std::set<ProductId> product_ids;
  double sales = 0.0;           // x = sum of owned products' y
  double attachment_rate = 0.0; // A, 1 / time
  std::optional<ProductId> cash_cow_id;
  bool active = true;
};

struct MarketState {
  std::vector<ProductState> products;
  std::vector<FirmState> firms;
  double consumer_density = 0.0;  // psi
  double mean_price = 0.0;        // sales-weighted <mu>
  std::uint64_t tau = 0;          // short-time counter

  double long_time(double epsilon) const {
    return epsilon * static_cast<double>(tau);
  }

  double total_sales() const {
    double y_t = 0.0;
    for (const auto& p : products)
      if (p.alive) y_t += p.sales;
    return y_t;
  }

  double total_inventory() const {
    double z_t = 0.0;
    for (const auto& p : products)
      if (p.alive) z_t += p.inventory;
    return z_t;
  }

  // Sales-weighted mean price over sold units.
  double recompute_mean_price() const {
    double num = 0.0, den = 0.0;
    for (const auto& p : products) {
      if (!p.alive) continue;
      num += p.sales * p.price;
      den += p.sales;
    }
    return den > 0.0 ? num / den : 0.0;
  }
};

// Costs per unit as a function of the supply flow: c0/s + c1 + c2*s.
inline double unit_cost(double supply, const CostCoefficients& c) {
  if (supply <= 0.0)
    throw domain_error("unit_cost: supply must be > 0");
  return c.c0 / supply + c.c1 + c.c2 * supply;
}

// Optimal output minimizing the unit cost, sqrt(c0/c2).
// Returns nullopt when c2 = 0 (no finite capacity limit).
inline std::optional<double> capacity_limit(const CostCoefficients& c) {
  if (c.c2 <= 0.0) return std::nullopt;
  return std::sqrt(c.c0 / c.c2);
}

// Boltzmann-Gibbs income density (1/I) exp(-h/I).
inline double income_pdf(double income, double mean_income) {
  if (income < 0.0) throw domain_error("income_pdf: income must be >= 0");
  if (mean_income <= 0.0) throw domain_error("income_pdf: mean income must be > 0");
  return std::exp(-income / mean_income) / mean_income;
}

// Inverse-CDF sample from the income distribution.
inline double sample_income(double mean_income, Rng& rng) {
  return mean_income * rng.exponential();
}

// Market volume density v(<mu>) in [m_U, 1]. Gaussian fall-off above the
// natural price, clamped to the full market potential below it.
inline double market_volume(double mean_price, const MarketParams& p) {
  if (mean_price < 0.0) throw domain_error("market_volume: price must be >= 0");
  const double excess = std::max(mean_price - p.natural_price, 0.0);
  const double theta2 = p.demand_width * p.demand_width;
  return p.lower_share() * std::exp(-excess * excess / (2.0 * theta2)) +
         p.upper_share;
}

// Short-scale (repurchase) demand rate, d = q * v(<mu>).
inline double demand_rate(double mean_price, double repurchase_rate,
                          const MarketParams& p) {
  if (repurchase_rate < 0.0)
    throw domain_error("demand_rate: repurchase rate must be >= 0");
  return repurchase_rate * market_volume(mean_price, p);
}

// Quadratic expansion of the demand curve near mu_n. Diagnostic only; the
// engines integrate the exact demand_rate.
inline double demand_rate_quadratic(double mean_price, double repurchase_rate,
                                    const MarketParams& p) {
  const double excess = std::max(mean_price - p.natural_price, 0.0);
  const double theta2 = p.demand_width * p.demand_width;
  return repurchase_rate * (1.0 - excess * excess / (2.0 * theta2));
}

// x_j = sum over owned products; throws on a dangling product id.
inline double aggregate_firm_sales(const FirmState& firm,
                                   const std::vector<ProductState>& products) {
  double x = 0.0;
  for (ProductId pid : firm.product_ids) {
    const auto it = std::find_if(products.begin(), products.end(),
                                 [&](const ProductState& p) { return p.id == pid; });
    if (it == products.end())
      throw consistency_error("aggregate_firm_sales: dangling product id " +
                              std::to_string(pid));
    x += it->sales;
  }
  return x;
}

}  // namespace evomarket
