#pragma once

// Long time scale t: mean-price decline, Gompertz diffusion, product life
// cycle with replacement echoes, learning curve, profit invariant, and the
// market-size (firm count) evolution.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "evomarket/common.hpp"
#include "evomarket/market.hpp"

namespace evomarket {

struct LifeCycleParams {
  double price_decline_rate = 0.25;  // a, 1/time; a = 0 (monopoly) is excluded
  double initial_price_offset = 0.1; // mu_0, offset above mu_n at t = 0
  double natural_price = 0.025;      // mu_n
  double gompertz_scale = 5.0;       // kappa
  double adopter_norm = 1.0;         // n_0
  double replacement_fraction = 0.8; // chi
  double product_lifetime = 8.0;     // t_p
  double multiple_purchase_rate = 0.05;  // q_m
  int max_echo_depth = 3;

  void validate() const {
    if (price_decline_rate <= 0.0)
      throw domain_error("LifeCycleParams: price decline rate must be > 0");
    if (gompertz_scale <= 0.0)
      throw domain_error("LifeCycleParams: gompertz scale must be > 0");
    if (product_lifetime <= 0.0)
      throw domain_error("LifeCycleParams: product lifetime must be > 0");
    if (replacement_fraction < 0.0 || replacement_fraction > 1.0)
      throw domain_error("LifeCycleParams: replacement fraction out of [0,1]");
    if (adopter_norm <= 0.0)
      throw domain_error("LifeCycleParams: adopter norm must be > 0");
    if (multiple_purchase_rate < 0.0)
      throw domain_error("LifeCycleParams: multiple purchase rate must be >= 0");
  }
};

// Helper for the width-consistent Gompertz scale, mu_0^2 / (2 Theta^2).
inline double gompertz_scale_from_width(double mu_0, double theta) {
  if (theta <= 0.0) throw domain_error("gompertz_scale_from_width: theta must be > 0");
  return mu_0 * mu_0 / (2.0 * theta * theta);
}

// <mu(t)> = mu_0 e^{-a t} + mu_n.
inline double mean_price(double t, const LifeCycleParams& p) {
  if (t < 0.0) throw domain_error("mean_price: t must be >= 0");
  return p.initial_price_offset * std::exp(-p.price_decline_rate * t) +
         p.natural_price;
}

// Adopter density n(t) = n_0 exp(-kappa e^{-2 a t}).
inline double gompertz_adopters(double t, const LifeCycleParams& p) {
  if (t < 0.0) throw domain_error("gompertz_adopters: t must be >= 0");
  return p.adopter_norm *
         std::exp(-p.gompertz_scale * std::exp(-2.0 * p.price_decline_rate * t));
}

// First purchase sales y_f(t) = 2 a kappa n(t) e^{-2 a t} = dn/dt.
inline double first_purchase_sales(double t, const LifeCycleParams& p) {
  if (t < 0.0) throw domain_error("first_purchase_sales: t must be >= 0");
  return 2.0 * p.price_decline_rate * p.gompertz_scale * gompertz_adopters(t, p) *
         std::exp(-2.0 * p.price_decline_rate * t);
}

struct SalesDecomposition {
  double first_purchase = 0.0;   // y_f
  double multiple_purchase = 0.0;  // q_m * v(t)
  double replacement = 0.0;      // y_R
  double total() const { return first_purchase + multiple_purchase + replacement; }
};

// y_t = y_f + q_m v + y_R with y_R(t) = chi * [y_f + y_R](t - t_p) applied
// iteratively up to max_echo_depth echoes.
inline SalesDecomposition total_sales(double t, const LifeCycleParams& p) {
  if (t < 0.0) throw domain_error("total_sales: t must be >= 0");
  SalesDecomposition d;
  d.first_purchase = first_purchase_sales(t, p);
  d.multiple_purchase = p.multiple_purchase_rate * gompertz_adopters(t, p);
  double weight = 1.0;
  for (int k = 1; k <= p.max_echo_depth; ++k) {
    const double lagged = t - static_cast<double>(k) * p.product_lifetime;
    if (lagged < 0.0) break;
    weight *= p.replacement_fraction;
    d.replacement += weight * first_purchase_sales(lagged, p);
  }
  return d;
}

// Mean unit cost <c(t)> = alpha_mean * <mu(t)>.
inline double learning_curve(double t, double alpha_mean,
                             const LifeCycleParams& p) {
  if (alpha_mean <= 0.0 || alpha_mean > 1.0)
    throw domain_error("learning_curve: alpha_mean must be in (0,1]");
  return alpha_mean * mean_price(t, p);
}

// Total profit over total revenue; equals 1 - alpha when costs follow the
// learning relation exactly.
inline double profit_invariant(std::span<const double> sales,
                               std::span<const double> prices,
                               std::span<const double> alphas) {
  if (sales.size() != prices.size() || sales.size() != alphas.size())
    throw domain_error("profit_invariant: size mismatch");
  double revenue = 0.0, cost = 0.0;
  for (std::size_t i = 0; i < sales.size(); ++i) {
    revenue += prices[i] * sales[i];
    cost += alphas[i] * prices[i] * sales[i];
  }
  if (revenue <= 0.0) throw domain_error("profit_invariant: zero revenue");
  return (revenue - cost) / revenue;
}

// Henderson power-law fit of costs (or prices) against cumulative output,
// restricted to the middle two quartiles of w. Returns the positive
// exponent beta_H of c ~ w^-beta_H.
struct HendersonFit {
  double exponent = 0.0;
  double r_squared = 0.0;
};

inline HendersonFit henderson_fit(std::span<const double> cumulative_output,
                                  std::span<const double> cost) {
  if (cumulative_output.size() != cost.size() || cost.size() < 8)
    throw insufficient_data_error("henderson_fit: need matched series, n >= 8");
  const double w_lo = cumulative_output.front() +
                      0.25 * (cumulative_output.back() - cumulative_output.front());
  const double w_hi = cumulative_output.front() +
                      0.75 * (cumulative_output.back() - cumulative_output.front());
  std::vector<double> lw, lc;
  for (std::size_t i = 0; i < cost.size(); ++i) {
    if (cumulative_output[i] < w_lo || cumulative_output[i] > w_hi) continue;
    if (cumulative_output[i] <= 0.0 || cost[i] <= 0.0) continue;
    lw.push_back(std::log(cumulative_output[i]));
    lc.push_back(std::log(cost[i]));
  }
  const auto fit = linear_regression(lw, lc);
  return {-fit.slope, fit.r_squared};
}

// --- Mean-price ODE (price variance coupled) -----------------------------

struct PriceDynamicsParams {
  double repurchase_rate = 0.1;       // q
  double excess_supply = 0.05;        // mean gamma; s_t = (1 + gamma) d
  double preference_mean = 1.0;       // <eta>
  double preference_mean_z = 1.0;     // <eta>_z
  double total_inventory = 1.0;       // z_t
  MarketParams market;
};

struct PriceTrajectory {
  std::vector<double> t;
  std::vector<double> mu;
  bool frozen = false;  // variance was zero; trajectory held constant
};

// d<mu>/dt with the demand/supply sign structure: decreasing while supply
// exceeds demand, increasing while demand exceeds supply. variance_fn and
// excess_supply_fn are evaluated per step; excess_supply_fn may be empty
// (constant excess_supply).
inline PriceTrajectory integrate_mean_price(
    double mu_start, double horizon, const PriceDynamicsParams& p,
    const std::function<double(double)>& variance_fn,
    std::size_t n_output = 400,
    const std::function<double(double)>& excess_supply_fn = {}) {
  if (horizon <= 0.0) throw domain_error("integrate_mean_price: horizon must be > 0");

  auto rhs = [&](double t, double mu) {
    const double var = variance_fn(t);
    if (var < 0.0) throw domain_error("integrate_mean_price: negative variance");
    const double gamma = excess_supply_fn ? excess_supply_fn(t) : p.excess_supply;
    const double d = demand_rate(mu, p.repurchase_rate, p.market);
    const double s_t = (1.0 + gamma) * d;
    const double excess = std::max(mu - p.market.natural_price, 0.0);
    const double theta2 = p.market.demand_width * p.market.demand_width;
    // |dd/dmu| from the exact demand curve; zero at and below mu_n.
    const double dd_dmu = p.repurchase_rate * p.market.lower_share() *
                          (excess / theta2) *
                          std::exp(-excess * excess / (2.0 * theta2));
    if (d <= 0.0 || p.total_inventory <= 0.0) return 0.0;
    return p.preference_mean * var /
           (d * p.preference_mean_z * p.total_inventory) * dd_dmu * (d - s_t);
  };

  PriceTrajectory traj;
  traj.t.reserve(n_output + 1);
  traj.mu.reserve(n_output + 1);
  if (variance_fn(0.0) == 0.0 && !excess_supply_fn) traj.frozen = true;

  // Adaptive RK45 (Cash-Karp), dense output on a uniform grid.
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 3.0 / 5, c5 = 1.0,
                          c6 = 7.0 / 8;
  static constexpr double b21 = 1.0 / 5;
  static constexpr double b31 = 3.0 / 40, b32 = 9.0 / 40;
  static constexpr double b41 = 3.0 / 10, b42 = -9.0 / 10, b43 = 6.0 / 5;
  static constexpr double b51 = -11.0 / 54, b52 = 5.0 / 2, b53 = -70.0 / 27,
                          b54 = 35.0 / 27;
  static constexpr double b61 = 1631.0 / 55296, b62 = 175.0 / 512,
                          b63 = 575.0 / 13824, b64 = 44275.0 / 110592,
                          b65 = 253.0 / 4096;
  static constexpr double w1 = 37.0 / 378, w3 = 250.0 / 621, w4 = 125.0 / 594,
                          w6 = 512.0 / 1771;
  static constexpr double e1 = 37.0 / 378 - 2825.0 / 27648,
                          e3 = 250.0 / 621 - 18575.0 / 48384,
                          e4 = 125.0 / 594 - 13525.0 / 55296,
                          e5 = -277.0 / 14336,
                          e6 = 512.0 / 1771 - 1.0 / 4;
  const double rel_tol = 1e-8;

  double t = 0.0, mu = mu_start;
  double h = horizon / static_cast<double>(n_output);
  for (std::size_t i = 0; i <= n_output; ++i) {
    const double t_target = horizon * static_cast<double>(i) / n_output;
    while (t < t_target) {
      double step = std::min(h, t_target - t);
      for (;;) {
        const double k1 = rhs(t, mu);
        const double k2 = rhs(t + c2 * step, mu + step * b21 * k1);
        const double k3 = rhs(t + c3 * step, mu + step * (b31 * k1 + b32 * k2));
        const double k4 =
            rhs(t + c4 * step, mu + step * (b41 * k1 + b42 * k2 + b43 * k3));
        const double k5 = rhs(t + c5 * step,
                              mu + step * (b51 * k1 + b52 * k2 + b53 * k3 + b54 * k4));
        const double k6 =
            rhs(t + c6 * step, mu + step * (b61 * k1 + b62 * k2 + b63 * k3 +
                                            b64 * k4 + b65 * k5));
        const double mu_next =
            mu + step * (w1 * k1 + w3 * k3 + w4 * k4 + w6 * k6);
        const double err = std::fabs(
            step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6));
        const double scale = rel_tol * std::max(std::fabs(mu), 1e-12);
        if (err <= scale || step <= 1e-12 * horizon) {
          t += step;
          mu = mu_next;
          if (err > 0.0)
            h = std::min(step * std::min(5.0, 0.9 * std::pow(scale / err, 0.2)),
                         horizon / 16.0);
          break;
        }
        step *= std::max(0.1, 0.9 * std::pow(scale / err, 0.25));
      }
    }
    traj.t.push_back(t_target);
    traj.mu.push_back(mu);
  }
  return traj;
}

// --- Market size ----------------------------------------------------------

struct MarketSizeParams {
  double revenue_coefficient = 1.8e-5;  // B, firms per currency/time
  double firm_count_offset = 0.0;       // N_f0
  double alpha_mean = 0.8;
  double mean_firm_cost = 1.0;          // <<C>>
  double regime_threshold = 0.1;        // |dR/dt|/R switch level, 1/t

  void validate() const {
    if (revenue_coefficient <= 0.0)
      throw domain_error("MarketSizeParams: B must be > 0");
    if (regime_threshold <= 0.0)
      throw domain_error("MarketSizeParams: regime threshold must be > 0");
  }
};

// Firm count from a revenue trajectory. Regime 1 (fast revenue change):
// N_f tracks B*R + offset. Regime 2 (slow revenue): N_f holds the value at
// the switch. The offset is re-based at each regime re-entry so the series
// stays continuous.
inline std::vector<double> market_size(std::span<const double> t,
                                       std::span<const double> revenue,
                                       const MarketSizeParams& msp) {
  msp.validate();
  if (t.size() != revenue.size() || t.size() < 3)
    throw domain_error("market_size: need matched series, n >= 3");
  for (double r : revenue)
    if (r < 0.0) throw domain_error("market_size: negative revenue");

  std::vector<double> n_f(t.size());
  double offset = msp.firm_count_offset;
  bool fast = true;
  n_f[0] = msp.revenue_coefficient * revenue[0] + offset;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double dt = t[i] - t[i - 1];
    const double r_mid = std::max(0.5 * (revenue[i] + revenue[i - 1]), 1e-300);
    const double rel_rate =
        std::fabs(revenue[i] - revenue[i - 1]) / (dt * r_mid);
    const bool fast_now = rel_rate > msp.regime_threshold;
    if (fast_now && !fast) {
      // Re-enter regime 1 continuously.
      offset = n_f[i - 1] - msp.revenue_coefficient * revenue[i - 1];
    }
    fast = fast_now;
    n_f[i] = fast ? msp.revenue_coefficient * revenue[i] + offset : n_f[i - 1];
  }
  return n_f;
}

}  // namespace evomarket
