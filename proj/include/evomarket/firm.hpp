#pragma once

// Firm-level growth: product aggregation, cash-cow selection, preferential
// attachment of new products, and the reduced Langevin ensemble whose
// stationary size distribution carries the Pareto tail.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "evomarket/common.hpp"
#include "evomarket/market.hpp"

namespace evomarket {

enum class AttachmentMode { event_based, sde_reduced };

struct AttachmentConfig {
  double rate = 0.02;                  // A, 1/time
  double new_product_size_frac = 0.1;  // sales fraction given to a new product
  double noise_amplitude = 0.02;       // D, multiplicative noise amplitude
  AttachmentMode mode = AttachmentMode::event_based;

  void validate() const {
    if (rate < 0.0) throw domain_error("AttachmentConfig: rate must be >= 0");
    if (new_product_size_frac <= 0.0 || new_product_size_frac >= 1.0)
      throw domain_error("AttachmentConfig: new_product_size_frac must be in (0,1)");
    if (noise_amplitude < 0.0)
      throw domain_error("AttachmentConfig: noise_amplitude must be >= 0");
  }
};

// Max-sales product of a firm; ties broken by smallest id.
inline ProductId select_cash_cow(const FirmState& firm,
                                 const std::vector<ProductState>& products) {
  if (firm.product_ids.empty())
    throw domain_error("select_cash_cow: firm owns no products");
  std::optional<ProductId> best;
  double best_sales = -1.0;
  for (ProductId pid : firm.product_ids) {  // set iterates in ascending id order
    const auto it = std::find_if(products.begin(), products.end(),
                                 [&](const ProductState& p) { return p.id == pid; });
    if (it == products.end())
      throw consistency_error("select_cash_cow: dangling product id");
    if (it->sales > best_sales) {
      best_sales = it->sales;
      best = pid;
    }
  }
  return *best;
}

// Event-based preferential attachment. A new product carrying
// new_product_size_frac * x of NEW demand is created with probability
// min(A*x*dt / frac, 1) per step, so the expected sales increment per unit
// time is A*x. Returns the new product, if any.
inline std::optional<ProductState> attachment_step(FirmState& firm,
                                                   const AttachmentConfig& cfg,
                                                   double dt, Rng& rng,
                                                   ProductId next_id,
                                                   double mean_price,
                                                   double mean_preference) {
  cfg.validate();
  if (firm.sales < 0.0) throw domain_error("attachment_step: negative firm sales");
  const double p_attach =
      std::min(cfg.rate * firm.sales * dt / cfg.new_product_size_frac, 1.0);
  if (p_attach <= 0.0 || rng.uniform() >= p_attach) return std::nullopt;

  ProductState prod;
  prod.id = next_id;
  prod.sales = cfg.new_product_size_frac * firm.sales;
  prod.supply = prod.sales;
  prod.inventory = prod.sales;
  prod.price = mean_price;
  prod.preference = mean_preference;
  firm.product_ids.insert(prod.id);
  firm.sales += prod.sales;
  return prod;
}

// One Euler-Maruyama step of the cash-cow-reduced firm dynamics,
// dx/dtau = A*x + x*rho. noise must have variance 2*D*dt.
inline double sde_reduced_step(double x, const AttachmentConfig& cfg, double dt,
                               double noise) {
  if (x <= 0.0) throw domain_error("sde_reduced_step: x must be > 0");
  return x + cfg.rate * x * dt + x * noise;
}

// Predicted stationary pdf tail exponent, 1 + A/D.
inline double stationary_tail_exponent(double attachment_rate,
                                       double noise_amplitude) {
  if (noise_amplitude <= 0.0)
    throw domain_error("stationary_tail_exponent: D must be > 0");
  if (attachment_rate < 0.0)
    throw domain_error("stationary_tail_exponent: A must be >= 0");
  return 1.0 + attachment_rate / noise_amplitude;
}

// Two-sample Kolmogorov-Smirnov statistic; used as the stationarity
// criterion between ensemble checkpoints.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw insufficient_data_error("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    // Advance through whole tie groups so the CDFs are only compared at
    // points between distinct values (re-injection creates atoms).
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    const double fa = static_cast<double>(i) / static_cast<double>(a.size());
    const double fb = static_cast<double>(j) / static_cast<double>(b.size());
    d = std::max(d, std::fabs(fa - fb));
  }
  return d;
}

struct ParetoEnsembleResult {
  std::vector<double> sizes;      // stationary cross-section
  double ks_drift = 1.0;          // KS between the last two checkpoints
  std::size_t steps_run = 0;
  bool stationary = false;
};

// Stationary ensemble for the reduced firm-size Langevin dynamics. Sizes
// are integrated in the log domain relative to the ensemble growth trend,
// where the attachment rate acts as a linear slope of strength A toward
// the lower boundary; firms crossing the floor are re-injected at the
// current ensemble 1st-percentile size. The stationary density above the
// boundary is a power law with pdf exponent 1 + A/D. The run stops once
// the KS distance between consecutive checkpoints falls below ks_tol.
inline ParetoEnsembleResult run_pareto_ensemble(
    double attachment_rate, double noise_amplitude, std::size_t n_firms,
    std::uint64_t seed, double dt = 0.01, std::size_t max_steps = 400000,
    std::size_t checkpoint_every = 20000, double ks_tol = 0.01,
    double floor = 1.0) {
  if (noise_amplitude <= 0.0)
    throw domain_error("run_pareto_ensemble: D must be > 0");
  Rng rng(seed);
  const double sigma = std::sqrt(2.0 * noise_amplitude * dt);
  const double drift = -attachment_rate * dt;
  const double log_floor = std::log(floor);
  const double tail_rate = attachment_rate / noise_amplitude;

  // Warm start at the asymptotic stationary shape (exponential log-sizes
  // with rate A/D above the floor); the KS checkpoints then confirm the
  // boundary layer has settled.
  std::vector<double> h(n_firms);
  for (auto& hi : h)
    hi = log_floor + (tail_rate > 0.0 ? rng.exponential() / tail_rate
                                      : rng.exponential());

  // Re-injection level: the ensemble 1st percentile, refreshed on a slow
  // cadence (the stationary shape changes little between refreshes).
  std::vector<double> scratch(n_firms);
  double reinject = log_floor;
  const std::size_t refresh_every = 64;
  auto refresh_reinject = [&] {
    scratch = h;
    const auto k = scratch.begin() +
                   static_cast<std::ptrdiff_t>(0.01 * static_cast<double>(n_firms));
    std::nth_element(scratch.begin(), k, scratch.end());
    reinject = std::max(*k, log_floor);
  };
  refresh_reinject();

  ParetoEnsembleResult result;
  std::vector<double> prev_checkpoint;
  for (std::size_t step = 1; step <= max_steps; ++step) {
    for (auto& hi : h) {
      hi += drift + sigma * rng.normal();
      if (hi < log_floor) hi = reinject;
    }
    if (step % refresh_every == 0) refresh_reinject();

    if (step % checkpoint_every == 0) {
      std::vector<double> sizes(n_firms);
      for (std::size_t i = 0; i < n_firms; ++i) sizes[i] = std::exp(h[i]);
      if (!prev_checkpoint.empty()) {
        result.ks_drift = ks_two_sample(prev_checkpoint, sizes);
        if (result.ks_drift < ks_tol) {
          result.sizes = std::move(sizes);
          result.steps_run = step;
          result.stationary = true;
          return result;
        }
      }
      prev_checkpoint = std::move(sizes);
    }
  }
  result.sizes.resize(n_firms);
  for (std::size_t i = 0; i < n_firms; ++i) result.sizes[i] = std::exp(h[i]);
  result.steps_run = max_steps;
  return result;
}

}  // namespace evomarket
