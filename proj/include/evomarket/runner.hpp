#pragma once

// Analysis pipelines over the engine layers, plus run output (CSV tables,
// fit reports, JSON manifest keyed by the scenario hash) and verification
// of previously written run directories.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "evomarket/firm.hpp"
#include "evomarket/macro.hpp"
#include "evomarket/micro.hpp"
#include "evomarket/noise.hpp"
#include "evomarket/scenario.hpp"
#include "evomarket/stats.hpp"

namespace evomarket {

struct Table {
  std::string name;
  std::vector<std::string> columns;  // names carry units in parentheses
  std::vector<std::vector<double>> rows;
};

struct LabeledFit {
  std::string analysis;
  std::string label;
  FitResult fit;
};

struct AnalysisOutput {
  std::vector<Table> tables;
  std::vector<LabeledFit> fits;
  std::map<std::string, double> summary;
};

namespace detail {

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3)
    throw insufficient_data_error("pearson: need matched series, n >= 3");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw insufficient_data_error("pearson: constant series");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

// Three-parameter exponential decline y = A e^{-rate t} + asymptote, fitted
// by scanning the asymptote and log-linear regression of the remainder.
struct ExpDeclineFit {
  double amplitude = 0.0;
  double rate = 0.0;
  double asymptote = 0.0;
  double r_squared = 0.0;
};

inline ExpDeclineFit fit_exponential_decline(std::span<const double> t,
                                             std::span<const double> y) {
  if (t.size() != y.size() || t.size() < 8)
    throw insufficient_data_error("fit_exponential_decline: need n >= 8");
  const double y_min = *std::min_element(y.begin(), y.end());
  const double y_max = *std::max_element(y.begin(), y.end());
  if (y_max <= y_min)
    throw insufficient_data_error("fit_exponential_decline: constant series");
  const double span = y_max - y_min;

  auto eval = [&](double c) {
    std::vector<double> lt, ly;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] - c <= 0.0) continue;
      lt.push_back(t[i]);
      ly.push_back(std::log(y[i] - c));
    }
    ExpDeclineFit f;
    if (lt.size() < 4) return f;  // r_squared stays 0
    const auto lin = linear_regression(lt, ly);
    f.amplitude = std::exp(lin.intercept);
    f.rate = -lin.slope;
    f.asymptote = c;
    // R^2 in the original (not log) coordinates.
    const double ym = mean(y);
    double sse = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double pred = f.amplitude * std::exp(-f.rate * t[i]) + c;
      sse += (y[i] - pred) * (y[i] - pred);
      syy += (y[i] - ym) * (y[i] - ym);
    }
    f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 0.0;
    return f;
  };

  ExpDeclineFit best;
  double c_best = y_min - span;
  for (int i = 0; i <= 200; ++i) {
    const double c = y_min - span + static_cast<double>(i) / 200.0 *
                                        (span - 1e-9 * span);
    const auto f = eval(c);
    if (f.r_squared > best.r_squared) {
      best = f;
      c_best = c;
    }
  }
  // Golden refinement around the grid optimum.
  double a = c_best - span / 200.0, b = c_best + span / 200.0;
  b = std::min(b, y_min - 1e-12 * span);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = eval(x1).r_squared, f2 = eval(x2).r_squared;
  for (int it = 0; it < 60; ++it) {
    if (f1 > f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = eval(x1).r_squared;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = eval(x2).r_squared;
    }
  }
  const auto refined = eval(f1 > f2 ? x1 : x2);
  return refined.r_squared > best.r_squared ? refined : best;
}

// --- pipelines ----------------------------------------------------------------

// Multiplicative growth under i.i.d. fitness noise: lognormal cross-section
// and linear growth of the log-sales variance.
inline void run_gibrat_analysis(const Scenario& s, std::uint64_t seed,
                                AnalysisOutput& out) {
  const auto& g = s.gibrat;
  MarketState st;
  st.products.resize(g.n_products);
  for (std::size_t i = 0; i < g.n_products; ++i) {
    auto& p = st.products[i];
    p.id = i;
    p.sales = g.initial_sales;
    p.supply = g.initial_sales;
    p.inventory = 1.0;
    p.price = s.market.natural_price;
  }
  st.consumer_density = 1.0;

  MicroConfig cfg = s.micro;
  cfg.fitness_mode = FitnessMode::direct;
  cfg.enable_price_fluctuations = false;
  cfg.record_every = std::max<std::size_t>(1, g.n_steps / 20);

  const RunRecord rec = run_micro(st, cfg, s.market, g.n_steps, seed);

  Table var_tab;
  var_tab.name = "gibrat_variance";
  var_tab.columns = {"tau (short-time steps)",
                     "log_sales_variance (dimensionless)"};
  std::vector<double> taus, vars;
  for (const auto& snap : rec.snapshots) {
    std::vector<double> logs;
    logs.reserve(snap.products.size());
    for (const auto& p : snap.products)
      if (p.sales > 0.0) logs.push_back(std::log(p.sales));
    const double v = variance(logs);
    var_tab.rows.push_back({static_cast<double>(snap.tau), v});
    taus.push_back(static_cast<double>(snap.tau));
    vars.push_back(v);
  }
  out.tables.push_back(std::move(var_tab));

  // Linear variance growth over the second half of the run.
  std::vector<double> t2, v2;
  for (std::size_t i = 0; i < taus.size(); ++i)
    if (taus[i] >= 0.5 * taus.back()) {
      t2.push_back(taus[i]);
      v2.push_back(vars[i]);
    }
  const auto lin = linear_regression(t2, v2);
  out.summary["gibrat_variance_slope"] = lin.slope;
  out.summary["gibrat_variance_r_squared"] = lin.r_squared;

  std::vector<double> final_sales;
  for (const auto& p : rec.snapshots.back().products)
    if (p.sales > 0.0) final_sales.push_back(p.sales);
  const auto fit = fit_lognormal(final_sales);
  out.summary["gibrat_ks_pvalue"] = fit.ks_pvalue;
  out.fits.push_back({"gibrat", "final_sales", fit});
}

// Stationary firm-size ensembles for each requested A/D ratio.
inline void run_pareto_analysis(const Scenario& s, std::uint64_t seed,
                                AnalysisOutput& out) {
  const auto& cfg = s.pareto;
  Table tab;
  tab.name = "pareto_tail";
  tab.columns = {"ratio_A_over_D (dimensionless)",
                 "target_pdf_exponent (dimensionless)",
                 "hill_pdf_exponent (dimensionless)",
                 "hill_stderr (dimensionless)",
                 "ks_drift (dimensionless)",
                 "stationary (bool)",
                 "steps_run (count)"};
  Rng seq(seed);
  for (double ratio : cfg.ratios) {
    const double a_rate = ratio * cfg.noise_amplitude;
    const std::uint64_t run_seed = seq.next_u64();
    const auto checkpoint =
        std::max<std::size_t>(1, static_cast<std::size_t>(200.0 / cfg.dt));
    const auto ens = run_pareto_ensemble(a_rate, cfg.noise_amplitude,
                                         cfg.n_firms, run_seed, cfg.dt,
                                         60 * checkpoint, checkpoint);
    const auto fit = fit_pareto_tail(ens.sizes, cfg.tail_frac);
    tab.rows.push_back({ratio, stationary_tail_exponent(a_rate, cfg.noise_amplitude),
                        fit.params.at("pdf_exponent"),
                        fit.stderrs.at("pdf_exponent"), ens.ks_drift,
                        ens.stationary ? 1.0 : 0.0,
                        static_cast<double>(ens.steps_run)});
    std::ostringstream label;
    label << "A_over_D=" << ratio;
    out.fits.push_back({"pareto_tail", label.str(), fit});
  }
  out.tables.push_back(std::move(tab));
}

// Stationary sample of the sign-restoring price-deviation chain.
inline std::vector<double> sample_price_deviations(const Scenario& s,
                                                   std::uint64_t seed) {
  const auto& cfg = s.laplace_price;
  Rng rng(seed);
  const double dt = s.micro.dt;
  const double sigma = std::sqrt(2.0 * s.micro.price_noise.amplitude * dt);
  double dev = 0.0;
  for (std::size_t i = 0; i < cfg.burn_in; ++i)
    dev = price_fluctuation_step(dev, sigma * rng.normal(), s.micro, dt);
  std::vector<double> samples;
  samples.reserve(cfg.n_samples);
  while (samples.size() < cfg.n_samples) {
    for (std::size_t k = 0; k < cfg.thin; ++k)
      dev = price_fluctuation_step(dev, sigma * rng.normal(), s.micro, dt);
    samples.push_back(dev);
  }
  return samples;
}

inline void run_laplace_price_analysis(const Scenario& s, std::uint64_t seed,
                                       AnalysisOutput& out) {
  const auto samples = sample_price_deviations(s, seed);
  const auto lap = fit_laplace(samples);
  out.fits.push_back({"laplace_price", "price_deviation", lap});
  out.summary["laplace_loglik"] = lap.loglik;
  out.summary["gaussian_loglik"] = gaussian_loglik(samples);
  out.summary["excess_kurtosis"] = excess_kurtosis(samples);

  auto sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  Table tab;
  tab.name = "laplace_price_quantiles";
  tab.columns = {"quantile (probability)", "price_deviation (real price)"};
  for (double q : {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99})
    tab.rows.push_back({q, quantile_sorted(sorted, q)});
  out.tables.push_back(std::move(tab));
}

// Size-variance scaling: growth-rate dispersion against unit size.
inline void run_size_variance_analysis(const Scenario& s, std::uint64_t seed,
                                       AnalysisOutput& out) {
  const auto& cfg = s.size_variance;
  if (cfg.size_min <= 0.0 || cfg.size_max <= cfg.size_min)
    throw domain_error("size_variance: need 0 < size_min < size_max");
  Rng rng(seed);
  std::vector<double> sizes(cfg.n_products);
  const double log_lo = std::log(cfg.size_min), log_hi = std::log(cfg.size_max);
  for (auto& y : sizes) y = std::exp(log_lo + (log_hi - log_lo) * rng.uniform());

  std::vector<std::vector<double>> series(cfg.n_products);
  if (cfg.mode == SizeVarianceMode::direct) {
    // Conditional Laplace growth rates with scale y^-beta.
    for (std::size_t i = 0; i < cfg.n_products; ++i) {
      const double scale = std::pow(sizes[i], -cfg.beta);
      series[i].resize(cfg.window);
      for (auto& r : series[i]) r = rng.laplace(scale);
    }
  } else {
    // A unit of size y aggregates n ~ y elementary activities with
    // long-range temporal correlation; the mean of n correlated values has
    // std ~ n^{-nu/2}.
    for (std::size_t i = 0; i < cfg.n_products; ++i) {
      const auto n_agg = static_cast<std::size_t>(
          std::max(1.0, std::llround(sizes[i]) * 1.0));
      NoiseSpec spec;
      spec.kind = NoiseKind::correlated;
      spec.amplitude = 0.5;
      spec.corr_exponent = cfg.nu;
      spec.seed = rng.next_u64();
      spec.length = cfg.window * n_agg;
      spec.dt = 1.0;
      const auto stream = generate_correlated(spec);
      series[i].resize(cfg.window);
      for (std::size_t w = 0; w < cfg.window; ++w) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n_agg; ++k) acc += stream[w * n_agg + k];
        series[i][w] = acc / static_cast<double>(n_agg);
      }
    }
  }

  const auto res = size_variance_regression(sizes, series);
  out.summary["size_variance_beta_hat"] = res.beta_hat;
  out.summary["size_variance_beta_stderr"] = res.beta_stderr;
  out.summary["size_variance_r_squared"] = res.r_squared;
  out.summary["size_variance_target_beta"] =
      cfg.mode == SizeVarianceMode::direct ? cfg.beta : 0.5 * cfg.nu;

  Table tab;
  tab.name = "size_variance_bins";
  tab.columns = {"bin_mean_size (sales units)",
                 "bin_growth_std (dimensionless)", "bin_count (count)"};
  for (std::size_t b = 0; b < res.bin_mean_size.size(); ++b)
    tab.rows.push_back({res.bin_mean_size[b], res.bin_std[b],
                        static_cast<double>(res.bin_count[b])});
  out.tables.push_back(std::move(tab));
}

// Closed-form product life cycle on the long scale, with replacement
// echoes, learning curve, and firm-count tracking.
inline void run_lifecycle_analysis(const Scenario& s, std::uint64_t /*seed*/,
                                   AnalysisOutput& out) {
  const auto& lc = s.lifecycle;
  const std::size_t n = s.macro_grid;
  const double horizon = s.macro_horizon;

  Table tab;
  tab.name = "lifecycle_timeseries";
  tab.columns = {"t (long-time units)",
                 "mean_price (real price)",
                 "adopters (fraction of potential)",
                 "sales_first (units/time)",
                 "sales_multiple (units/time)",
                 "sales_replacement (units/time)",
                 "sales_total (units/time)",
                 "revenue (currency/time)",
                 "unit_cost (real price)",
                 "profit (currency/time)",
                 "cumulative_output (units)",
                 "firm_count (count)"};

  std::vector<double> ts(n + 1), mus(n + 1), totals(n + 1), revenue(n + 1),
      costs(n + 1), cum(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = horizon * static_cast<double>(i) / static_cast<double>(n);
    ts[i] = t;
    mus[i] = mean_price(t, lc);
    totals[i] = total_sales(t, lc).total();
    revenue[i] = mus[i] * totals[i] * s.market.market_potential;
    costs[i] = learning_curve(t, s.market.alpha_mean, lc);
    cum[i] = i == 0 ? 0.0
                    : cum[i - 1] + 0.5 * (totals[i] + totals[i - 1]) *
                                       (ts[i] - ts[i - 1]) *
                                       s.market.market_potential;
  }
  const auto firms = market_size(ts, revenue, s.market_size);

  for (std::size_t i = 0; i <= n; ++i) {
    const auto dec = total_sales(ts[i], lc);
    tab.rows.push_back({ts[i], mus[i], gompertz_adopters(ts[i], lc),
                        dec.first_purchase, dec.multiple_purchase,
                        dec.replacement, dec.total(), revenue[i], costs[i],
                        (1.0 - s.market.alpha_mean) * revenue[i], cum[i],
                        firms[i]});
  }
  out.tables.push_back(std::move(tab));

  // Learning curve over the middle two quartiles of cumulative output.
  const auto hend = henderson_fit(cum, costs);
  out.summary["henderson_exponent"] = hend.exponent;
  out.summary["henderson_r_squared"] = hend.r_squared;

  // Sales peaks: first local maximum and the echo that follows it.
  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 <= n; ++i)
    if (totals[i] > totals[i - 1] && totals[i] >= totals[i + 1])
      peaks.push_back(i);
  if (!peaks.empty()) {
    out.summary["t_peak1"] = ts[peaks[0]];
    if (peaks.size() > 1) out.summary["t_peak2"] = ts[peaks[1]];
    out.summary["grid_step"] = horizon / static_cast<double>(n);

    // Early phase: firm count tracks revenue.
    std::vector<double> nf_early(firms.begin(), firms.begin() + peaks[0] + 1);
    std::vector<double> rev_early(revenue.begin(), revenue.begin() + peaks[0] + 1);
    if (nf_early.size() >= 3)
      out.summary["firm_revenue_corr_early"] =
          detail::pearson(nf_early, rev_early);
  }
  // Late phase: relative firm-count change over the last product lifetime.
  const double t_last = horizon - lc.product_lifetime;
  if (t_last > 0.0) {
    const auto idx = static_cast<std::size_t>(t_last / horizon *
                                              static_cast<double>(n));
    const double base = std::fabs(firms[idx]) > 0.0 ? firms[idx] : 1.0;
    out.summary["firm_count_late_change"] =
        std::fabs(firms[n] - firms[idx]) / std::fabs(base);
  }

  // Price decline against its own exponential form (diagnostic; exact by
  // construction, so R^2 ~ 1 and the asymptote recovers the natural price).
  const auto exp_fit = fit_exponential_decline(ts, mus);
  out.summary["price_decline_rate_fit"] = exp_fit.rate;
  out.summary["price_asymptote_fit"] = exp_fit.asymptote;
  out.summary["price_fit_r_squared"] = exp_fit.r_squared;
}

// Profit/revenue ratio across a heterogeneous product population.
inline void run_profit_invariant_analysis(const Scenario& s, std::uint64_t seed,
                                          AnalysisOutput& out) {
  const auto& cfg = s.profit;
  Rng rng(seed);
  const double horizon = s.macro_horizon;

  struct Prod {
    double scale, center, width, price_factor, alpha;
  };
  std::vector<Prod> prods(cfg.n_products);
  for (auto& p : prods) {
    p.scale = std::exp(0.5 * rng.normal());
    p.center = horizon * rng.uniform();
    p.width = 0.1 * horizon * (0.5 + rng.uniform());
    p.price_factor = 1.0 + 0.2 * (rng.uniform() - 0.5);
    p.alpha = s.market.alpha_mean + cfg.alpha_jitter * (2.0 * rng.uniform() - 1.0);
    p.alpha = std::clamp(p.alpha, 1e-6, 1.0);
  }

  Table tab;
  tab.name = "profit_invariant_timeseries";
  tab.columns = {"t (long-time units)", "revenue (currency/time)",
                 "cost (currency/time)", "profit (currency/time)",
                 "profit_over_revenue (dimensionless)"};
  std::vector<double> ratios;
  for (std::size_t i = 0; i < cfg.n_times; ++i) {
    const double t =
        horizon * static_cast<double>(i) / static_cast<double>(cfg.n_times - 1);
    std::vector<double> sales(prods.size()), prices(prods.size()),
        alphas(prods.size());
    for (std::size_t k = 0; k < prods.size(); ++k) {
      const auto& p = prods[k];
      const double u = (t - p.center) / p.width;
      sales[k] = p.scale * std::exp(-0.5 * u * u) + 1e-9;
      prices[k] = mean_price(t, s.lifecycle) * p.price_factor;
      alphas[k] = p.alpha;
    }
    double rev = 0.0, cost = 0.0;
    for (std::size_t k = 0; k < prods.size(); ++k) {
      rev += prices[k] * sales[k];
      cost += alphas[k] * prices[k] * sales[k];
    }
    const double ratio = profit_invariant(sales, prices, alphas);
    ratios.push_back(ratio);
    tab.rows.push_back({t, rev, cost, rev - cost, ratio});
  }
  out.tables.push_back(std::move(tab));

  out.summary["profit_ratio_mean"] = mean(ratios);
  out.summary["profit_ratio_std"] = stdev(ratios);
  double max_dev = 0.0;
  for (double r : ratios)
    max_dev = std::max(max_dev, std::fabs(r - (1.0 - s.market.alpha_mean)));
  out.summary["profit_ratio_max_dev"] = max_dev;
}

// Growth rates pooled over a Zipf-distributed size ensemble with
// size-dependent Laplace dispersion; compares the truncated singular
// mixture form against the exponential-power family.
inline void run_growth_mixture_analysis(const Scenario& s, std::uint64_t seed,
                                        AnalysisOutput& out) {
  const auto& cfg = s.growth_mixture;
  Rng rng(seed);
  std::vector<double> samples;
  samples.reserve(cfg.n_samples);
  const double log_span = cfg.tail_decades * std::log(10.0);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    const double y = cfg.y_m * std::exp(log_span * rng.uniform());
    samples.push_back(rng.laplace(std::pow(y, -cfg.beta)));
  }

  std::vector<double> kept;
  for (double x : samples)
    if (std::fabs(x) >= cfg.r_min) kept.push_back(x);

  // Subbotin is fitted on the full sample (its natural support); the model
  // comparison below restricts both densities to |x| >= r_min.
  const auto f72 = fit_singular_mixture(samples, cfg.r_min);
  const auto fsub = fit_subbotin(samples);
  out.fits.push_back({"growth_mixture", "singular_mixture", f72});
  out.fits.push_back({"growth_mixture", "subbotin", fsub});

  // Truncation-corrected Subbotin log-likelihood on the same support.
  const double m0 = fsub.params.at("location");
  const double a0 = fsub.params.at("scale");
  const double b0 = fsub.params.at("shape");
  const double inner = subbotin_cdf(cfg.r_min, m0, a0, b0) -
                       subbotin_cdf(-cfg.r_min, m0, a0, b0);
  double ll_sub = 0.0;
  for (double x : kept) ll_sub += subbotin_logpdf(x, m0, a0, b0);
  ll_sub -= static_cast<double>(kept.size()) * std::log(1.0 - inner);

  out.summary["mixture_loglik"] = f72.loglik;
  out.summary["subbotin_truncated_loglik"] = ll_sub;
  out.summary["loglik_gap_per_1000"] =
      std::fabs(f72.loglik - ll_sub) / static_cast<double>(kept.size()) * 1000.0;
  out.summary["subbotin_shape"] = b0;
}

// Generic short-scale market run with the decomposed fitness.
inline void run_micro_analysis(const Scenario& s, std::uint64_t seed,
                               AnalysisOutput& out) {
  Rng rng(seed);
  MarketState st;
  const std::size_t n_products = 50;
  // Start at the Walras point: total sales equal to the repurchase demand
  // at the natural price, so the consumer density begins in balance.
  const double d0 =
      demand_rate(s.market.natural_price, s.market.repurchase_rate, s.market);
  const double y0 = d0 / static_cast<double>(n_products);
  st.products.resize(n_products);
  for (std::size_t i = 0; i < n_products; ++i) {
    auto& p = st.products[i];
    p.id = i;
    p.sales = y0;
    p.supply = y0;
    p.inventory = 1.0;
    p.price = s.market.natural_price * (1.0 + 0.1 * (rng.uniform() - 0.5));
    p.preference = 1.0;
    p.reproduction = 0.05;
  }
  st.consumer_density = 1.0;

  MicroConfig cfg = s.micro;
  cfg.fitness_mode = FitnessMode::decomposed;
  // Stationary price-deviation scale D/Phi capped at 5% of the natural
  // price so fluctuations stay small against the price level.
  cfg.price_noise.amplitude =
      std::min(cfg.price_noise.amplitude,
               0.05 * s.market.natural_price * cfg.restoring_strength);
  const RunRecord rec = run_micro(st, cfg, s.market, s.horizon, seed);

  Table tab;
  tab.name = "micro_timeseries";
  tab.columns = {"tau (short-time steps)", "t (long-time units)",
                 "total_sales (units/time)", "total_supply (units/time)",
                 "mean_price (real price)", "consumer_density (agents)",
                 "n_products (count)", "revenue (currency/time)",
                 "profit (currency/time)"};
  for (const auto& snap : rec.snapshots)
    tab.rows.push_back({static_cast<double>(snap.tau), snap.time,
                        snap.total_sales, snap.total_supply, snap.mean_price,
                        snap.consumer_density,
                        static_cast<double>(snap.n_products), snap.revenue,
                        snap.profit});
  out.tables.push_back(std::move(tab));
  out.summary["final_total_sales"] = rec.snapshots.back().total_sales;
  out.summary["final_mean_price"] = rec.snapshots.back().mean_price;
}

inline AnalysisOutput run_analyses(const Scenario& s, std::uint64_t seed) {
  AnalysisOutput out;
  for (const auto& a : s.outputs) {
    if (a == "gibrat")
      run_gibrat_analysis(s, seed, out);
    else if (a == "pareto_tail")
      run_pareto_analysis(s, seed, out);
    else if (a == "laplace_price")
      run_laplace_price_analysis(s, seed, out);
    else if (a == "size_variance")
      run_size_variance_analysis(s, seed, out);
    else if (a == "lifecycle")
      run_lifecycle_analysis(s, seed, out);
    else if (a == "profit_invariant")
      run_profit_invariant_analysis(s, seed, out);
    else if (a == "growth_mixture")
      run_growth_mixture_analysis(s, seed, out);
    else if (a == "micro")
      run_micro_analysis(s, seed, out);
    else
      throw scenario_error("unknown analysis '" + a + "'");
  }
  return out;
}

// --- multi-seed execution -------------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  AnalysisOutput output;
  double wall_seconds = 0.0;
};

// Fans seeds out over up to `threads` workers. Each seed's stream is
// independent, so a failure is recorded and does not abort its siblings.
inline std::vector<SeedRun> run_scenario(const Scenario& s, unsigned threads = 1) {
  if (threads == 0) threads = 1;
  std::vector<SeedRun> runs(s.seeds.size());
  auto worker = [&](std::size_t i) {
    SeedRun r;
    r.seed = s.seeds[i];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r.output = run_analyses(s, r.seed);
      r.ok = true;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    r.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    runs[i] = std::move(r);
  };
  std::size_t next = 0;
  while (next < runs.size()) {
    std::vector<std::future<void>> batch;
    for (unsigned k = 0; k < threads && next < runs.size(); ++k, ++next)
      batch.push_back(std::async(std::launch::async, worker, next));
    for (auto& f : batch) f.get();
  }
  return runs;
}

// --- output emission --------------------------------------------------------------

namespace detail {

inline std::string table_to_csv(const Table& t, const std::string& hash) {
  std::ostringstream os;
  os.precision(17);
  os << "# scenario_hash=" << hash << "\n";
  for (std::size_t c = 0; c < t.columns.size(); ++c)
    os << (c ? "," : "") << t.columns[c];
  os << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
    os << "\n";
  }
  return os.str();
}

inline std::string fits_to_csv(const std::vector<LabeledFit>& fits,
                               const std::string& hash) {
  std::ostringstream os;
  os.precision(17);
  os << "# scenario_hash=" << hash << "\n";
  os << "analysis (name),label (name),family (name),quantity (name),value "
        "(mixed units)\n";
  for (const auto& lf : fits) {
    const auto& f = lf.fit;
    auto row = [&](const std::string& q, double v) {
      os << lf.analysis << "," << lf.label << "," << to_string(f.family) << ","
         << q << "," << v << "\n";
    };
    for (const auto& [k, v] : f.params) row("param:" + k, v);
    for (const auto& [k, v] : f.stderrs) row("stderr:" + k, v);
    row("loglik", f.loglik);
    row("n", static_cast<double>(f.n));
    row("ks_stat", f.ks_stat);
    row("ks_pvalue", f.ks_pvalue);
    row("converged", f.converged ? 1.0 : 0.0);
    row("degenerate", f.degenerate ? 1.0 : 0.0);
    row("unstable", f.unstable ? 1.0 : 0.0);
  }
  return os.str();
}

inline std::string summary_to_csv(const std::map<std::string, double>& summary,
                                  const std::string& hash) {
  std::ostringstream os;
  os.precision(17);
  os << "# scenario_hash=" << hash << "\n";
  os << "key (name),value (mixed units)\n";
  for (const auto& [k, v] : summary) os << k << "," << v << "\n";
  return os.str();
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

}  // namespace detail

inline constexpr const char* kCodeVersion = "1.0.0";

// Writes seed-<n>/ table files and the top-level manifest.json; returns the
// manifest. Every output file embeds and is checksummed against the
// scenario hash.
inline json write_run(const Scenario& s, const std::vector<SeedRun>& runs,
                      const std::filesystem::path& out_dir) {
  const std::string hash = scenario_hash(s);
  std::filesystem::create_directories(out_dir);

  json manifest;
  manifest["name"] = s.name;
  manifest["code_version"] = kCodeVersion;
  manifest["scenario"] = scenario_to_json(s);
  manifest["scenario_hash"] = hash;
  manifest["seeds"] = s.seeds;
  manifest["results"] = json::array();

  for (const auto& run : runs) {
    json entry;
    entry["seed"] = run.seed;
    // Wall time is reported on the console, not in the manifest: reruns of
    // the same scenario must produce byte-identical files.
    entry["status"] = run.ok ? "ok" : "error";
    if (!run.ok) entry["error"] = run.error;
    entry["files"] = json::array();
    if (run.ok) {
      const auto seed_dir = out_dir / ("seed-" + std::to_string(run.seed));
      std::filesystem::create_directories(seed_dir);
      auto emit = [&](const std::string& fname, const std::string& content) {
        detail::write_text(seed_dir / fname, content);
        entry["files"].push_back(
            {{"path", "seed-" + std::to_string(run.seed) + "/" + fname},
             {"fnv64", fnv64_hex(content)}});
      };
      for (const auto& t : run.output.tables)
        emit(t.name + ".csv", detail::table_to_csv(t, hash));
      if (!run.output.fits.empty())
        emit("fits.csv", detail::fits_to_csv(run.output.fits, hash));
      if (!run.output.summary.empty())
        emit("summary.csv", detail::summary_to_csv(run.output.summary, hash));
    }
    manifest["results"].push_back(std::move(entry));
  }
  detail::write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

struct VerifyReport {
  bool ok = true;
  std::vector<std::string> mismatches;
};

// Re-derives the scenario hash from the manifest's embedded scenario and
// checks every listed file's embedded hash and content checksum.
inline VerifyReport verify_run(const std::filesystem::path& run_dir) {
  VerifyReport rep;
  auto fail = [&](const std::string& msg) {
    rep.ok = false;
    rep.mismatches.push_back(msg);
  };

  json manifest;
  try {
    manifest = json::parse(detail::read_text(run_dir / "manifest.json"));
  } catch (const std::exception& e) {
    fail(std::string("manifest.json unreadable: ") + e.what());
    return rep;
  }

  std::string recorded_hash;
  try {
    recorded_hash = manifest.at("scenario_hash").get<std::string>();
    const Scenario s = parse_scenario(manifest.at("scenario"), true);
    const std::string recomputed = scenario_hash(s);
    if (recomputed != recorded_hash)
      fail("scenario hash mismatch: manifest says " + recorded_hash +
           ", recomputed " + recomputed);
  } catch (const std::exception& e) {
    fail(std::string("scenario block invalid: ") + e.what());
    return rep;
  }

  for (const auto& result : manifest.value("results", json::array())) {
    for (const auto& file : result.value("files", json::array())) {
      const auto rel = file.at("path").get<std::string>();
      std::string content;
      try {
        content = detail::read_text(run_dir / rel);
      } catch (const std::exception&) {
        fail("missing file: " + rel);
        continue;
      }
      if (fnv64_hex(content) != file.at("fnv64").get<std::string>())
        fail("checksum mismatch: " + rel);
      const std::string expect_first = "# scenario_hash=" + recorded_hash;
      if (content.substr(0, expect_first.size()) != expect_first)
        fail("embedded scenario hash mismatch: " + rel);
    }
  }
  return rep;
}

}  // namespace evomarket
