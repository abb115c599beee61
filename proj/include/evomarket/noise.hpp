#pragma once

// Fluctuation sources for the fitness/price dynamics: seeded white
// Gaussian noise and long-range power-law-correlated Gaussian noise, plus
// an estimator that recovers the correlation exponent from a series.

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "evomarket/common.hpp"

namespace evomarket {

enum class NoiseKind { white, correlated };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::white;
  double amplitude = 0.5;      // D: variance scale per unit time
  double corr_exponent = 0.4;  // nu in (0,1), correlated only
  std::uint64_t seed = 1;
  std::size_t length = 0;
  double dt = 1.0;             // step size; per-step variance is 2*D*dt

  void validate() const {
    if (amplitude <= 0.0) throw domain_error("NoiseSpec: amplitude must be > 0");
    if (dt <= 0.0) throw domain_error("NoiseSpec: dt must be > 0");
    if (kind == NoiseKind::correlated &&
        (corr_exponent <= 0.0 || corr_exponent >= 1.0))
      throw domain_error("NoiseSpec: corr_exponent must be in (0,1)");
  }
};

namespace detail {

// In-place iterative radix-2 FFT. Inputs are padded to a power of two by
// the callers.
inline void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n < 2) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace detail

// I.i.d. Gaussian sequence, mean 0, variance 2*D*dt per step.
inline std::vector<double> generate_white(const NoiseSpec& spec) {
  spec.validate();
  if (spec.kind != NoiseKind::white)
    throw domain_error("generate_white: spec.kind must be white");
  Rng rng(spec.seed);
  const double sigma = std::sqrt(2.0 * spec.amplitude * spec.dt);
  std::vector<double> out(spec.length);
  for (auto& x : out) x = sigma * rng.normal();
  return out;
}

// Stationary Gaussian sequence with autocorrelation ~ lag^-nu, synthesized
// by Fourier filtering: a white spectrum is shaped by f^-(1-nu)/2, which
// corresponds to a lag^-nu decay of the autocorrelation. Twice the
// requested length is generated and half discarded to break the circular
// boundary of the transform. Standardized to unit variance, then scaled by
// sqrt(2*D*dt).
inline std::vector<double> generate_correlated(const NoiseSpec& spec) {
  spec.validate();
  if (spec.kind != NoiseKind::correlated)
    throw domain_error("generate_correlated: spec.kind must be correlated");
  if (spec.length == 0) return {};

  const std::size_t n = detail::next_pow2(2 * spec.length);
  Rng rng(spec.seed);

  const double half_exponent = (1.0 - spec.corr_exponent) / 2.0;
  std::vector<std::complex<double>> spectrum(n, {0.0, 0.0});
  for (std::size_t k = 1; k < n / 2; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(n);
    const double amp = std::pow(f, -half_exponent);
    const std::complex<double> g(rng.normal(), rng.normal());
    spectrum[k] = amp * g;
    spectrum[n - k] = std::conj(spectrum[k]);
  }
  // Nyquist bin: real.
  spectrum[n / 2] = std::pow(0.5, -half_exponent) * rng.normal();

  detail::fft(spectrum, true);

  std::vector<double> out(spec.length);
  for (std::size_t i = 0; i < spec.length; ++i) out[i] = spectrum[i].real();

  const double m = mean(out);
  const double sd = stdev(out);
  if (sd <= 0.0) throw domain_error("generate_correlated: degenerate output");
  const double target = std::sqrt(2.0 * spec.amplitude * spec.dt);
  for (auto& x : out) x = (x - m) / sd * target;
  return out;
}

inline std::vector<double> generate_noise(const NoiseSpec& spec) {
  return spec.kind == NoiseKind::white ? generate_white(spec)
                                       : generate_correlated(spec);
}

// Sample autocorrelation at one lag.
inline double autocorrelation(std::span<const double> series, std::size_t lag) {
  if (series.size() <= lag + 1)
    throw insufficient_data_error("autocorrelation: series shorter than lag");
  const double m = mean(series);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    den += (series[i] - m) * (series[i] - m);
    if (i + lag < series.size())
      num += (series[i] - m) * (series[i + lag] - m);
  }
  return den > 0.0 ? num / den : 0.0;
}

struct AutocorrExponent {
  double nu_hat = 0.0;
  double stderr_ = 0.0;
  bool power_law_regime = false;  // false: autocorr below the noise floor
  std::size_t points_used = 0;
};

// Log-log regression of the sample autocorrelation over log-spaced lags in
// [lag_min, lag_max]. Lags whose autocorrelation is below ~3/sqrt(n) carry
// no signal and are dropped; with fewer than 5 usable points the series is
// flagged as having no power-law regime.
inline AutocorrExponent estimate_autocorr_exponent(std::span<const double> series,
                                                   std::size_t lag_min = 10,
                                                   std::size_t lag_max = 1000) {
  if (series.size() < (1u << 14))
    throw insufficient_data_error("estimate_autocorr_exponent: need >= 2^14 samples");
  if (variance(series) <= 0.0)
    throw domain_error("estimate_autocorr_exponent: zero-variance series");
  lag_max = std::min(lag_max, series.size() / 10);

  const double noise_floor =
      3.0 / std::sqrt(static_cast<double>(series.size()));

  std::vector<double> log_lag, log_c;
  std::size_t prev = 0;
  const int n_points = 40;
  for (int j = 0; j <= n_points; ++j) {
    const double frac = static_cast<double>(j) / n_points;
    const auto lag = static_cast<std::size_t>(std::round(
        std::exp(std::log(static_cast<double>(lag_min)) * (1.0 - frac) +
                 std::log(static_cast<double>(lag_max)) * frac)));
    if (lag == prev) continue;
    prev = lag;
    const double c = autocorrelation(series, lag);
    if (c <= noise_floor) continue;
    log_lag.push_back(std::log(static_cast<double>(lag)));
    log_c.push_back(std::log(c));
  }

  AutocorrExponent result;
  result.points_used = log_lag.size();
  if (log_lag.size() < 5) return result;  // no power-law regime
  const auto fit = linear_regression(log_lag, log_c);
  result.nu_hat = -fit.slope;
  result.stderr_ = fit.slope_stderr;
  result.power_law_regime = true;
  return result;
}

}  // namespace evomarket
