#include "knobsync/kernelcdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace knobsync {

namespace {

constexpr double kZeroSampleEps = 1e-12;
constexpr double kPi = 3.141592653589793238462643383279502884;

// Precompute the y-independent per-sample terms of the CDF estimator.
void finalize_cdf(ResidualCdf& cdf) {
  const std::size_t n = cdf.samples.size();
  cdf.inv_s.resize(n);
  cdf.head.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = std::sqrt(cdf.samples[i] * cdf.bandwidth);
    cdf.inv_s[i] = 1.0 / s;
    cdf.head[i] = normal_cdf((cdf.samples[i] + cdf.bandwidth) * cdf.inv_s[i]);
  }
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

GammaMom gamma_mom_fit(const std::vector<double>& samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw error(errc::bad_argument, "gamma fit needs at least two samples");

  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);

  double var = 0.0;
  for (double v : samples) {
    double d = v - mean;
    var += d * d;
  }
  var /= static_cast<double>(n - 1);

  if (var <= 0.0) throw error(errc::degenerate, "gamma fit needs positive sample variance");
  if (mean == 0.0) throw error(errc::degenerate, "gamma fit needs nonzero sample mean");
  return {mean * mean / var, var / mean};
}

Bandwidth plugin_bandwidth(double shape, double scale, std::size_t n) {
  if (!(scale > 0.0)) throw error(errc::bad_argument, "scale must be positive");
  if (n < 2) throw error(errc::bad_argument, "bandwidth needs n >= 2");

  const double n_factor = std::pow(static_cast<double>(n), -0.4);
  if (!(shape > 1.5)) {
    // The plugin constant is undefined or negative here; fall back to a
    // Silverman-style rule. Under the MoM fit, sd = sqrt(shape) * scale.
    return {std::sqrt(shape) * scale * n_factor, true};
  }

  // log of the bracketed constant:
  //   2^(2t+1) s^(7/2) (2t-1) G(t-1/2) G(t) / ( sqrt(pi) (6t-4) (t-1) G(2t) )
  double log_c = (2.0 * shape + 1.0) * std::log(2.0) + 3.5 * std::log(scale) +
                 std::log(2.0 * shape - 1.0) + std::lgamma(shape - 0.5) +
                 std::lgamma(shape) - 0.5 * std::log(kPi) -
                 std::log(6.0 * shape - 4.0) - std::log(shape - 1.0) -
                 std::lgamma(2.0 * shape);
  return {n_factor * std::exp(0.4 * log_c), false};
}

ResidualCdf make_residual_cdf(std::vector<double> samples) {
  if (samples.empty()) throw error(errc::degenerate, "CDF needs at least one sample");
  for (double& v : samples)
    if (v == 0.0) v = kZeroSampleEps;

  ResidualCdf cdf;
  cdf.samples = std::move(samples);
  const std::size_t n = cdf.samples.size();

  // Degenerate samples (too few, zero variance) cannot support the gamma fit;
  // use the sd-based fallback there, floored so sqrt(Y*b) stays positive.
  try {
    GammaMom fit = gamma_mom_fit(cdf.samples);
    cdf.gamma_shape = fit.shape;
    cdf.gamma_scale = fit.scale;
    Bandwidth b = plugin_bandwidth(fit.shape, fit.scale, n);
    cdf.bandwidth = b.value;
    cdf.bandwidth_fallback = b.fallback;
  } catch (const error&) {
    double mean = 0.0;
    for (double v : cdf.samples) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : cdf.samples) var += (v - mean) * (v - mean);
    var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
    cdf.gamma_shape = std::numeric_limits<double>::quiet_NaN();
    cdf.gamma_scale = std::numeric_limits<double>::quiet_NaN();
    cdf.bandwidth = std::max(std::sqrt(var) * std::pow(double(n), -0.4), kZeroSampleEps);
    cdf.bandwidth_fallback = true;
  }

  finalize_cdf(cdf);
  return cdf;
}

ResidualCdf make_residual_cdf(std::vector<double> samples, double bandwidth) {
  if (samples.empty()) throw error(errc::degenerate, "CDF needs at least one sample");
  if (!(bandwidth > 0.0)) throw error(errc::bad_argument, "bandwidth must be positive");
  for (double& v : samples)
    if (v == 0.0) v = kZeroSampleEps;

  ResidualCdf cdf;
  cdf.samples = std::move(samples);
  cdf.bandwidth = bandwidth;
  cdf.gamma_shape = std::numeric_limits<double>::quiet_NaN();
  cdf.gamma_scale = std::numeric_limits<double>::quiet_NaN();
  finalize_cdf(cdf);
  return cdf;
}

double cdf_eval(const ResidualCdf& cdf, double y) {
  const std::size_t n = cdf.samples.size();
  const double shift = y - cdf.bandwidth;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum += cdf.head[i] - normal_cdf((cdf.samples[i] - shift) * cdf.inv_s[i]);
  double value = sum / static_cast<double>(n);
  return std::clamp(value, 0.0, 1.0);
}

double ecdf_eval(const std::vector<double>& sorted_samples, double y) {
  if (sorted_samples.empty()) throw error(errc::degenerate, "ECDF needs samples");
  auto it = std::upper_bound(sorted_samples.begin(), sorted_samples.end(), y);
  return static_cast<double>(it - sorted_samples.begin()) /
         static_cast<double>(sorted_samples.size());
}

double ig_density_eval(double u, double mu, double lambda) {
  if (u <= 0.0) return 0.0;
  double d = u - mu;
  return std::sqrt(lambda / (2.0 * kPi * u * u * u)) *
         std::exp(-lambda * d * d / (2.0 * mu * mu * u));
}

double rig_density_eval(double v, double mu, double lambda) {
  if (v <= 0.0) return 0.0;
  return std::sqrt(lambda / (2.0 * kPi * v)) *
         std::exp(-(lambda / (2.0 * mu)) * (v * mu - 2.0 + 1.0 / (mu * v)));
}

}  // namespace knobsync
