#pragma once

#include <cstddef>
#include <vector>

#include "knobsync/error.hpp"

namespace knobsync {

// Method-of-moments gamma fit: shape = mean^2/var, scale = var/mean, with the
// sample variance using divisor n-1.
struct GammaMom {
  double shape = 0.0;
  double scale = 0.0;
};

GammaMom gamma_mom_fit(const std::vector<double>& samples);

struct Bandwidth {
  double value = 0.0;
  bool fallback = false;  // true when the plugin constant was unusable
};

// Plugin bandwidth for the reciprocal-inverse-Gaussian kernel CDF estimator
// under a gamma reference fit:
//   b = n^(-2/5) * [ 2^(2t+1) s^(7/2) (2t-1) G(t-1/2) G(t) /
//                    ( sqrt(pi) (6t-4) (t-1) G(2t) ) ]^(2/5)
// with t = shape, s = scale, G = gamma function (evaluated via log-gamma).
// The constant requires shape > 3/2; below that a Silverman-style fallback
// b = sd * n^(-2/5) is returned with the fallback flag set (under the MoM fit
// the sample sd equals sqrt(shape)*scale).
Bandwidth plugin_bandwidth(double shape, double scale, std::size_t n);

// Smooth CDF estimator of a nonnegative sample (the normed residuals):
//   H(y; b) = (1/n) sum_i [ Phi((Y_i + b)/sqrt(Y_i b))
//                           - Phi((Y_i - (y - b))/sqrt(Y_i b)) ]
// clamped into [0, 1]. The sum is intentionally not renormalized even though
// its y -> infinity limit sits slightly below 1.
struct ResidualCdf {
  std::vector<double> samples;  // zero entries replaced by 1e-12
  double bandwidth = 0.0;
  double gamma_shape = 0.0;
  double gamma_scale = 0.0;
  bool bandwidth_fallback = false;

  // precomputed per-sample terms: inv_s[i] = 1/sqrt(Y_i b) and
  // head[i] = Phi((Y_i + b)/sqrt(Y_i b)) (the y-independent first term)
  std::vector<double> inv_s;
  std::vector<double> head;
};

// Full construction: gamma MoM fit + plugin bandwidth (with fallback when the
// fitted shape is too light or the fit itself is degenerate).
ResidualCdf make_residual_cdf(std::vector<double> samples);

// Construction with a caller-chosen bandwidth (no gamma fit).
ResidualCdf make_residual_cdf(std::vector<double> samples, double bandwidth);

double cdf_eval(const ResidualCdf& cdf, double y);

// Empirical CDF (1/n) #{Y_i <= y} of an ascending-sorted sample.
double ecdf_eval(const std::vector<double>& sorted_samples, double y);

// Inverse-Gaussian density with mean mu and shape lambda (zero off-support).
double ig_density_eval(double u, double mu, double lambda);

// Reciprocal-inverse-Gaussian density; mean 1/mu + 1/lambda,
// variance (lambda + 2 mu)/(lambda^2 mu). Zero off-support.
double rig_density_eval(double v, double mu, double lambda);

// Standard normal CDF, shared by the estimators above.
double normal_cdf(double x);

}  // namespace knobsync
