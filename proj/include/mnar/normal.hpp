#pragma once

namespace mnar {

double norm_pdf(double x);
double norm_cdf(double x);
// Upper tail 1 - Phi(x) without cancellation.
double norm_sf(double x);
// Inverse of norm_cdf on (0,1) (Wichura AS241, ~1e-16 relative).
double norm_quantile(double p);

// P(lo < X <= hi) for X ~ N(mu, s^2), accurate in both tails.
double norm_interval(double lo, double hi, double mu = 0.0, double s = 1.0);

}  // namespace mnar
