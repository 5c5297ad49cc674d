#pragma once

namespace clusterdyn {

double normal_cdf(double x);

// Inverse standard normal CDF for p in (0, 1). Rational approximation
// refined by one Halley step; absolute error well below 1e-12 in the bulk.
double normal_quantile(double p);

// Two-sided critical value z_{1 - alpha/2}.
double two_sided_z(double alpha);

}  // namespace clusterdyn
