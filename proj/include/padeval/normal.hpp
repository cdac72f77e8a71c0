#pragma once

namespace pad {

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse of the standard normal CDF on (0,1). Acklam's rational
/// approximation (relative error 1.15e-9) followed by one Halley step against
/// erfc, which brings the absolute error well below 1e-12 in the tails.
double normal_quantile(double p);

}  // namespace pad
