#pragma once

namespace pooltest {

// Standard normal CDF, accurate to ~1e-16 absolute.
double normal_cdf(double x);

// Inverse of normal_cdf on (0, 1). Throws DomainError outside the open interval.
double normal_quantile(double p);

// z such that normal_cdf(z) = 0.95; the probit slope constant of the sensitivity model
// (1.6449 when rounded to four decimals).
double probit95();

}  // namespace pooltest
