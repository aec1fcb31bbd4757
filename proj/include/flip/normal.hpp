#pragma once

namespace flip {

// Standard normal pdf, cdf, inverse cdf, and the bivariate cdf
// P(X <= a, Y <= b) for standard margins with correlation rho.
double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);
double binormal_cdf(double a, double b, double rho);

}  // namespace flip
