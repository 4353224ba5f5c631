#pragma once

#include <cstddef>

namespace auf {

// Digamma function psi(x) for x > 0.
double digamma(double x);

// ln of the volume of the unit ball in R^m (Euclidean norm).
double log_unit_ball_volume(size_t m);

// Regularized incomplete beta I_x(a, b) for a,b > 0, x in [0,1].
double reg_inc_beta(double a, double b, double x);

// Inverse of I_x(a, b) in x: returns x with I_x(a,b) = p.
double inv_reg_inc_beta(double a, double b, double p);

// Standard normal CDF and its inverse.
double normal_cdf(double x);
double normal_quantile(double p);

// Upper tail of the F(d1, d2) distribution at f >= 0.
double f_test_pvalue(double f, double d1, double d2);

}  // namespace auf
