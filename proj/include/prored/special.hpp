#ifndef PRORED_SPECIAL_HPP
#define PRORED_SPECIAL_HPP

namespace prored {

// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x),
// series expansion for x < a+1 and continued fraction otherwise.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Upper tail of the chi-squared distribution with df degrees of freedom.
double chi_squared_sf(double x, double df);

// Two-sided tail of the standard normal, clamped into (0, 1].
double normal_two_sided_p(double z);

}  // namespace prored

#endif  // PRORED_SPECIAL_HPP
