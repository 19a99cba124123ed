#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace egan {

// Pearson chi-square statistic for observed counts against expected counts.
// Both spans must have equal length; expected entries must be positive.
double chi_square_stat(std::span<const double> observed,
                       std::span<const double> expected);

// Upper-tail p-value of the chi-square distribution with df degrees of
// freedom, computed through the regularized incomplete gamma function.
double chi_square_pvalue(double stat, double df);

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
double gamma_q(double a, double x);

// Max-shifted softmax of a logit vector; entries positive, sum 1. Throws
// ContractError on empty input.
std::vector<double> softmax_stable(std::span<const double> logits);

}  // namespace egan
