#pragma once

#include <cstddef>

namespace rebal::specfun {

// ln Beta(a, b) via lgamma.
double log_beta(double a, double b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
// Relative error well below 1e-10 for a, b <= 1e4.
double reg_incomplete_beta(double a, double b, double x);

// Unnormalized incomplete beta B(a, b; x) = int_0^x t^(a-1) (1-t)^(b-1) dt.
double incomplete_beta(double a, double b, double x);

// P(X <= k) for X ~ Binomial(n, p), evaluated through the beta identity
// F(k; n, p) = (n-k) C(n,k) B(n-k, k+1; 1-p), in its regularized form
// I_{1-p}(n-k, k+1) so large n never overflows.
double binom_cdf(std::size_t k, std::size_t n, double p);

// ln C(n, k) via lgamma; exact enough for n ~ 3e5.
double log_binom_coeff(std::size_t n, std::size_t k);

// ln[(n-K-1) C(n-1, K)], the density prefactor kept in log domain.
// K = n-1 returns the C(n-1, n-1) = 1 branch (ln C = 0); the vanishing
// linear factor is handled by the degenerate path in smote_order_weight.
double log_density_prefactor(std::size_t n, std::size_t k);

// The stable form of (n-K-1) C(n-1, K) B(n-K-1, K; 1-mu): equal to
// ((n-1)/K) P(Binomial(n-2, mu) <= K-1), which neither overflows nor
// cancels for n ~ 3e5 and stays exact at K = n-1 (value 1).
double smote_order_weight(std::size_t n, std::size_t k, double mu);

}  // namespace rebal::specfun
