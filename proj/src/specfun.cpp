#include "rebal/specfun.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rebal/core.hpp"

namespace rebal::specfun {

namespace {

void check_beta_args(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        fail(ErrorKind::Domain, "incomplete beta requires a > 0 and b > 0");
    }
    if (!(x >= 0.0 && x <= 1.0)) {
        fail(ErrorKind::Domain, "incomplete beta requires x in [0, 1]");
    }
}

// Continued fraction for I_x(a, b) (modified Lentz). Converges fast when
// x < (a+1)/(a+b+2); the caller flips to the symmetric case otherwise.
double beta_continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;

    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 400; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double reg_incomplete_beta(double a, double b, double x) {
    check_beta_args(a, b, x);
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - log_beta(b, a)) *
                     beta_continued_fraction(b, a, 1.0 - x) / b;
}

double incomplete_beta(double a, double b, double x) {
    check_beta_args(a, b, x);
    if (x == 0.0) return 0.0;
    return reg_incomplete_beta(a, b, x) * std::exp(log_beta(a, b));
}

double binom_cdf(std::size_t k, std::size_t n, double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        fail(ErrorKind::Domain, "binom_cdf requires p in [0, 1]");
    }
    if (k > n) {
        fail(ErrorKind::Domain, "binom_cdf requires k <= n");
    }
    if (k == n || p == 0.0) return 1.0;
    if (p == 1.0) return 0.0;
    // F(k; n, p) = I_{1-p}(n-k, k+1), the regularized form of Lemma-style
    // identity (n-k) C(n,k) B(n-k, k+1; 1-p).
    return reg_incomplete_beta(static_cast<double>(n - k),
                               static_cast<double>(k + 1), 1.0 - p);
}

double log_binom_coeff(std::size_t n, std::size_t k) {
    if (k > n) {
        fail(ErrorKind::Domain, "log_binom_coeff requires k <= n");
    }
    return std::lgamma(static_cast<double>(n) + 1.0) -
           std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

double log_density_prefactor(std::size_t n, std::size_t k) {
    if (n < 3 || k < 1 || k > n - 1) {
        fail(ErrorKind::InvalidK, "prefactor requires n >= 3 and 1 <= K <= n-1");
    }
    const double log_choose = log_binom_coeff(n - 1, k);
    if (k == n - 1) return log_choose;
    return std::log(static_cast<double>(n - 1 - k)) + log_choose;
}

double smote_order_weight(std::size_t n, std::size_t k, double mu) {
    if (n < 3 || k < 1 || k > n - 1) {
        fail(ErrorKind::InvalidK, "order weight requires n >= 3 and 1 <= K <= n-1");
    }
    if (!(mu >= 0.0 && mu <= 1.0)) {
        fail(ErrorKind::Domain, "order weight requires mu in [0, 1]");
    }
    const double ratio = static_cast<double>(n - 1) / static_cast<double>(k);
    return ratio * binom_cdf(k - 1, n - 2, mu);
}

}  // namespace rebal::specfun
