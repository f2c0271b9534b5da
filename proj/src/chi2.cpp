#include "ovb/chi2.hpp"

#include <cmath>

#include "ovb/errors.hpp"

namespace ovb {

namespace {

constexpr int kMaxIter = 500;
constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;

// Series representation, converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int i = 0; i < kMaxIter; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for the upper tail Q(a, x), x >= a + 1.
double gamma_q_cf(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double chi2_cdf(int p, double x) {
    return regularized_gamma_p(0.5 * static_cast<double>(p), 0.5 * x);
}

double chi2_quantile(int p, double alpha) {
    if (p < 1) {
        throw DimensionMismatch("chi2_quantile: p must be a positive integer");
    }
    if (!(alpha > 0.0) || alpha > 1.0) {
        throw InvalidAlpha("chi2_quantile: alpha must lie in (0, 1]");
    }
    if (alpha == 1.0) return 0.0;

    const double target = 1.0 - alpha;
    double lo = 0.0;
    double hi = static_cast<double>(p) + 10.0;
    while (chi2_cdf(p, hi) < target) {
        hi *= 2.0;
        if (hi > 1e12) break;
    }
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf(p, mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace ovb
