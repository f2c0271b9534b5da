#include "ovb/gaussian.hpp"

#include <algorithm>
#include <cmath>

#include "ovb/errors.hpp"
#include "ovb/rng.hpp"

namespace ovb {

GaussianState::GaussianState(Eigen::VectorXd mu, SpdMatrix omega)
    : mean(std::move(mu)), precision(std::move(omega)) {
    if (mean.size() != precision.dim()) {
        throw DimensionMismatch("GaussianState: mean length != precision dim");
    }
}

namespace {

void check_same_dim(const GaussianState& q1, const GaussianState& q2) {
    if (q1.dim() != q2.dim()) {
        throw DimensionMismatch("Gaussian pair: dimensions differ");
    }
}

}  // namespace

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

double gaussian_kl(const GaussianState& q1, const GaussianState& q2) {
    check_same_dim(q1, q2);
    const int p = q1.dim();
    const double mean_term = q2.precision.quadratic_form(q1.mean - q2.mean);
    // tr(Omega2 Omega1^{-1}) = ||L1^{-1} L2||_F^2
    const Eigen::MatrixXd a =
        q1.precision.chol_lower().triangularView<Eigen::Lower>().solve(q2.precision.chol_lower());
    const double trace_term = a.squaredNorm();
    const double logdet_term = q1.precision.log_det() - q2.precision.log_det();
    const double kl = 0.5 * (mean_term + trace_term - p + logdet_term);
    return std::max(kl, 0.0);
}

double gaussian_tv_1d(const GaussianState& q1, const GaussianState& q2) {
    check_same_dim(q1, q2);
    if (q1.dim() != 1) {
        throw DimensionMismatch("gaussian_tv_1d: requires p = 1");
    }
    const double m1 = q1.mean(0), m2 = q2.mean(0);
    const double w1 = q1.precision.matrix()(0, 0), w2 = q2.precision.matrix()(0, 0);
    const double s1 = 1.0 / std::sqrt(w1), s2 = 1.0 / std::sqrt(w2);

    // log phi1 - log phi2 is the quadratic a x^2 + b x + c.
    const double a = 0.5 * (w2 - w1);
    const double b = w1 * m1 - w2 * m2;
    const double c = 0.5 * (std::log(w1) - std::log(w2)) - 0.5 * w1 * m1 * m1 + 0.5 * w2 * m2 * m2;

    const auto cdf1 = [&](double x) { return normal_cdf((x - m1) / s1); };
    const auto cdf2 = [&](double x) { return normal_cdf((x - m2) / s2); };

    if (a == 0.0) {
        if (b == 0.0) return 0.0;  // identical distributions
        const double x0 = -c / b;  // single crossing (equal variances)
        return std::abs(cdf1(x0) - cdf2(x0));
    }

    const double disc = b * b - 4.0 * a * c;
    if (disc <= 0.0) return 0.0;  // numerically identical
    const double sq = std::sqrt(disc);
    double x_lo = (-b - sq) / (2.0 * a);
    double x_hi = (-b + sq) / (2.0 * a);
    if (x_lo > x_hi) std::swap(x_lo, x_hi);

    // Sign of phi1 - phi2 is constant on each of the three intervals.
    const double i1 = cdf1(x_lo) - cdf2(x_lo);
    const double i2 = (cdf1(x_hi) - cdf1(x_lo)) - (cdf2(x_hi) - cdf2(x_lo));
    const double i3 = (1.0 - cdf1(x_hi)) - (1.0 - cdf2(x_hi));
    return 0.5 * (std::abs(i1) + std::abs(i2) + std::abs(i3));
}

double delta_metric(const GaussianState& q1, const GaussianState& q2) {
    check_same_dim(q1, q2);
    const int p = q1.dim();
    const Eigen::VectorXd d = q2.mean - q1.mean;
    const double mean2 = std::sqrt(q2.precision.quadratic_form(d));
    const double mean1 = std::sqrt(q1.precision.quadratic_form(d));
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p, p);
    const double frob12 = (q2.precision.whiten(q1.precision.matrix()) - eye).norm();
    const double frob21 = (q1.precision.whiten(q2.precision.matrix()) - eye).norm();
    return std::max({mean2, mean1, frob12, frob21});
}

TvBounds tv_bounds(const GaussianState& q1, const GaussianState& q2) {
    check_same_dim(q1, q2);
    TvBounds out;
    out.delta = delta_metric(q1, q2);
    const double kl12 = gaussian_kl(q1, q2);
    const double kl21 = gaussian_kl(q2, q1);
    out.upper = std::min({1.0, out.delta / std::sqrt(2.0), std::sqrt(0.5 * kl12),
                          std::sqrt(0.5 * kl21)});
    out.lower = (out.delta <= 1.0 / 3.0) ? out.delta / 200.0 : 0.0;
    return out;
}

std::vector<Eigen::VectorXd> sample(const GaussianState& q, std::uint64_t seed, int k) {
    if (k < 1) {
        throw DimensionMismatch("sample: k must be >= 1");
    }
    const int p = q.dim();
    RngStream rng(seed);
    std::vector<Eigen::VectorXd> draws;
    draws.reserve(static_cast<std::size_t>(k));
    Eigen::VectorXd z(p);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < p; ++j) z(j) = rng.next_normal();
        draws.push_back(q.mean + q.precision.chol_transpose_solve(z));
    }
    return draws;
}

}  // namespace ovb
