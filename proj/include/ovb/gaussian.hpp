#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ovb/spd.hpp"

namespace ovb {

/// Full-covariance Gaussian in precision parameterization. Every update
/// formula in this library is precision-side; covariances only ever
/// materialize through solves against the cached Cholesky factor.
struct GaussianState {
    Eigen::VectorXd mean;
    SpdMatrix precision;

    GaussianState(Eigen::VectorXd mu, SpdMatrix omega);

    int dim() const { return static_cast<int>(mean.size()); }
};

/// Certified total-variation bracket between two Gaussians, together with
/// the whitened-parameter gap it was derived from.
struct TvBounds {
    double lower = 0.0;
    double upper = 0.0;
    double delta = 0.0;
};

/// KL(q1 || q2) in the standard closed form: mean gap weighted by q2's
/// precision, trace term, log-determinant term.
double gaussian_kl(const GaussianState& q1, const GaussianState& q2);

/// Exact total variation for p = 1, from the (<= 2) density crossing points.
double gaussian_tv_1d(const GaussianState& q1, const GaussianState& q2);

/// Symmetric max of the two precision-weighted mean gaps and the two
/// whitened-precision Frobenius gaps. Sandwiches TV: delta/200 <= TV <=
/// delta/sqrt(2) whenever delta <= 1/3.
double delta_metric(const GaussianState& q1, const GaussianState& q2);

/// upper = min(1, delta/sqrt(2), Pinsker in both KL orderings);
/// lower = delta/200 when delta <= 1/3, else 0.
TvBounds tv_bounds(const GaussianState& q1, const GaussianState& q2);

/// k reparameterized draws mu + L^{-T} z, deterministic given seed.
std::vector<Eigen::VectorXd> sample(const GaussianState& q, std::uint64_t seed, int k);

/// Standard normal CDF.
double normal_cdf(double x);

}  // namespace ovb
