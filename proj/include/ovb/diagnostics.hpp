#pragma once

#include <string>

#include "ovb/gaussian.hpp"
#include "ovb/models.hpp"

namespace ovb {

/// Computable smoothness / effective-size certificate for one update step.
/// tau3_hat and tau4_hat are certified upper bounds (global derivative
/// envelopes over lambda_min powers), not exact local suprema — hence
/// bounds_not_exact is always true.
struct SmoothnessReport {
    double tau3_hat = 0.0;
    double tau4_hat = 0.0;
    double r_la = 0.0;
    double r_eff = 0.0;
    double p_eff = 0.0;
    double lambda_t = 0.0;
    double p_star = 0.0;
    double eps_tv = 0.0;
    double eps_kl = 0.0;
    bool bounds_not_exact = true;
};

SmoothnessReport smoothness_report(const ModelKind& model, const MiniBatch& batch,
                                   const GaussianState& prior, const Eigen::VectorXd& pmle_theta,
                                   const SpdMatrix& pmle_precision, int n_total, int t_total);

/// Mean-term / Frobenius-term / TV-bound comparison of an online posterior
/// against a batch baseline. The mean gap is measured in the online
/// precision metric, the Frobenius gap in the baseline precision metric.
struct DiscrepancyReport {
    double mean_term = 0.0;
    double frob_term = 0.0;
    TvBounds tv;
    double kl_online_baseline = 0.0;
    double kl_baseline_online = 0.0;
    std::string baseline_tag;
};

DiscrepancyReport discrepancy(const GaussianState& online, const GaussianState& baseline,
                              std::string baseline_tag);

/// Wald ellipsoid { theta : ||Omega^{1/2}(theta - mu)||^2 <= chi2_{p,alpha} }.
struct WaldSet {
    GaussianState center;
    double alpha = 0.0;
    double radius_sq = 0.0;
};

WaldSet make_wald(const GaussianState& state, double alpha);
bool wald_contains(const WaldSet& set, const Eigen::VectorXd& theta);
double wald_length_1d(const WaldSet& set);

std::string to_json(const SmoothnessReport& r);
std::string to_json(const DiscrepancyReport& r);

}  // namespace ovb
