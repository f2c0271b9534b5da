#include "ovb/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "ovb/chi2.hpp"
#include "ovb/errors.hpp"
#include "ovb/json_util.hpp"

namespace ovb {

namespace {

constexpr double kUnderflowFloor = 1e-300;

double exp_floored(double log_value) {
    if (log_value < -690.0) return kUnderflowFloor;
    return std::max(std::exp(log_value), kUnderflowFloor);
}

}  // namespace

SmoothnessReport smoothness_report(const ModelKind& model, const MiniBatch& batch,
                                   const GaussianState& prior, const Eigen::VectorXd& pmle_theta,
                                   const SpdMatrix& pmle_precision, int n_total, int t_total) {
    if (pmle_theta.size() != prior.dim() || prior.dim() != batch.param_dim()) {
        throw DimensionMismatch("smoothness_report: dimension mismatch");
    }
    const int p = static_cast<int>(pmle_theta.size());
    const double n = static_cast<double>(batch.n());
    const double log_n_total = std::log(static_cast<double>(n_total));

    SmoothnessReport rep;
    const auto [bound3, bound4] = deriv34_opnorm_bounds(model, batch);
    const double lmin = pmle_precision.lambda_min();
    rep.tau3_hat = bound3 / std::pow(lmin, 1.5);
    rep.tau4_hat = bound4 / (lmin * lmin);

    rep.r_la = 2.0 * std::sqrt(static_cast<double>(p)) + std::sqrt(2.0 * log_n_total);

    const Eigen::MatrixXd v = score_matrix_V(model, batch);
    const Eigen::MatrixXd whitened = pmle_precision.whiten(v);
    rep.p_eff = whitened.trace();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (whitened + whitened.transpose()),
                                                      Eigen::EigenvaluesOnly);
    rep.lambda_t = es.eigenvalues().cwiseAbs().maxCoeff();
    const double log_nt = std::log(n) + std::log(static_cast<double>(t_total));
    rep.r_eff = std::sqrt(rep.p_eff) + std::sqrt(2.0 * rep.lambda_t * log_nt);

    rep.p_star = std::max({static_cast<double>(p), std::log(n),
                           std::log(static_cast<double>(t_total))});

    const double p2 = static_cast<double>(p) * static_cast<double>(p);
    const double log3 = log_n_total * log_n_total * log_n_total;
    const double tv_tail = exp_floored(-8.0 * log_n_total - 8.0 * static_cast<double>(p));
    rep.eps_tv = (rep.tau4_hat + rep.tau3_hat * rep.tau3_hat) * p2 + rep.tau3_hat * p +
                 rep.tau3_hat * rep.tau3_hat * rep.tau3_hat * log3 + tv_tail;
    const double kl_tail = exp_floored(-7.0 * log_n_total);
    rep.eps_kl = std::sqrt((rep.tau4_hat + rep.tau3_hat * rep.tau3_hat) * p2 +
                           rep.tau3_hat * rep.tau3_hat * rep.tau3_hat * log3 + kl_tail);
    rep.bounds_not_exact = true;
    return rep;
}

DiscrepancyReport discrepancy(const GaussianState& online, const GaussianState& baseline,
                              std::string baseline_tag) {
    if (online.dim() != baseline.dim()) {
        throw DimensionMismatch("discrepancy: dimensions differ");
    }
    DiscrepancyReport rep;
    rep.mean_term = std::sqrt(online.precision.quadratic_form(baseline.mean - online.mean));
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(online.dim(), online.dim());
    rep.frob_term = (baseline.precision.whiten(online.precision.matrix()) - eye).norm();
    rep.tv = tv_bounds(online, baseline);
    rep.kl_online_baseline = gaussian_kl(online, baseline);
    rep.kl_baseline_online = gaussian_kl(baseline, online);
    rep.baseline_tag = std::move(baseline_tag);
    return rep;
}

WaldSet make_wald(const GaussianState& state, double alpha) {
    return WaldSet{state, alpha, chi2_quantile(state.dim(), alpha)};
}

bool wald_contains(const WaldSet& set, const Eigen::VectorXd& theta) {
    if (theta.size() != set.center.dim()) {
        throw DimensionMismatch("wald_contains: theta dimension mismatch");
    }
    return set.center.precision.quadratic_form(theta - set.center.mean) <= set.radius_sq;
}

double wald_length_1d(const WaldSet& set) {
    if (set.center.dim() != 1) {
        throw DimensionMismatch("wald_length_1d: requires p = 1");
    }
    return 2.0 * std::sqrt(set.radius_sq / set.center.precision.matrix()(0, 0));
}

std::string to_json(const SmoothnessReport& r) {
    std::string out = "{";
    out += "\"tau3_hat\":" + json_number(r.tau3_hat);
    out += ",\"tau4_hat\":" + json_number(r.tau4_hat);
    out += ",\"r_la\":" + json_number(r.r_la);
    out += ",\"r_eff\":" + json_number(r.r_eff);
    out += ",\"p_eff\":" + json_number(r.p_eff);
    out += ",\"lambda_t\":" + json_number(r.lambda_t);
    out += ",\"p_star\":" + json_number(r.p_star);
    out += ",\"eps_tv\":" + json_number(r.eps_tv);
    out += ",\"eps_kl\":" + json_number(r.eps_kl);
    out += ",\"bounds_not_exact\":";
    out += r.bounds_not_exact ? "true" : "false";
    out += "}";
    return out;
}

std::string to_json(const DiscrepancyReport& r) {
    std::string out = "{";
    out += "\"mean_term\":" + json_number(r.mean_term);
    out += ",\"frob_term\":" + json_number(r.frob_term);
    out += ",\"tv\":{\"lower\":" + json_number(r.tv.lower) +
           ",\"upper\":" + json_number(r.tv.upper) + ",\"delta\":" + json_number(r.tv.delta) + "}";
    out += ",\"kl_online_baseline\":" + json_number(r.kl_online_baseline);
    out += ",\"kl_baseline_online\":" + json_number(r.kl_baseline_online);
    out += ",\"baseline_tag\":\"" + r.baseline_tag + "\"";
    out += "}";
    return out;
}

}  // namespace ovb
