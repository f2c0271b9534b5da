#pragma once

#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "ovb/gaussian.hpp"

namespace ovb {

/// One block of observations. An absent design means the intercept-only
/// model (implicit all-ones column, p = 1); the response sum is cached at
/// construction so intercept-only likelihood work stays O(1) per call.
struct MiniBatch {
    Eigen::VectorXd y;
    std::optional<Eigen::MatrixXd> design;
    double y_sum = 0.0;

    explicit MiniBatch(Eigen::VectorXd responses,
                       std::optional<Eigen::MatrixXd> x = std::nullopt);

    int n() const { return static_cast<int>(y.size()); }
    int param_dim() const { return design ? static_cast<int>(design->cols()) : 1; }
};

struct ModelKind {
    enum class Tag { Logistic, BernoulliIntercept, GaussianLinear };

    Tag tag = Tag::Logistic;
    double noise_precision = 1.0;  // GaussianLinear only

    static ModelKind logistic() { return {Tag::Logistic, 1.0}; }
    static ModelKind bernoulli_intercept() { return {Tag::BernoulliIntercept, 1.0}; }
    static ModelKind gaussian_linear(double tau);

    bool is_binary() const { return tag != Tag::GaussianLinear; }
};

// Overflow-safe logistic cumulant b(eta) = log(1 + exp(eta)) and its first
// two derivatives, using the log1p / exp(-|eta|) forms.
double logistic_b(double eta);
double logistic_b1(double eta);
double logistic_b2(double eta);

/// Rejects non-{0,1} responses under a binary model. Called once per solver
/// entry rather than per likelihood evaluation.
void validate_responses(const ModelKind& model, const MiniBatch& batch);

double loglik(const ModelKind& model, const MiniBatch& batch, const Eigen::VectorXd& theta);
Eigen::VectorXd grad(const ModelKind& model, const MiniBatch& batch, const Eigen::VectorXd& theta);

/// F_{t,theta} = -grad^2 L_t(theta); PSD, PD iff the design has full column rank.
Eigen::MatrixXd hessian(const ModelKind& model, const MiniBatch& batch,
                        const Eigen::VectorXd& theta);

/// Uniform upper bounds on the operator norms of the third and fourth
/// log-likelihood derivatives: (sum ||x_i||^3, sum ||x_i||^4) for binary
/// models, (0, 0) for the quadratic Gaussian-linear model. These are bounds,
/// not exact suprema.
std::pair<double, double> deriv34_opnorm_bounds(const ModelKind& model, const MiniBatch& batch);

/// Exact Gaussian-linear posterior: precision = Omega + tau X'X,
/// mean = precision^{-1} (Omega mu + tau X'y).
GaussianState conjugate_posterior(double noise_precision, const MiniBatch& batch,
                                  const GaussianState& prior);

/// V_t: X'X/4 for the binary models, tau X'X for Gaussian-linear.
Eigen::MatrixXd score_matrix_V(const ModelKind& model, const MiniBatch& batch);

/// Reads `y,x1,...,xp` CSV (header required). Malformed rows are hard errors
/// reported with their line number.
MiniBatch load_csv(const std::string& path);

}  // namespace ovb
