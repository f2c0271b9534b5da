#pragma once

#include <cstdint>
#include <utility>

#include <Eigen/Dense>

#include "ovb/gaussian.hpp"
#include "ovb/models.hpp"

namespace ovb {

/// log-likelihood of one mini-batch plus the Gaussian-prior quadratic
/// penalty: Lt(theta) - 0.5 || Omega^{1/2} (theta - mu) ||^2.
struct PenalizedObjective {
    ModelKind model;
    MiniBatch batch;
    GaussianState prior;

    PenalizedObjective(ModelKind m, MiniBatch b, GaussianState p);

    double value(const Eigen::VectorXd& theta) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
    /// Negated second derivative Omega + F_{t,theta}; PD whenever the prior is.
    Eigen::MatrixXd neg_hessian(const Eigen::VectorXd& theta) const;
};

struct SolverReport {
    int iterations = 0;
    double grad_norm = 0.0;
    int step_halvings = 0;
    bool converged = false;
};

struct VbConfig {
    int mc_draws = 1000;
    int max_iterations = 5000;
    double step_size = 1e-2;
    double step_decay = 0.999;
    double grad_tolerance = 1e-4;
    std::uint64_t seed = 0;
};

struct PmleResult {
    Eigen::VectorXd theta;
    SpdMatrix precision;  // Omega_prior + F_{t, theta_hat}
    SolverReport report;
};

/// Damped Newton on the penalized log-likelihood: full step, halve while the
/// objective decreases (<= 30 halvings), at most 100 iterations. Convergence
/// is per-coordinate: |g_i| <= tol * (1 + |theta_i|).
PmleResult pmle(const PenalizedObjective& obj, const Eigen::VectorXd& init, double tol = 1e-10);

GaussianState laplace(const Eigen::VectorXd& theta_hat, const SpdMatrix& precision_hat);

/// Monte-Carlo ELBO E_Q[L_t] - KL(Q || prior) with `draws` reparameterized
/// samples fixed by `seed`. The Gaussian-linear expectation is evaluated in
/// closed form (no MC noise).
double elbo(const PenalizedObjective& obj, const GaussianState& q, int draws,
            std::uint64_t seed);

/// MC standard error of the E_Q[L_t] estimate used by `elbo` (0 for the
/// closed-form Gaussian-linear path).
double elbo_mc_standard_error(const PenalizedObjective& obj, const GaussianState& q, int draws,
                              std::uint64_t seed);

/// Gradient ascent on the ELBO over (mu, C) with Sigma = C C', using one
/// frozen z-set per fit (common random numbers) so the objective is
/// deterministic and accepted steps are monotone. Stops when the parameter
/// gradient sup-norm drops below cfg.grad_tolerance.
std::pair<GaussianState, SolverReport> vb_fit(const PenalizedObjective& obj, const VbConfig& cfg,
                                              const GaussianState& init);

namespace detail {
/// ELBO and its (mu, C) gradient at the given frozen draws; shared by
/// vb_fit and the gradient tests. Z is p x K.
struct VbParams {
    Eigen::VectorXd mu;
    Eigen::MatrixXd c;  // lower-triangular covariance factor
};
double vb_elbo_at(const PenalizedObjective& obj, const VbParams& par, const Eigen::MatrixXd& z);
void vb_grad_at(const PenalizedObjective& obj, const VbParams& par, const Eigen::MatrixXd& z,
                Eigen::VectorXd& g_mu, Eigen::MatrixXd& g_c);
}  // namespace detail

}  // namespace ovb
