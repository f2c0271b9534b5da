#include "ovb/solvers.hpp"

#include <algorithm>
#include <cmath>

#include "ovb/errors.hpp"
#include "ovb/rng.hpp"

namespace ovb {

PenalizedObjective::PenalizedObjective(ModelKind m, MiniBatch b, GaussianState p)
    : model(std::move(m)), batch(std::move(b)), prior(std::move(p)) {
    if (prior.dim() != batch.param_dim()) {
        throw DimensionMismatch("PenalizedObjective: prior dim != model parameter dim");
    }
    validate_responses(model, batch);
}

double PenalizedObjective::value(const Eigen::VectorXd& theta) const {
    return loglik(model, batch, theta) - 0.5 * prior.precision.quadratic_form(theta - prior.mean);
}

Eigen::VectorXd PenalizedObjective::gradient(const Eigen::VectorXd& theta) const {
    return grad(model, batch, theta) - prior.precision.matrix() * (theta - prior.mean);
}

Eigen::MatrixXd PenalizedObjective::neg_hessian(const Eigen::VectorXd& theta) const {
    return prior.precision.matrix() + hessian(model, batch, theta);
}

namespace {

bool coordinate_converged(const Eigen::VectorXd& g, const Eigen::VectorXd& theta, double tol) {
    for (int i = 0; i < g.size(); ++i) {
        if (std::abs(g(i)) > tol * (1.0 + std::abs(theta(i)))) return false;
    }
    return true;
}

}  // namespace

PmleResult pmle(const PenalizedObjective& obj, const Eigen::VectorXd& init, double tol) {
    constexpr int kMaxIter = 100;
    constexpr int kMaxHalvings = 30;

    Eigen::VectorXd theta = init;
    double value = obj.value(theta);
    SolverReport report;

    for (int it = 0; it < kMaxIter; ++it) {
        const Eigen::VectorXd g = obj.gradient(theta);
        report.grad_norm = g.norm();
        if (coordinate_converged(g, theta, tol)) {
            report.converged = true;
            break;
        }
        report.iterations = it + 1;

        Eigen::LLT<Eigen::MatrixXd> llt(obj.neg_hessian(theta));
        if (llt.info() != Eigen::Success) {
            throw NotPositiveDefinite("pmle: Newton system not positive definite");
        }
        const Eigen::VectorXd direction = llt.solve(g);

        // Plateau slack: near the maximum a Newton step may improve the
        // objective by less than one ulp while still contracting the
        // gradient; such steps are accepted.
        const double slack = 1e-14 * (1.0 + std::abs(value));
        double step = 1.0;
        Eigen::VectorXd candidate = theta + direction;
        double cand_value = obj.value(candidate);
        int halvings = 0;
        while (cand_value < value - slack && halvings < kMaxHalvings) {
            step *= 0.5;
            ++halvings;
            candidate = theta + step * direction;
            cand_value = obj.value(candidate);
        }
        report.step_halvings += halvings;
        if (cand_value < value - slack) break;
        theta = std::move(candidate);
        value = std::max(cand_value, value);
    }

    if (!report.converged) {
        const Eigen::VectorXd g = obj.gradient(theta);
        report.grad_norm = g.norm();
        report.converged = coordinate_converged(g, theta, tol);
    }
    SpdMatrix precision(obj.neg_hessian(theta));
    return PmleResult{std::move(theta), std::move(precision), report};
}

GaussianState laplace(const Eigen::VectorXd& theta_hat, const SpdMatrix& precision_hat) {
    return GaussianState(theta_hat, precision_hat);
}

namespace detail {

namespace {

// KL(N(mu, CC') || prior) in covariance-factor form.
double kl_to_prior(const PenalizedObjective& obj, const VbParams& par) {
    const SpdMatrix& omega0 = obj.prior.precision;
    const int p = static_cast<int>(par.mu.size());
    const Eigen::VectorXd d = par.mu - obj.prior.mean;
    const double trace_term = (omega0.matrix() * par.c).cwiseProduct(par.c).sum();
    const double logdet_c = par.c.diagonal().array().log().sum();
    return 0.5 * (trace_term + omega0.quadratic_form(d) - p - omega0.log_det()) - logdet_c;
}

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& eta) {
    const Eigen::ArrayXXd inv = 1.0 / (1.0 + (-eta.abs()).exp());
    return (eta >= 0.0).select(inv, 1.0 - inv);
}

// E_Q[L_t] under the frozen draws (exact for Gaussian-linear).
double expected_loglik(const PenalizedObjective& obj, const VbParams& par,
                       const Eigen::MatrixXd& z) {
    const MiniBatch& batch = obj.batch;
    const int k = static_cast<int>(z.cols());
    switch (obj.model.tag) {
        case ModelKind::Tag::BernoulliIntercept: {
            const double c = par.c(0, 0);
            const Eigen::ArrayXd theta = par.mu(0) + c * z.row(0).transpose().array();
            const double bsum = (theta.max(0.0) + (-theta.abs()).exp().log1p()).sum();
            return (batch.y_sum * theta.sum() - batch.n() * bsum) / k;
        }
        case ModelKind::Tag::Logistic: {
            const Eigen::MatrixXd thetas = par.mu.replicate(1, k) + par.c * z;
            Eigen::ArrayXXd eta;
            if (batch.design) {
                eta = (*batch.design * thetas).array();
            } else {
                eta = thetas.row(0).replicate(batch.n(), 1).array();
            }
            const double bsum = (eta.max(0.0) + (-eta.abs()).exp().log1p()).sum();
            const double ysum = (batch.y.transpose() * eta.matrix()).sum();
            return (ysum - bsum) / k;
        }
        case ModelKind::Tag::GaussianLinear: {
            const double tau = obj.model.noise_precision;
            constexpr double kLog2Pi = 1.8378770664093454836;
            const double norm_const = 0.5 * batch.n() * (std::log(tau) - kLog2Pi);
            if (batch.design) {
                const Eigen::VectorXd r = batch.y - *batch.design * par.mu;
                const double spread = (*batch.design * par.c).squaredNorm();
                return -0.5 * tau * (r.squaredNorm() + spread) + norm_const;
            }
            const Eigen::ArrayXd r = batch.y.array() - par.mu(0);
            const double spread = batch.n() * par.c(0, 0) * par.c(0, 0);
            return -0.5 * tau * (r.square().sum() + spread) + norm_const;
        }
    }
    return 0.0;
}

}  // namespace

double vb_elbo_at(const PenalizedObjective& obj, const VbParams& par, const Eigen::MatrixXd& z) {
    return expected_loglik(obj, par, z) - kl_to_prior(obj, par);
}

void vb_grad_at(const PenalizedObjective& obj, const VbParams& par, const Eigen::MatrixXd& z,
                Eigen::VectorXd& g_mu, Eigen::MatrixXd& g_c) {
    const MiniBatch& batch = obj.batch;
    const int p = static_cast<int>(par.mu.size());
    const int k = static_cast<int>(z.cols());

    g_mu.setZero(p);
    g_c.setZero(p, p);

    switch (obj.model.tag) {
        case ModelKind::Tag::BernoulliIntercept: {
            const double c = par.c(0, 0);
            const Eigen::ArrayXd zr = z.row(0).transpose().array();
            const Eigen::ArrayXd theta = par.mu(0) + c * zr;
            const Eigen::ArrayXd e = (-theta.abs()).exp();
            const Eigen::ArrayXd inv = 1.0 / (1.0 + e);
            const Eigen::ArrayXd mu_fit = (theta >= 0.0).select(inv, 1.0 - inv);
            const Eigen::ArrayXd w = batch.y_sum - batch.n() * mu_fit;
            g_mu(0) = w.mean();
            g_c(0, 0) = (w * zr).mean();
            break;
        }
        case ModelKind::Tag::Logistic: {
            const Eigen::MatrixXd thetas = par.mu.replicate(1, k) + par.c * z;
            Eigen::ArrayXXd eta;
            if (batch.design) {
                eta = (*batch.design * thetas).array();
            } else {
                eta = thetas.row(0).replicate(batch.n(), 1).array();
            }
            const Eigen::MatrixXd resid =
                (batch.y.replicate(1, k).array() - sigmoid(eta)).matrix();
            Eigen::MatrixXd scores;  // p x k, one score per draw
            if (batch.design) {
                scores = batch.design->transpose() * resid;
            } else {
                scores = resid.colwise().sum();
            }
            g_mu = scores.rowwise().mean();
            g_c = (scores * z.transpose()) / static_cast<double>(k);
            break;
        }
        case ModelKind::Tag::GaussianLinear: {
            const double tau = obj.model.noise_precision;
            if (batch.design) {
                g_mu = tau * (batch.design->transpose() * (batch.y - *batch.design * par.mu));
                g_c = -tau * (batch.design->transpose() * (*batch.design * par.c));
            } else {
                g_mu(0) = tau * (batch.y_sum - batch.n() * par.mu(0));
                g_c(0, 0) = -tau * batch.n() * par.c(0, 0);
            }
            break;
        }
    }

    // KL part: -Omega0 (mu - mu0); -Omega0 C + C^{-T} restricted to the
    // lower triangle, with diag(C^{-T}) = 1/C_ii.
    g_mu -= obj.prior.precision.matrix() * (par.mu - obj.prior.mean);
    g_c -= obj.prior.precision.matrix() * par.c;
    for (int i = 0; i < p; ++i) g_c(i, i) += 1.0 / par.c(i, i);
    g_c = g_c.triangularView<Eigen::Lower>();
}

}  // namespace detail

namespace {

Eigen::MatrixXd frozen_draws(int p, int k, std::uint64_t seed) {
    RngStream rng(seed);
    Eigen::MatrixXd z(p, k);
    for (int j = 0; j < k; ++j) {
        for (int i = 0; i < p; ++i) z(i, j) = rng.next_normal();
    }
    return z;
}

Eigen::MatrixXd covariance_factor(const GaussianState& q) {
    const int p = q.dim();
    const Eigen::MatrixXd sigma = q.precision.inverse();
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (sigma + sigma.transpose()));
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite("vb_fit: initial covariance not positive definite");
    }
    return llt.matrixL();
}

}  // namespace

double elbo(const PenalizedObjective& obj, const GaussianState& q, int draws,
            std::uint64_t seed) {
    if (q.dim() != obj.prior.dim()) {
        throw DimensionMismatch("elbo: state dim != objective dim");
    }
    if (draws < 1) {
        throw DimensionMismatch("elbo: draws must be >= 1");
    }
    if (obj.model.tag == ModelKind::Tag::GaussianLinear) {
        detail::VbParams par{q.mean, covariance_factor(q)};
        return detail::vb_elbo_at(obj, par, Eigen::MatrixXd::Zero(q.dim(), 1));
    }
    RngStream rng(seed);
    Eigen::VectorXd z(q.dim());
    double acc = 0.0;
    for (int i = 0; i < draws; ++i) {
        for (int j = 0; j < q.dim(); ++j) z(j) = rng.next_normal();
        acc += loglik(obj.model, obj.batch, q.mean + q.precision.chol_transpose_solve(z));
    }
    return acc / draws - gaussian_kl(q, obj.prior);
}

double elbo_mc_standard_error(const PenalizedObjective& obj, const GaussianState& q, int draws,
                              std::uint64_t seed) {
    if (obj.model.tag == ModelKind::Tag::GaussianLinear) return 0.0;
    RngStream rng(seed);
    Eigen::VectorXd z(q.dim());
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < draws; ++i) {
        for (int j = 0; j < q.dim(); ++j) z(j) = rng.next_normal();
        const double v = loglik(obj.model, obj.batch, q.mean + q.precision.chol_transpose_solve(z));
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / draws;
    const double var = std::max(sumsq / draws - mean * mean, 0.0);
    return std::sqrt(var / draws);
}

std::pair<GaussianState, SolverReport> vb_fit(const PenalizedObjective& obj, const VbConfig& cfg,
                                              const GaussianState& init) {
    if (cfg.mc_draws < 1) {
        throw DimensionMismatch("vb_fit: mc_draws must be >= 1");
    }
    const int p = init.dim();
    if (p != obj.prior.dim()) {
        throw DimensionMismatch("vb_fit: init dim != objective dim");
    }

    const bool exact = obj.model.tag == ModelKind::Tag::GaussianLinear;
    const Eigen::MatrixXd z =
        exact ? Eigen::MatrixXd::Zero(p, 1) : frozen_draws(p, cfg.mc_draws, cfg.seed);

    detail::VbParams par{init.mean, covariance_factor(init)};
    double cur = detail::vb_elbo_at(obj, par, z);

    SolverReport report;
    Eigen::VectorXd g_mu(p);
    Eigen::MatrixXd g_c(p, p);
    double last_step = cfg.step_size;
    double decayed = cfg.step_size;

    constexpr int kMaxHalvings = 30;
    constexpr double kDiagFloor = 1e-8;

    for (int it = 0; it < cfg.max_iterations; ++it) {
        detail::vb_grad_at(obj, par, z, g_mu, g_c);
        const double gsup = std::max(g_mu.cwiseAbs().maxCoeff(), g_c.cwiseAbs().maxCoeff());
        report.grad_norm = gsup;
        if (gsup <= cfg.grad_tolerance) {
            report.converged = true;
            break;
        }
        report.iterations = it + 1;

        double step = std::min(decayed, 2.0 * last_step);
        decayed *= cfg.step_decay;

        bool accepted = false;
        for (int h = 0; h <= kMaxHalvings; ++h) {
            detail::VbParams cand{par.mu + step * g_mu, par.c + step * g_c};
            for (int i = 0; i < p; ++i) {
                if (cand.c(i, i) < kDiagFloor) cand.c(i, i) = kDiagFloor;
            }
            const double cand_elbo = detail::vb_elbo_at(obj, cand, z);
            if (cand_elbo > cur) {
                par = std::move(cand);
                cur = cand_elbo;
                last_step = step;
                accepted = true;
                break;
            }
            step *= 0.5;
            ++report.step_halvings;
        }
        if (!accepted) break;  // no improving step at any scale: stationary up to rounding
    }

    if (!report.converged) {
        detail::vb_grad_at(obj, par, z, g_mu, g_c);
        report.grad_norm = std::max(g_mu.cwiseAbs().maxCoeff(), g_c.cwiseAbs().maxCoeff());
        report.converged = report.grad_norm <= cfg.grad_tolerance;
    }

    // Sigma = CC'; return the precision (CC')^{-1}, re-symmetrized.
    const Eigen::MatrixXd sigma = par.c * par.c.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite("vb_fit: covariance factor collapsed");
    }
    Eigen::MatrixXd omega = llt.solve(Eigen::MatrixXd::Identity(p, p));
    omega = 0.5 * (omega + omega.transpose());
    return {GaussianState(par.mu, SpdMatrix(omega)), report};
}

}  // namespace ovb
