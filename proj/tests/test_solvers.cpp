#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ovb/errors.hpp"
#include "ovb/rng.hpp"
#include "ovb/solvers.hpp"
#include "oracles.hpp"

using namespace ovb;

namespace {

GaussianState prior_1d(double mean, double variance) {
    Eigen::VectorXd mu(1);
    mu << mean;
    Eigen::MatrixXd omega(1, 1);
    omega << 1.0 / variance;
    return GaussianState(mu, SpdMatrix(omega));
}

MiniBatch bernoulli_batch(int n, int successes) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < successes; ++i) y(i) = 1.0;
    return MiniBatch(y);
}

MiniBatch random_gaussian_batch(int n, int p, double tau, const Eigen::VectorXd& theta,
                                RngStream& rng) {
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    const double sd = 1.0 / std::sqrt(tau);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) x(i, j) = rng.next_normal();
        y(i) = x.row(i).dot(theta) + sd * rng.next_normal();
    }
    return MiniBatch(std::move(y), std::move(x));
}

MiniBatch random_logistic_batch(int n, int p, const Eigen::VectorXd& theta, RngStream& rng) {
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) x(i, j) = rng.next_normal();
        y(i) = rng.next_uniform() <= logistic_b1(x.row(i).dot(theta)) ? 1.0 : 0.0;
    }
    return MiniBatch(std::move(y), std::move(x));
}

}  // namespace

TEST_CASE("pmle: one Newton step recovers the conjugate posterior") {
    RngStream rng(2);
    const int p = 3;
    Eigen::VectorXd theta_true(p);
    theta_true << 0.4, -0.2, 0.1;
    const double tau = 1.5;
    const auto batch = random_gaussian_batch(40, p, tau, theta_true, rng);

    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(p);
    GaussianState prior(mu0, SpdMatrix(Eigen::MatrixXd::Identity(p, p)));
    PenalizedObjective obj(ModelKind::gaussian_linear(tau), batch, prior);
    const auto fit = pmle(obj, mu0, 1e-10);
    CHECK(fit.report.converged);
    CHECK(fit.report.iterations <= 2);

    const auto exact = conjugate_posterior(tau, batch, prior);
    CHECK((fit.theta - exact.mean).norm() <= 1e-10);
    CHECK((fit.precision.matrix() - exact.precision.matrix()).norm() /
              exact.precision.matrix().norm() <=
          1e-10);
}

TEST_CASE("pmle: balanced Bernoulli with centered prior lands on zero") {
    const auto batch = bernoulli_batch(10, 5);
    GaussianState prior = prior_1d(0.0, 9.0);
    PenalizedObjective obj(ModelKind::bernoulli_intercept(), batch, prior);
    const auto fit = pmle(obj, Eigen::VectorXd::Zero(1), 1e-10);
    CHECK(fit.report.converged);
    CHECK(std::abs(fit.theta(0)) <= 1e-8);
}

TEST_CASE("pmle: matches the 1-d bisection root of the penalized score") {
    const auto batch = bernoulli_batch(10, 7);
    GaussianState prior = prior_1d(0.0, 9.0);
    PenalizedObjective obj(ModelKind::bernoulli_intercept(), batch, prior);
    const auto fit = pmle(obj, Eigen::VectorXd::Zero(1), 1e-12);
    CHECK(fit.report.converged);

    const double root = oracle::bisect(
        [](double t) { return 7.0 - 10.0 * logistic_b1(t) - t / 9.0; }, -5.0, 5.0, 1e-14);
    CHECK(fit.theta(0) == doctest::Approx(root).epsilon(1e-8));

    // First-order condition of the penalized objective.
    CHECK(std::abs(obj.gradient(fit.theta)(0)) <= 1e-10);
}

TEST_CASE("pmle: monotone objective over accepted iterations") {
    RngStream rng(27);
    Eigen::VectorXd theta_true(2);
    theta_true << 1.0, -1.5;
    const auto batch = random_logistic_batch(50, 2, theta_true, rng);
    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(2);
    GaussianState prior(mu0, SpdMatrix(Eigen::MatrixXd::Identity(2, 2) * 0.1));
    PenalizedObjective obj(ModelKind::logistic(), batch, prior);

    // Extreme init exercises the damping path and must still converge.
    Eigen::VectorXd far(2);
    far << 40.0, -35.0;
    const auto fit = pmle(obj, far, 1e-10);
    CHECK(fit.report.converged);
    CHECK(obj.gradient(fit.theta).norm() <= 1e-8);
    CHECK(obj.value(fit.theta) >= obj.value(far));
}

TEST_CASE("laplace: conjugate model gives the exact posterior") {
    RngStream rng(31);
    Eigen::VectorXd theta_true(2);
    theta_true << 0.25, 0.5;
    const double tau = 2.0;
    const auto batch = random_gaussian_batch(25, 2, tau, theta_true, rng);
    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(2);
    GaussianState prior(mu0, SpdMatrix(Eigen::MatrixXd::Identity(2, 2)));
    PenalizedObjective obj(ModelKind::gaussian_linear(tau), batch, prior);
    const auto fit = pmle(obj, mu0);
    const auto la = laplace(fit.theta, fit.precision);
    const auto exact = conjugate_posterior(tau, batch, prior);
    CHECK(gaussian_kl(la, exact) <= 1e-16);
}

TEST_CASE("laplace: Bernoulli information anchor") {
    const auto batch = bernoulli_batch(1000, 500);
    GaussianState prior = prior_1d(0.0, 9.0);
    PenalizedObjective obj(ModelKind::bernoulli_intercept(), batch, prior);
    const auto fit = pmle(obj, Eigen::VectorXd::Zero(1));
    const auto la = laplace(fit.theta, fit.precision);
    CHECK(la.precision.matrix()(0, 0) == doctest::Approx(1.0 / 9.0 + 250.0).epsilon(1e-9));
}

TEST_CASE("elbo: determinism and conjugate anchor") {
    RngStream rng(37);
    const double tau = 1.0;
    Eigen::VectorXd theta_true(1);
    theta_true << 0.3;
    const auto batch = random_gaussian_batch(30, 1, tau, theta_true, rng);
    GaussianState prior = prior_1d(0.0, 4.0);
    PenalizedObjective obj(ModelKind::gaussian_linear(tau), batch, prior);
    const auto post = conjugate_posterior(tau, batch, prior);

    // At the exact posterior the ELBO equals the log marginal likelihood;
    // perturbing the state can only lower it.
    const double at_post = elbo(obj, post, 100, 1);
    GaussianState shifted = post;
    shifted.mean(0) += 0.2;
    CHECK(elbo(obj, shifted, 100, 1) < at_post);
    GaussianState widened(post.mean,
                          SpdMatrix(post.precision.matrix() * 0.5));
    CHECK(elbo(obj, widened, 100, 1) < at_post);

    // Logistic path: fixed seed means identical values on repeat calls.
    const auto lbatch = bernoulli_batch(20, 12);
    PenalizedObjective lobj(ModelKind::bernoulli_intercept(), lbatch, prior);
    const double e1 = elbo(lobj, post, 500, 99);
    const double e2 = elbo(lobj, post, 500, 99);
    CHECK(e1 == e2);
}

TEST_CASE("elbo: MC estimate within 3 SE of a bigger-draw oracle") {
    const auto batch = bernoulli_batch(40, 26);
    GaussianState prior = prior_1d(0.0, 9.0);
    PenalizedObjective obj(ModelKind::bernoulli_intercept(), batch, prior);
    const GaussianState q = prior_1d(0.4, 0.05);

    const double small = elbo(obj, q, 100000, 5);
    const double big = elbo(obj, q, 1000000, 6);
    const double se = elbo_mc_standard_error(obj, q, 100000, 5);
    CHECK(std::abs(small - big) <= 3.0 * se + 1e-12);
}

TEST_CASE("vb reparameterization gradient matches finite differences (exact ELBO)") {
    RngStream rng(43);
    const double tau = 1.3;
    Eigen::VectorXd theta_true(2);
    theta_true << 0.5, -0.4;
    const auto batch = random_gaussian_batch(20, 2, tau, theta_true, rng);
    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(2);
    GaussianState prior(mu0, SpdMatrix(Eigen::MatrixXd::Identity(2, 2)));
    PenalizedObjective obj(ModelKind::gaussian_linear(tau), batch, prior);

    detail::VbParams par;
    par.mu = Eigen::VectorXd::Zero(2);
    par.mu << 0.3, -0.2;
    par.c = Eigen::MatrixXd::Zero(2, 2);
    par.c << 0.8, 0.0, -0.1, 0.6;
    const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 1);

    Eigen::VectorXd g_mu;
    Eigen::MatrixXd g_c;
    detail::vb_grad_at(obj, par, z, g_mu, g_c);

    const auto f_mu = [&](const Eigen::VectorXd& m) {
        detail::VbParams p2{m, par.c};
        return detail::vb_elbo_at(obj, p2, z);
    };
    const Eigen::VectorXd fd_mu = oracle::fd_gradient(f_mu, par.mu);
    CHECK((g_mu - fd_mu).norm() <= 1e-5 * std::max(1.0, fd_mu.norm()));

    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j <= i; ++j) {
            const auto f_c = [&](double v) {
                detail::VbParams p2 = par;
                p2.c(i, j) = v;
                return detail::vb_elbo_at(obj, p2, z);
            };
            const double h = 1e-6;
            const double fd = (f_c(par.c(i, j) + h) - f_c(par.c(i, j) - h)) / (2.0 * h);
            CHECK(g_c(i, j) == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("vb_fit: conjugate model recovers the exact posterior") {
    RngStream rng(47);
    const double tau = 1.0;
    Eigen::VectorXd theta_true(2);
    theta_true << 0.6, -0.3;
    const auto batch = random_gaussian_batch(50, 2, tau, theta_true, rng);
    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(2);
    GaussianState prior(mu0, SpdMatrix(Eigen::MatrixXd::Identity(2, 2)));
    PenalizedObjective obj(ModelKind::gaussian_linear(tau), batch, prior);
    const auto exact = conjugate_posterior(tau, batch, prior);

    VbConfig cfg;
    cfg.seed = 3;
    const auto [state, report] = vb_fit(obj, cfg, prior);
    CHECK(report.converged);
    CHECK((state.mean - exact.mean).norm() <= 1e-4);
    CHECK(delta_metric(state, exact) <= 1e-3);
}

TEST_CASE("vb_fit: dominates Laplace in ELBO and tracks it in delta") {
    Eigen::VectorXd theta_true(1);
    theta_true << 0.4;
    GaussianState prior = prior_1d(0.0, 9.0);

    // The VB/Laplace gap is MC-noisy at finite draw counts, so the scaling
    // sweep compares medians over seeds with a larger frozen z-set.
    auto median_delta = [&](int n, bool check_elbo) {
        std::vector<double> deltas;
        for (int rep = 0; rep < 11; ++rep) {
            RngStream rng(53 + 100 * static_cast<std::uint64_t>(rep));
            const auto batch = random_logistic_batch(n, 1, theta_true, rng);
            PenalizedObjective obj(ModelKind::bernoulli_intercept(),
                                   MiniBatch(batch.y), prior);
            const auto fit = pmle(obj, Eigen::VectorXd::Zero(1));
            const auto la = laplace(fit.theta, fit.precision);
            VbConfig cfg;
            cfg.mc_draws = 4000;
            cfg.seed = 1000 + static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(rep);
            const auto [state, report] = vb_fit(obj, cfg, la);
            const double delta = delta_metric(state, la);
            CHECK(delta <= 0.2);
            deltas.push_back(delta);
            if (check_elbo && rep == 0) {
                const double e_vb = elbo(obj, state, 50000, 7);
                const double e_la = elbo(obj, la, 50000, 7);
                const double se = elbo_mc_standard_error(obj, la, 50000, 7);
                CHECK(e_vb >= e_la - 3.0 * se);
            }
        }
        std::sort(deltas.begin(), deltas.end());
        return deltas[5];
    };
    const double d_small = median_delta(100, true);
    const double d_big = median_delta(1600, false);
    CHECK(d_big < d_small);
}

TEST_CASE("vb_fit: diagnostics fields are sane") {
    const auto batch = bernoulli_batch(100, 55);
    GaussianState prior = prior_1d(0.0, 9.0);
    PenalizedObjective obj(ModelKind::bernoulli_intercept(), batch, prior);
    const auto fit = pmle(obj, Eigen::VectorXd::Zero(1));
    VbConfig cfg;
    cfg.seed = 11;
    const auto [state, report] = vb_fit(obj, cfg, laplace(fit.theta, fit.precision));
    CHECK(report.converged);
    CHECK(report.grad_norm <= cfg.grad_tolerance);
    CHECK(state.precision.matrix()(0, 0) > 0.0);
}
