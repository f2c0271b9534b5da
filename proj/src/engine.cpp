#include "ovb/engine.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "ovb/errors.hpp"
#include "ovb/json_util.hpp"
#include "ovb/rng.hpp"

namespace ovb {

namespace {

std::uint64_t step_seed(std::uint64_t base, int t) {
    return RngStream::from_key({base, 0x5653544550ULL, static_cast<std::uint64_t>(t)}).next_u64();
}

}  // namespace

std::vector<UpdateRecord> run_online(const ModelKind& model, BatchSource source,
                                     const GaussianState& prior0, const UpdateMethod& method) {
    if (method.kind == UpdateMethod::Kind::ExactConjugate &&
        model.tag != ModelKind::Tag::GaussianLinear) {
        throw DimensionMismatch("run_online: ExactConjugate requires the Gaussian-linear model");
    }

    std::vector<UpdateRecord> records;
    GaussianState prior = prior0;
    int t = 0;
    while (auto batch = source()) {
        ++t;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            PenalizedObjective obj(model, std::move(*batch), prior);
            PmleResult fit = pmle(obj, prior.mean);

            GaussianState posterior = [&]() -> GaussianState {
                switch (method.kind) {
                    case UpdateMethod::Kind::ExactConjugate:
                        return conjugate_posterior(model.noise_precision, obj.batch, prior);
                    case UpdateMethod::Kind::Laplace:
                        return laplace(fit.theta, fit.precision);
                    case UpdateMethod::Kind::Variational: {
                        VbConfig cfg = method.vb;
                        cfg.seed = step_seed(method.vb.seed, t);
                        auto [state, vb_report] = vb_fit(obj, cfg, laplace(fit.theta, fit.precision));
                        fit.report.iterations += vb_report.iterations;
                        fit.report.step_halvings += vb_report.step_halvings;
                        fit.report.grad_norm = vb_report.grad_norm;
                        fit.report.converged = fit.report.converged && vb_report.converged;
                        return state;
                    }
                }
                throw std::logic_error("run_online: unknown update method");
            }();

            const auto t1 = std::chrono::steady_clock::now();
            const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            records.push_back(UpdateRecord{t, posterior, std::move(fit.theta),
                                           std::move(fit.precision), fit.report, ms});
            prior = std::move(posterior);
        } catch (const NotPositiveDefinite& e) {
            throw NotPositiveDefinite("step " + std::to_string(t) + ": " + e.what());
        } catch (const DimensionMismatch& e) {
            throw DimensionMismatch("step " + std::to_string(t) + ": " + e.what());
        }
    }
    return records;
}

std::vector<UpdateRecord> run_online(const ModelKind& model, const std::vector<MiniBatch>& batches,
                                     const GaussianState& prior0, const UpdateMethod& method) {
    std::size_t next = 0;
    BatchSource source = [&batches, &next]() -> std::optional<MiniBatch> {
        if (next >= batches.size()) return std::nullopt;
        return batches[next++];
    };
    return run_online(model, source, prior0, method);
}

namespace {

// Damped Newton on the unpenalized pooled log-likelihood. Diverging iterates
// with a non-vanishing gradient indicate separation.
std::pair<Eigen::VectorXd, SpdMatrix> newton_mle(const ModelKind& model, const MiniBatch& data,
                                                 const Eigen::VectorXd& init, double tol) {
    constexpr int kMaxIter = 100;
    constexpr int kMaxHalvings = 30;
    constexpr double kDivergenceRadius = 1e3;

    Eigen::VectorXd theta = init;
    double value = loglik(model, data, theta);
    bool converged = false;

    for (int it = 0; it < kMaxIter; ++it) {
        const Eigen::VectorXd g = grad(model, data, theta);
        if (g.norm() <= tol) {
            converged = true;
            break;
        }
        if (theta.norm() > kDivergenceRadius) break;

        Eigen::LLT<Eigen::MatrixXd> llt(hessian(model, data, theta));
        if (llt.info() != Eigen::Success) {
            throw SeparationDetected("newton_mle: Hessian singular (separated or rank-deficient)");
        }
        const Eigen::VectorXd direction = llt.solve(g);

        double step = 1.0;
        Eigen::VectorXd candidate = theta + direction;
        double cand_value = loglik(model, data, candidate);
        int halvings = 0;
        while (cand_value < value && halvings < kMaxHalvings) {
            step *= 0.5;
            ++halvings;
            candidate = theta + step * direction;
            cand_value = loglik(model, data, candidate);
        }
        if (cand_value < value) break;
        theta = std::move(candidate);
        value = cand_value;
    }

    if (!converged) {
        const double gnorm = grad(model, data, theta).norm();
        if (gnorm > tol && theta.norm() > kDivergenceRadius) {
            throw SeparationDetected("newton_mle: iterate diverged with gradient " +
                                     std::to_string(gnorm));
        }
        if (gnorm > tol) {
            throw NoConvergence("newton_mle: gradient " + std::to_string(gnorm) +
                                " above tolerance");
        }
    }

    const Eigen::MatrixXd info = hessian(model, data, theta);
    if (model.is_binary()) {
        // Separated fits satisfy the score equation in the flat tail where
        // the observed information collapses; compare it against the
        // theta = 0 information scale.
        try {
            const SpdMatrix v(score_matrix_V(model, data));
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v.whiten(info),
                                                              Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < 1e-6) {
                throw SeparationDetected(
                    "newton_mle: observed information degenerate at the fit (separated data)");
            }
        } catch (const NotPositiveDefinite&) {
            throw SeparationDetected("newton_mle: design rank-deficient");
        }
    }
    return {theta, SpdMatrix(info)};
}

}  // namespace

BatchBaselines batch_baselines(const ModelKind& model, const MiniBatch& all_data,
                               const GaussianState& prior0,
                               const std::optional<Eigen::VectorXd>& theta0) {
    PenalizedObjective obj(model, all_data, prior0);
    PmleResult penalized = pmle(obj, prior0.mean);
    if (!penalized.report.converged) {
        throw NoConvergence("batch_baselines: pooled pMLE did not converge");
    }

    auto [mle_theta, mle_precision] = newton_mle(model, all_data, prior0.mean, 1e-8);

    GaussianState laplace_full(penalized.theta, penalized.precision);
    std::string tag = "mle_plugin";
    SpdMatrix normal_precision = mle_precision;
    if (theta0) {
        normal_precision = SpdMatrix(hessian(model, all_data, *theta0));
        tag = "mle_theta0";
    }
    GaussianState mle_normal(mle_theta, normal_precision);

    return BatchBaselines{std::move(penalized.theta), std::move(penalized.precision),
                          std::move(mle_theta),       std::move(mle_precision),
                          std::move(laplace_full),    std::move(mle_normal),
                          std::move(tag)};
}

double eta_residual(const ModelKind& model, const std::vector<MiniBatch>& batches,
                    const GaussianState& prior0, const std::vector<UpdateRecord>& records,
                    const Eigen::VectorXd& theta) {
    if (records.size() > batches.size()) {
        throw DimensionMismatch("eta_residual: more records than batches");
    }
    const std::size_t t = records.size();
    if (t <= 1) return 0.0;
    if (theta.size() != records.front().posterior.dim()) {
        throw DimensionMismatch("eta_residual: theta dimension mismatch");
    }

    Eigen::VectorXd total = Eigen::VectorXd::Zero(theta.size());
    const GaussianState* prior = &prior0;
    for (std::size_t s = 0; s + 1 < t; ++s) {
        const GaussianState& post = records[s].posterior;
        // grad eta_s = grad Ltilde_s + Omega_s (theta - mu_s)
        total += grad(model, batches[s], theta);
        total -= prior->precision.matrix() * (theta - prior->mean);
        total += post.precision.matrix() * (theta - post.mean);
        prior = &post;
    }
    const SpdMatrix& ftilde = records[t - 1].pmle_precision;
    return std::sqrt(std::max(ftilde.solve(total).dot(total), 0.0));
}

void write_records_jsonl(const std::vector<UpdateRecord>& records, std::ostream& out) {
    for (const auto& r : records) {
        out << "{\"t\":" << r.t << ",\"mu\":" << json_array(r.posterior.mean)
            << ",\"precision\":" << json_matrix(r.posterior.precision.matrix())
            << ",\"grad_norm\":" << json_number(r.solver.grad_norm)
            << ",\"iterations\":" << r.solver.iterations
            << ",\"wall_ms\":" << json_number(r.wall_ms) << "}\n";
    }
}

std::vector<MiniBatch> split_batches(const MiniBatch& all_data, int n) {
    const int total = all_data.n();
    if (n < 1 || total % n != 0) {
        throw DimensionMismatch("split_batches: batch size must divide the sample size");
    }
    std::vector<MiniBatch> out;
    out.reserve(static_cast<std::size_t>(total / n));
    for (int start = 0; start < total; start += n) {
        Eigen::VectorXd y = all_data.y.segment(start, n);
        if (all_data.design) {
            out.emplace_back(std::move(y), all_data.design->middleRows(start, n));
        } else {
            out.emplace_back(std::move(y));
        }
    }
    return out;
}

}  // namespace ovb
