#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ovb/solvers.hpp"

namespace ovb {

struct UpdateMethod {
    enum class Kind { ExactConjugate, Laplace, Variational };

    Kind kind = Kind::Laplace;
    VbConfig vb;

    static UpdateMethod exact_conjugate() { return {Kind::ExactConjugate, {}}; }
    static UpdateMethod laplace_update() { return {Kind::Laplace, {}}; }
    static UpdateMethod variational(VbConfig cfg) { return {Kind::Variational, cfg}; }
};

/// One step of the sequential chain: the new posterior, the pMLE pair it was
/// derived from, and solver bookkeeping.
struct UpdateRecord {
    int t = 0;
    GaussianState posterior;
    Eigen::VectorXd pmle_theta;
    SpdMatrix pmle_precision;  // F-tilde at the pMLE
    SolverReport solver;
    double wall_ms = 0.0;
};

/// Pull-based batch stream; returns nullopt when exhausted. File-backed and
/// synthetic sources share this one engine path.
using BatchSource = std::function<std::optional<MiniBatch>()>;

/// Drives prior -> tilted posterior -> projected posterior over the stream.
/// The posterior at step t becomes the prior at step t+1, bit-identically.
std::vector<UpdateRecord> run_online(const ModelKind& model, BatchSource source,
                                     const GaussianState& prior0, const UpdateMethod& method);

std::vector<UpdateRecord> run_online(const ModelKind& model, const std::vector<MiniBatch>& batches,
                                     const GaussianState& prior0, const UpdateMethod& method);

/// Batch (all data at once) reference quantities. `theta0`, when supplied,
/// replaces the plug-in MLE inside the mle_normal precision; the tag records
/// which variant was used.
struct BatchBaselines {
    Eigen::VectorXd pmle_theta;  // argmax of the penalized pooled log-likelihood
    SpdMatrix pmle_precision;
    Eigen::VectorXd mle_theta;  // unpenalized maximizer
    SpdMatrix mle_precision;
    GaussianState laplace_full;
    GaussianState mle_normal;
    std::string mle_normal_tag;  // "mle_plugin" or "mle_theta0"
};

BatchBaselines batch_baselines(const ModelKind& model, const MiniBatch& all_data,
                               const GaussianState& prior0,
                               const std::optional<Eigen::VectorXd>& theta0 = std::nullopt);

/// Accumulated-error residual: with eta_s the gap between the penalized
/// batch-s log-likelihood and its Gaussian replacement, returns
/// || Ftilde_t^{-1/2} sum_{s<t} grad eta_s(theta) ||_2.
double eta_residual(const ModelKind& model, const std::vector<MiniBatch>& batches,
                    const GaussianState& prior0, const std::vector<UpdateRecord>& records,
                    const Eigen::VectorXd& theta);

/// JSON-lines update log: {t, mu, precision, grad_norm, iterations, wall_ms}.
void write_records_jsonl(const std::vector<UpdateRecord>& records, std::ostream& out);

/// Slices pooled data into equal batches of size n (n must divide the total).
std::vector<MiniBatch> split_batches(const MiniBatch& all_data, int n);

}  // namespace ovb
