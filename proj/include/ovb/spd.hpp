#pragma once

#include <Eigen/Dense>

#include "ovb/errors.hpp"

namespace ovb {

/// Dense symmetric positive definite matrix with its lower Cholesky factor
/// computed once at construction. Immutable afterwards; all whitening,
/// solves and log-determinants go through the cached factor.
///
/// Construction enforces symmetry to 1e-12 relative tolerance and rejects
/// Cholesky pivots below 1e-12 * (trace/dim), a scale-aware degeneracy cut.
class SpdMatrix {
public:
    explicit SpdMatrix(const Eigen::MatrixXd& m);

    int dim() const { return static_cast<int>(m_.rows()); }
    const Eigen::MatrixXd& matrix() const { return m_; }
    const Eigen::MatrixXd& chol_lower() const { return chol_; }

    double log_det() const;

    /// M^{-1} b via the factor.
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;

    /// Dense M^{-1} (materialized through the factor).
    Eigen::MatrixXd inverse() const;

    /// L^{-T} z, the map that turns standard normals into draws with
    /// covariance M^{-1}.
    Eigen::VectorXd chol_transpose_solve(const Eigen::VectorXd& z) const;

    /// v' M v  (squared M-norm of v).
    double quadratic_form(const Eigen::VectorXd& v) const;

    /// L^{-1} B L^{-T}: similar to M^{-1/2} B M^{-1/2} up to an orthogonal
    /// conjugation, so Frobenius norms, traces and eigenvalues agree.
    Eigen::MatrixXd whiten(const Eigen::MatrixXd& b) const;

    double lambda_min() const;

    double trace() const { return m_.trace(); }

private:
    Eigen::MatrixXd m_;
    Eigen::MatrixXd chol_;
};

}  // namespace ovb
