#include "ovb/spd.hpp"

#include <cmath>
#include <string>

namespace ovb {

namespace {

void check_symmetry(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) {
        throw DimensionMismatch("SpdMatrix: matrix is not square");
    }
    const double scale = m.cwiseAbs().maxCoeff();
    const double tol = 1e-12 * (scale > 0.0 ? scale : 1.0);
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > tol) {
        throw NotPositiveDefinite("SpdMatrix: matrix asymmetric beyond 1e-12 relative tolerance");
    }
}

}  // namespace

SpdMatrix::SpdMatrix(const Eigen::MatrixXd& m) {
    check_symmetry(m);
    m_ = 0.5 * (m + m.transpose());

    Eigen::LLT<Eigen::MatrixXd> llt(m_);
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite("SpdMatrix: Cholesky failed (pivot <= 0)");
    }
    chol_ = llt.matrixL();

    const double pivot_floor = 1e-12 * (m_.trace() / static_cast<double>(m_.rows()));
    for (int j = 0; j < chol_.rows(); ++j) {
        const double pivot = chol_(j, j) * chol_(j, j);
        if (!(pivot > pivot_floor)) {
            throw NotPositiveDefinite("SpdMatrix: pivot " + std::to_string(j) +
                                      " below scale-aware floor");
        }
    }
}

double SpdMatrix::log_det() const {
    return 2.0 * chol_.diagonal().array().log().sum();
}

Eigen::VectorXd SpdMatrix::solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd y = chol_.triangularView<Eigen::Lower>().solve(b);
    return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd SpdMatrix::solve(const Eigen::MatrixXd& b) const {
    Eigen::MatrixXd y = chol_.triangularView<Eigen::Lower>().solve(b);
    return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd SpdMatrix::inverse() const {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m_.rows(), m_.cols());
    return solve(eye);
}

Eigen::VectorXd SpdMatrix::chol_transpose_solve(const Eigen::VectorXd& z) const {
    return chol_.transpose().triangularView<Eigen::Upper>().solve(z);
}

double SpdMatrix::quadratic_form(const Eigen::VectorXd& v) const {
    if (v.size() != m_.rows()) {
        throw DimensionMismatch("SpdMatrix::quadratic_form: size mismatch");
    }
    return (chol_.transpose() * v).squaredNorm();
}

Eigen::MatrixXd SpdMatrix::whiten(const Eigen::MatrixXd& b) const {
    Eigen::MatrixXd half = chol_.triangularView<Eigen::Lower>().solve(b);
    return chol_.triangularView<Eigen::Lower>().solve(half.transpose()).transpose();
}

double SpdMatrix::lambda_min() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace ovb
