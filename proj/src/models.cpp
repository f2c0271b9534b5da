#include "ovb/models.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "ovb/errors.hpp"

namespace ovb {

MiniBatch::MiniBatch(Eigen::VectorXd responses, std::optional<Eigen::MatrixXd> x)
    : y(std::move(responses)), design(std::move(x)) {
    if (y.size() < 1) {
        throw DimensionMismatch("MiniBatch: needs at least one observation");
    }
    if (design && design->rows() != y.size()) {
        throw DimensionMismatch("MiniBatch: design row count != response count");
    }
    y_sum = y.sum();
}

ModelKind ModelKind::gaussian_linear(double tau) {
    if (!(tau > 0.0)) {
        throw DimensionMismatch("ModelKind: Gaussian-linear noise precision must be > 0");
    }
    return {Tag::GaussianLinear, tau};
}

double logistic_b(double eta) {
    if (eta > 30.0) return eta + std::log1p(std::exp(-eta));
    if (eta < -30.0) return std::log1p(std::exp(eta));
    return std::log1p(std::exp(eta));
}

double logistic_b1(double eta) {
    if (eta >= 0.0) {
        return 1.0 / (1.0 + std::exp(-eta));
    }
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double logistic_b2(double eta) {
    const double e = std::exp(-std::abs(eta));
    const double d = 1.0 + e;
    return e / (d * d);
}

void validate_responses(const ModelKind& model, const MiniBatch& batch) {
    if (!model.is_binary()) return;
    for (int i = 0; i < batch.n(); ++i) {
        const double v = batch.y(i);
        if (v != 0.0 && v != 1.0) {
            throw DimensionMismatch("binary model: responses must lie in {0,1}");
        }
    }
}

namespace {

void check_theta_dim(const MiniBatch& batch, const Eigen::VectorXd& theta) {
    if (theta.size() != batch.param_dim()) {
        throw DimensionMismatch("theta length != design column count");
    }
}

Eigen::VectorXd linear_predictor(const MiniBatch& batch, const Eigen::VectorXd& theta) {
    if (batch.design) return *batch.design * theta;
    return Eigen::VectorXd::Constant(batch.n(), theta(0));
}

}  // namespace

double loglik(const ModelKind& model, const MiniBatch& batch, const Eigen::VectorXd& theta) {
    check_theta_dim(batch, theta);
    switch (model.tag) {
        case ModelKind::Tag::BernoulliIntercept: {
            if (batch.design) {
                throw DimensionMismatch("BernoulliIntercept: batch must be intercept-only");
            }
            const double t = theta(0);
            return batch.y_sum * t - batch.n() * logistic_b(t);
        }
        case ModelKind::Tag::Logistic: {
            const Eigen::ArrayXd eta = linear_predictor(batch, theta).array();
            // b(eta) = max(eta,0) + log1p(exp(-|eta|)), branch-free and
            // overflow-safe for the whole double range.
            const double bsum = (eta.max(0.0) + (-eta.abs()).exp().log1p()).sum();
            return (batch.y.array() * eta).sum() - bsum;
        }
        case ModelKind::Tag::GaussianLinear: {
            const Eigen::VectorXd r = batch.y - linear_predictor(batch, theta);
            const double tau = model.noise_precision;
            constexpr double kLog2Pi = 1.8378770664093454836;
            return -0.5 * tau * r.squaredNorm() + 0.5 * batch.n() * (std::log(tau) - kLog2Pi);
        }
    }
    return 0.0;
}

Eigen::VectorXd grad(const ModelKind& model, const MiniBatch& batch,
                     const Eigen::VectorXd& theta) {
    check_theta_dim(batch, theta);
    switch (model.tag) {
        case ModelKind::Tag::BernoulliIntercept: {
            Eigen::VectorXd g(1);
            g(0) = batch.y_sum - batch.n() * logistic_b1(theta(0));
            return g;
        }
        case ModelKind::Tag::Logistic: {
            const Eigen::ArrayXd eta = linear_predictor(batch, theta).array();
            const Eigen::ArrayXd pos = (1.0 + (-eta.abs()).exp());
            const Eigen::ArrayXd mu =
                (eta >= 0.0).select(1.0 / pos, 1.0 - 1.0 / pos);
            const Eigen::VectorXd resid = batch.y.array() - mu;
            if (batch.design) return batch.design->transpose() * resid;
            Eigen::VectorXd g(1);
            g(0) = resid.sum();
            return g;
        }
        case ModelKind::Tag::GaussianLinear: {
            const Eigen::VectorXd r = batch.y - linear_predictor(batch, theta);
            const double tau = model.noise_precision;
            if (batch.design) return tau * (batch.design->transpose() * r);
            Eigen::VectorXd g(1);
            g(0) = tau * r.sum();
            return g;
        }
    }
    return Eigen::VectorXd();
}

Eigen::MatrixXd hessian(const ModelKind& model, const MiniBatch& batch,
                        const Eigen::VectorXd& theta) {
    check_theta_dim(batch, theta);
    switch (model.tag) {
        case ModelKind::Tag::BernoulliIntercept: {
            Eigen::MatrixXd f(1, 1);
            f(0, 0) = batch.n() * logistic_b2(theta(0));
            return f;
        }
        case ModelKind::Tag::Logistic: {
            const Eigen::ArrayXd eta = linear_predictor(batch, theta).array();
            const Eigen::ArrayXd e = (-eta.abs()).exp();
            const Eigen::ArrayXd w = e / ((1.0 + e) * (1.0 + e));
            if (batch.design) {
                return batch.design->transpose() * w.matrix().asDiagonal() * (*batch.design);
            }
            Eigen::MatrixXd f(1, 1);
            f(0, 0) = w.sum();
            return f;
        }
        case ModelKind::Tag::GaussianLinear: {
            const double tau = model.noise_precision;
            if (batch.design) return tau * (batch.design->transpose() * (*batch.design));
            Eigen::MatrixXd f(1, 1);
            f(0, 0) = tau * batch.n();
            return f;
        }
    }
    return Eigen::MatrixXd();
}

std::pair<double, double> deriv34_opnorm_bounds(const ModelKind& model, const MiniBatch& batch) {
    if (model.tag == ModelKind::Tag::GaussianLinear) {
        return {0.0, 0.0};  // quadratic log-likelihood, higher derivatives vanish
    }
    if (!batch.design) {
        const double n = static_cast<double>(batch.n());
        return {n, n};
    }
    double b3 = 0.0, b4 = 0.0;
    for (int i = 0; i < batch.design->rows(); ++i) {
        const double nrm = batch.design->row(i).norm();
        const double n3 = nrm * nrm * nrm;
        b3 += n3;
        b4 += n3 * nrm;
    }
    return {b3, b4};
}

GaussianState conjugate_posterior(double noise_precision, const MiniBatch& batch,
                                  const GaussianState& prior) {
    const ModelKind model = ModelKind::gaussian_linear(noise_precision);
    if (prior.dim() != batch.param_dim()) {
        throw DimensionMismatch("conjugate_posterior: prior dim != design dim");
    }
    const Eigen::MatrixXd post_prec = prior.precision.matrix() + hessian(model, batch, prior.mean);
    Eigen::VectorXd xty;
    if (batch.design) {
        xty = batch.design->transpose() * batch.y;
    } else {
        xty = Eigen::VectorXd::Constant(1, batch.y_sum);
    }
    const Eigen::VectorXd rhs =
        prior.precision.matrix() * prior.mean + noise_precision * xty;
    SpdMatrix omega(post_prec);
    Eigen::VectorXd mu = omega.solve(rhs);
    return GaussianState(std::move(mu), std::move(omega));
}

Eigen::MatrixXd score_matrix_V(const ModelKind& model, const MiniBatch& batch) {
    Eigen::MatrixXd xtx;
    if (batch.design) {
        xtx = batch.design->transpose() * (*batch.design);
    } else {
        xtx = Eigen::MatrixXd::Constant(1, 1, static_cast<double>(batch.n()));
    }
    if (model.tag == ModelKind::Tag::GaussianLinear) return model.noise_precision * xtx;
    return 0.25 * xtx;
}

MiniBatch load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("load_csv: cannot open " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw MalformedCsv(path + ": empty file");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header.empty() || header[0] != "y") {
        throw MalformedCsv(path + ":1: header must start with 'y'");
    }
    const int p = static_cast<int>(header.size()) - 1;
    for (int j = 0; j < p; ++j) {
        if (header[static_cast<std::size_t>(j) + 1] != "x" + std::to_string(j + 1)) {
            throw MalformedCsv(path + ":1: expected header y,x1,...,xp");
        }
    }

    std::vector<double> ys;
    std::vector<double> xs;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            std::size_t pos = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw MalformedCsv(path + ":" + std::to_string(lineno) + ": bad number '" +
                                   cell + "'");
            }
            if (pos != cell.size()) {
                throw MalformedCsv(path + ":" + std::to_string(lineno) + ": bad number '" +
                                   cell + "'");
            }
            row.push_back(v);
        }
        if (static_cast<int>(row.size()) != p + 1) {
            throw MalformedCsv(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(p + 1) + " fields, got " +
                               std::to_string(row.size()));
        }
        ys.push_back(row[0]);
        for (int j = 0; j < p; ++j) xs.push_back(row[static_cast<std::size_t>(j) + 1]);
    }
    if (ys.empty()) {
        throw MalformedCsv(path + ": no data rows");
    }
    const int n = static_cast<int>(ys.size());
    Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
    if (p == 0) return MiniBatch(std::move(y));
    Eigen::MatrixXd x(n, p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) x(i, j) = xs[static_cast<std::size_t>(i) * p + j];
    }
    return MiniBatch(std::move(y), std::move(x));
}

}  // namespace ovb
