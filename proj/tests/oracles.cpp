#include "oracles.hpp"

#include <random>
#include <stdexcept>

namespace oracle {

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

double normal_pdf(double x, double m, double s) {
    const double z = (x - m) / s;
    return std::exp(-0.5 * z * z) / (s * 2.5066282746310005024);
}

}  // namespace

double tv_1d_quadrature(double m1, double s1, double m2, double s2) {
    const double lo = std::min(m1 - 12.0 * s1, m2 - 12.0 * s2);
    const double hi = std::max(m1 + 12.0 * s1, m2 + 12.0 * s2);
    const auto f = [&](double x) {
        return std::abs(normal_pdf(x, m1, s1) - normal_pdf(x, m2, s2));
    };
    return 0.5 * integrate(f, lo, hi, 1e-12);
}

McEstimate kl_mc(const Eigen::VectorXd& m1, const Eigen::MatrixXd& cov1,
                 const Eigen::VectorXd& m2, const Eigen::MatrixXd& cov2, int draws,
                 unsigned seed) {
    const int p = static_cast<int>(m1.size());
    const Eigen::LLT<Eigen::MatrixXd> l1(cov1);
    const Eigen::LLT<Eigen::MatrixXd> l2(cov2);
    if (l1.info() != Eigen::Success || l2.info() != Eigen::Success) {
        throw std::invalid_argument("kl_mc: covariance not SPD");
    }
    const Eigen::MatrixXd ch1 = l1.matrixL();
    const double logdet1 = 2.0 * ch1.diagonal().array().log().sum();
    const Eigen::MatrixXd ch2 = l2.matrixL();
    const double logdet2 = 2.0 * ch2.diagonal().array().log().sum();

    const auto log_density = [p](const Eigen::VectorXd& x, const Eigen::VectorXd& m,
                                 const Eigen::LLT<Eigen::MatrixXd>& llt, double logdet) {
        const Eigen::VectorXd z = llt.matrixL().solve(x - m);
        return -0.5 * (z.squaredNorm() + logdet + p * 1.8378770664093454836);
    };

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    double sum = 0.0, sumsq = 0.0;
    Eigen::VectorXd z(p);
    for (int i = 0; i < draws; ++i) {
        for (int j = 0; j < p; ++j) z(j) = nd(gen);
        const Eigen::VectorXd x = m1 + ch1 * z;
        const double v = log_density(x, m1, l1, logdet1) - log_density(x, m2, l2, logdet2);
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / draws;
    const double var = std::max(sumsq / draws - mean * mean, 0.0);
    return {mean, std::sqrt(var / draws)};
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x, xm = x;
    for (int i = 0; i < x.size(); ++i) {
        xp(i) = x(i) + h;
        xm(i) = x(i) - h;
        g(i) = (f(xp) - f(xm)) / (2.0 * h);
        xp(i) = x(i);
        xm(i) = x(i);
    }
    return g;
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
                            const Eigen::VectorXd& x, double h) {
    const Eigen::VectorXd g0 = g(x);
    Eigen::MatrixXd jac(g0.size(), x.size());
    Eigen::VectorXd xp = x, xm = x;
    for (int i = 0; i < x.size(); ++i) {
        xp(i) = x(i) + h;
        xm(i) = x(i) - h;
        jac.col(i) = (g(xp) - g(xm)) / (2.0 * h);
        xp(i) = x(i);
        xm(i) = x(i);
    }
    return jac;
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double tol) {
    double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) {
        throw std::invalid_argument("bisect: no sign change on bracket");
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double gamma_p_quadrature(double a, double x) {
    if (x <= 0.0) return 0.0;
    // Substitution t = u^2 removes the t^{a-1} endpoint singularity for
    // a >= 1/2: integral becomes 2 int_0^sqrt(x) u^{2a-1} e^{-u^2} du.
    const auto f = [a](double u) {
        if (u == 0.0) return a == 0.5 ? 2.0 : 0.0;
        return 2.0 * std::exp((2.0 * a - 1.0) * std::log(u) - u * u);
    };
    const double val = integrate(f, 0.0, std::sqrt(x), 1e-13);
    return val / std::tgamma(a);
}

}  // namespace oracle
