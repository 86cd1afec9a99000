// fit.hpp - exponential decay fits, exponential rate laws and spin-flip background subtraction

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfdress/errors.hpp"

namespace rfdress {

struct FitResult {
    std::string model;
    std::vector<std::string> names;
    Eigen::VectorXd params;
    Eigen::VectorXd sigma;       // 1 sigma, from the residual covariance
    double residual_norm = 0.0;  // in the fitted domain
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> flags;

    double operator[](const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return params(Eigen::Index(i));
        throw DomainError("FitResult: no parameter '" + name + "'");
    }
};

namespace detail {

inline void check_samples(const std::vector<double>& x, const std::vector<double>& y, std::size_t min_points,
                          const char* who) {
    if (x.size() != y.size()) throw DomainError(std::string(who) + ": abscissa and ordinate lengths differ");
    if (x.size() < min_points)
        throw DomainError(std::string(who) + ": need at least " + std::to_string(min_points) + " points");
    for (double v : y)
        if (!(v > 0.0)) throw DomainError(std::string(who) + ": values must be positive");
}

// Weighted straight line y = a + b x; returns (a, b), covariance scaled by the residual variance.
inline void weighted_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w,
                          Eigen::Vector2d& coef, Eigen::Matrix2d& cov, double& rss) {
    const Eigen::Index n = Eigen::Index(x.size());
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = std::sqrt(w[std::size_t(i)]);
        a(i, 0) = s;
        a(i, 1) = s * x[std::size_t(i)];
        b(i) = s * y[std::size_t(i)];
    }
    coef = a.colPivHouseholderQr().solve(b);
    rss = (a * coef - b).squaredNorm();
    const Eigen::Matrix2d normal = a.transpose() * a;
    const double dof = double(n) - 2.0;
    cov = dof > 0.0 ? Eigen::Matrix2d(normal.inverse() * (rss / dof)) : Eigen::Matrix2d::Zero();
}

} // namespace detail

// N(t) = N0 exp(-gamma t): damped Gauss-Newton (Levenberg-Marquardt) from a log-linear start.
// Residuals are relative, (N0 exp(-gamma t_i) - N_i) / N_i, so the covariance matches
// multiplicative shot-to-shot noise in the atom number; residual_norm is dimensionless.
inline FitResult fit_decay(const std::vector<double>& times, const std::vector<double>& numbers,
                           int max_iterations = 200) {
    detail::check_samples(times, numbers, 2, "fit_decay");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw DomainError("fit_decay: times must be strictly increasing");

    FitResult r;
    r.model = "decay";
    r.names = {"N0", "gamma"};
    const std::size_t n = times.size();

    bool constant = true;
    for (double v : numbers) constant = constant && v == numbers.front();
    if (constant) {
        r.params = Eigen::Vector2d(numbers.front(), 0.0);
        r.sigma = Eigen::Vector2d::Zero();
        r.converged = true;
        r.flags.push_back("constant data");
        return r;
    }

    std::vector<double> logs(n);
    for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(numbers[i]);
    Eigen::Vector2d line;
    Eigen::Matrix2d cov;
    double rss = 0.0;
    detail::weighted_line(times, logs, std::vector<double>(n, 1.0), line, cov, rss);
    Eigen::Vector2d x(std::exp(line(0)), -line(1));

    const double t0 = times.front();
    const double tscale = std::max(times.back() - t0, 1e-300);
    auto residuals = [&](const Eigen::Vector2d& p, Eigen::VectorXd& res, Eigen::MatrixXd& jac) {
        res.resize(Eigen::Index(n));
        jac.resize(Eigen::Index(n), 2);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::exp(-p(1) * times[i]);
            const double w = 1.0 / numbers[i];
            res(Eigen::Index(i)) = w * (p(0) * e - numbers[i]);
            jac(Eigen::Index(i), 0) = w * e;
            jac(Eigen::Index(i), 1) = -w * p(0) * times[i] * e;
        }
    };
    Eigen::VectorXd res;
    Eigen::MatrixXd jac;
    residuals(x, res, jac);
    double cost = res.squaredNorm();
    double lambda = 1e-3;
    for (int it = 1; it <= max_iterations; ++it) {
        r.iterations = it;
        const Eigen::Matrix2d jtj = jac.transpose() * jac;
        const Eigen::Vector2d grad = jac.transpose() * res;
        Eigen::Matrix2d damped = jtj;
        damped.diagonal() += lambda * jtj.diagonal();
        const Eigen::Vector2d step = damped.ldlt().solve(-grad);
        const Eigen::Vector2d trial = x + step;
        Eigen::VectorXd rt;
        Eigen::MatrixXd jt;
        residuals(trial, rt, jt);
        const double tc = rt.squaredNorm();
        const bool small = std::abs(step(0)) <= 1e-12 * std::abs(x(0)) &&
                           std::abs(step(1)) * tscale <= 1e-12 * std::max(1.0, std::abs(x(1)) * tscale);
        if (tc <= cost) {
            x = trial;
            res = rt;
            jac = jt;
            cost = tc;
            lambda = std::max(lambda * 0.3, 1e-15);
            if (small || cost == 0.0) {
                r.converged = true;
                break;
            }
        } else {
            if (small) {
                r.converged = true;
                break;
            }
            lambda *= 10.0;
        }
    }
    if (!r.converged) throw ConvergenceError("fit_decay did not converge in " + std::to_string(max_iterations) +
                                             " iterations", std::sqrt(cost));
    r.params = x;
    r.residual_norm = std::sqrt(cost);
    const double dof = double(n) - 2.0;
    r.sigma = Eigen::Vector2d::Zero();
    if (dof > 0.0) {
        const Eigen::Matrix2d c = (jac.transpose() * jac).inverse() * (cost / dof);
        r.sigma = c.diagonal().cwiseMax(0.0).cwiseSqrt();
    } else {
        r.flags.push_back("exactly determined: no uncertainty estimate");
    }
    return r;
}

enum class LawSign { decay, growth };

// y = A exp(-B x) (decay) or y = A exp(+B x) (growth), fitted as a weighted line in log y.
// Weights are proportional to y^2, the log-domain image of a constant absolute error in y.
// Parameters are named A, B.
inline FitResult fit_exponential_law(const std::vector<double>& x, const std::vector<double>& y, LawSign sign,
                                     const std::vector<double>& y_sigma = {}) {
    detail::check_samples(x, y, 3, "fit_exponential_law");
    if (!y_sigma.empty() && y_sigma.size() != y.size())
        throw DomainError("fit_exponential_law: sigma length differs from data length");
    const std::size_t n = x.size();
    std::vector<double> logs(n), w(n);
    // Scale-free weights: (y / y_max)^2, or (y / sigma)^2 when per-point errors are given.
    double ymax = 0.0;
    for (double v : y) ymax = std::max(ymax, v);
    for (std::size_t i = 0; i < n; ++i) {
        logs[i] = std::log(y[i]);
        if (y_sigma.empty()) w[i] = (y[i] / ymax) * (y[i] / ymax);
        else {
            if (!(y_sigma[i] > 0.0)) throw DomainError("fit_exponential_law: sigma must be positive");
            w[i] = (y[i] / y_sigma[i]) * (y[i] / y_sigma[i]);
        }
    }
    Eigen::Vector2d line;
    Eigen::Matrix2d cov;
    double rss = 0.0;
    detail::weighted_line(x, logs, w, line, cov, rss);

    FitResult r;
    r.model = sign == LawSign::decay ? "exp-decay-law" : "exp-growth-law";
    r.names = {"A", "B"};
    const double s = sign == LawSign::decay ? -1.0 : 1.0;
    const double a = std::exp(line(0));
    r.params = Eigen::Vector2d(a, s * line(1));
    r.sigma = Eigen::Vector2d(a * std::sqrt(std::max(cov(0, 0), 0.0)), std::sqrt(std::max(cov(1, 1), 0.0)));
    r.residual_norm = std::sqrt(rss);
    r.iterations = 1;
    r.converged = true;
    return r;
}

struct BackgroundCorrection {
    double rate = 0.0;       // corrected, 1/s
    double subtracted = 0.0; // 1/s
    bool floored = false;
};

// Spin-flip background: 1/(85 ms) at U = 55 E_R, scaled linearly with depth.
inline constexpr double background_rate_ref_per_s = 1.0 / 0.085;
inline constexpr double background_depth_ref_er = 55.0;

inline BackgroundCorrection subtract_background(double rate_per_s, double depth_er) {
    if (!(depth_er >= 0.0)) throw DomainError("subtract_background: depth must be non-negative");
    BackgroundCorrection out;
    out.subtracted = depth_er / background_depth_ref_er * background_rate_ref_per_s;
    out.rate = rate_per_s - out.subtracted;
    if (out.rate < 0.0) {
        out.rate = 0.0;
        out.floored = true;
    }
    return out;
}

} // namespace rfdress
