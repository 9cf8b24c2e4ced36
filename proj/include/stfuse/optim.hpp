#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

namespace stfuse::optim {

struct Result {
    Eigen::VectorXd x;
    double value = 0.0;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
};

struct Options {
    int max_iterations = 500;
    double gradient_tolerance = 1e-10;
    double value_tolerance = 1e-14;
    double fd_step = 1e-6;
};

inline Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double step = h * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + step;
        const double fp = f(xp);
        xp[i] = x[i] - step;
        const double fm = f(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

/// Unconstrained BFGS with Armijo backtracking and central-difference
/// gradients. Intended for the handful of parameters of a variogram model;
/// bounds are handled by the caller through reparameterization.
inline Result bfgs(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                   const Options& opt = {}) {
    Result res;
    res.x = std::move(x0);
    res.value = f(res.x);
    res.trace.push_back(res.value);
    const Eigen::Index n = res.x.size();
    if (n == 0) {
        res.converged = true;
        return res;
    }
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd g = central_gradient(f, res.x, opt.fd_step);

    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it;
        if (!std::isfinite(res.value)) return res;
        if (g.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance * std::max(1.0, std::abs(res.value))) {
            res.converged = true;
            return res;
        }
        Eigen::VectorXd dir = -hinv * g;
        double slope = g.dot(dir);
        if (slope >= 0) {
            hinv.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }
        double step = 1.0;
        double fnew = f(res.x + step * dir);
        while (!(fnew <= res.value + 1e-4 * step * slope) && step > 1e-16) {
            step *= 0.5;
            fnew = f(res.x + step * dir);
        }
        if (step <= 1e-16) {
            // No descent possible along any direction we can find: stationary
            // to working precision.
            res.converged = g.lpNorm<Eigen::Infinity>() < 1e-6 * std::max(1.0, std::abs(res.value));
            return res;
        }
        Eigen::VectorXd s = step * dir;
        Eigen::VectorXd xnew = res.x + s;
        Eigen::VectorXd gnew = central_gradient(f, xnew, opt.fd_step);
        Eigen::VectorXd yv = gnew - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            const double rho = 1.0 / sy;
            Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
            hinv = (id - rho * s * yv.transpose()) * hinv * (id - rho * yv * s.transpose()) + rho * s * s.transpose();
        }
        const double improvement = res.value - fnew;
        res.x = xnew;
        res.value = fnew;
        res.trace.push_back(fnew);
        g = gnew;
        if (improvement <= opt.value_tolerance * std::max(1.0, std::abs(fnew))) {
            res.converged = true;
            res.iterations = it + 1;
            return res;
        }
    }
    res.iterations = opt.max_iterations;
    return res;
}

} // namespace stfuse::optim
