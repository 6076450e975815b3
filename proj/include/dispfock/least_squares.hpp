#pragma once

// Box-constrained Levenberg-Marquardt with an active set.
//
// Variables sitting on a bound whose gradient points outward are frozen for
// the step; the damped normal equations are solved on the rest and the trial
// point is projected back onto the box.  Damping uses Marquardt's diagonal
// scaling so parameters of very different magnitude (populations ~1, decay
// rates ~10 1/s, shifts ~1e3 rad/s) share one trust region.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace dispfock {

struct LsqProblem {
    /// Fills the residual vector and, when J is non-null, its Jacobian.
    std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J)> evaluate;
    Eigen::VectorXd lower; // -inf for free
    Eigen::VectorXd upper; // +inf for free
};

struct LsqOptions {
    int max_iterations = 400;
    double ftol = 1e-15; // relative cost reduction
    double xtol = 1e-13; // relative step
    double gtol = 1e-14; // scaled projected gradient
    double initial_lambda = 1e-3;
};

struct LsqResult {
    Eigen::VectorXd x;
    Eigen::VectorXd residual;
    Eigen::MatrixXd jacobian;
    double cost = std::numeric_limits<double>::infinity(); // 0.5 |r|^2
    int iterations = 0;
    bool converged = false;
    std::string message;
};

inline Eigen::VectorXd project_box(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

inline LsqResult least_squares_bounded(const LsqProblem& prob, Eigen::VectorXd x0, const LsqOptions& opt = {}) {
    const Eigen::Index n = x0.size();
    Eigen::VectorXd lo = prob.lower.size() == n ? prob.lower : Eigen::VectorXd::Constant(n, -INFINITY);
    Eigen::VectorXd hi = prob.upper.size() == n ? prob.upper : Eigen::VectorXd::Constant(n, INFINITY);
    LsqResult res;
    res.x = project_box(x0, lo, hi);
    Eigen::MatrixXd J;
    prob.evaluate(res.x, res.residual, &J);
    res.cost = 0.5 * res.residual.squaredNorm();
    double lambda = opt.initial_lambda;

    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it + 1;
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * res.residual;

        // active set: on a bound with the descent direction leaving the box
        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool at_lo = res.x[i] <= lo[i] && g[i] > 0.0;
            const bool at_hi = res.x[i] >= hi[i] && g[i] < 0.0;
            if (!at_lo && !at_hi) free.push_back(i);
        }
        double gnorm = 0.0;
        for (Eigen::Index i : free) {
            const double d = std::sqrt(std::max(JtJ(i, i), 1e-300));
            gnorm = std::max(gnorm, std::abs(g[i]) / d);
        }
        if (free.empty() || gnorm <= opt.gtol * std::max(1.0, std::sqrt(2.0 * res.cost))) {
            res.converged = true;
            res.message = "projected gradient below tolerance";
            break;
        }

        const auto nf = static_cast<Eigen::Index>(free.size());
        Eigen::MatrixXd A(nf, nf);
        Eigen::VectorXd b(nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
            b[a] = -g[free[static_cast<std::size_t>(a)]];
            for (Eigen::Index c = 0; c < nf; ++c) A(a, c) = JtJ(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(c)]);
        }
        const Eigen::VectorXd diag = A.diagonal().cwiseMax(1e-12 * std::max(1.0, A.diagonal().maxCoeff()));

        bool accepted = false;
        for (int inner = 0; inner < 40; ++inner) {
            Eigen::MatrixXd M = A;
            M.diagonal() += lambda * diag;
            const Eigen::VectorXd step = M.ldlt().solve(b);
            Eigen::VectorXd trial = res.x;
            for (Eigen::Index a = 0; a < nf; ++a) trial[free[static_cast<std::size_t>(a)]] += step[a];
            trial = project_box(trial, lo, hi);
            Eigen::VectorXd r_trial;
            prob.evaluate(trial, r_trial, nullptr);
            const double c_trial = 0.5 * r_trial.squaredNorm();
            if (std::isfinite(c_trial) && c_trial < res.cost) {
                const double rel = (res.cost - c_trial) / std::max(res.cost, 1e-300);
                const double dx = (trial - res.x).norm() / (res.x.norm() + opt.xtol);
                res.x = trial;
                res.cost = c_trial;
                prob.evaluate(res.x, res.residual, &J);
                lambda = std::max(lambda / 5.0, 1e-12);
                accepted = true;
                if (rel < opt.ftol || dx < opt.xtol) {
                    res.converged = true;
                    res.message = rel < opt.ftol ? "relative cost reduction below tolerance" : "step below tolerance";
                }
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e16) break;
        }
        if (res.converged) break;
        if (!accepted) {
            res.converged = true;
            res.message = "no decrease possible along damped steps";
            break;
        }
    }
    if (!res.converged) res.message = "iteration limit reached";
    res.jacobian = J;
    return res;
}

/// Covariance (J^T J)^+ scaled by the reduced chi^2, plus the condition number of J^T J.
struct Covariance {
    Eigen::MatrixXd matrix;
    double condition = 0.0;
};

inline Covariance covariance_from_jacobian(const Eigen::MatrixXd& J, double rss, Eigen::Index dof) {
    Covariance c;
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(JtJ);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double emax = ev.cwiseAbs().maxCoeff();
    const double emin = std::max(ev.minCoeff(), 0.0);
    c.condition = emin > 0.0 ? emax / emin : std::numeric_limits<double>::infinity();
    Eigen::VectorXd inv(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) inv[i] = ev[i] > 1e-14 * emax ? 1.0 / ev[i] : 0.0;
    const double s2 = dof > 0 ? rss / static_cast<double>(dof) : 0.0;
    c.matrix = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * s2;
    return c;
}

} // namespace dispfock
