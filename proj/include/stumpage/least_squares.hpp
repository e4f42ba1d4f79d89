#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace stumpage {

struct LeastSquaresResult {
    std::vector<double> x;
    double cost = 0.0;  // 0.5 * sum r^2
    bool converged = false;
    int iterations = 0;
};

// Damped least squares (Levenberg-Marquardt) with forward-difference
// Jacobians. Residual count and parameter count are small here (a few
// hundred by ~20), so dense normal equations are fine.
inline LeastSquaresResult levenberg_marquardt(
    const std::function<std::vector<double>(const std::vector<double>&)>& residuals,
    std::vector<double> x0, int max_iter = 200, double tol = 1e-12) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    const std::size_t n = x0.size();
    auto eval = [&](const std::vector<double>& x) {
        std::vector<double> r = residuals(x);
        VectorXd v(static_cast<Eigen::Index>(r.size()));
        for (std::size_t i = 0; i < r.size(); ++i) v[static_cast<Eigen::Index>(i)] = r[i];
        return v;
    };

    VectorXd r = eval(x0);
    double cost = 0.5 * r.squaredNorm();
    double lambda = 1e-3;

    LeastSquaresResult out;
    out.x = x0;
    out.cost = cost;

    for (int it = 0; it < max_iter; ++it) {
        out.iterations = it + 1;

        MatrixXd J(r.size(), static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < n; ++k) {
            double h = 1e-6 * (1.0 + std::abs(x0[k]));
            std::vector<double> xp = x0, xm = x0;
            xp[k] += h;
            xm[k] -= h;
            J.col(static_cast<Eigen::Index>(k)) = (eval(xp) - eval(xm)) / (2.0 * h);
        }

        MatrixXd JtJ = J.transpose() * J;
        VectorXd g = J.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() < 1e-14) {
            out.converged = true;
            break;
        }

        bool stepped = false;
        for (int tries = 0; tries < 12; ++tries) {
            MatrixXd A = JtJ;
            for (Eigen::Index d = 0; d < A.rows(); ++d) A(d, d) += lambda * (JtJ(d, d) + 1e-12);
            VectorXd delta = A.ldlt().solve(-g);
            std::vector<double> xn = x0;
            for (std::size_t k = 0; k < n; ++k) xn[k] += delta[static_cast<Eigen::Index>(k)];
            VectorXd rn = eval(xn);
            double cn = 0.5 * rn.squaredNorm();
            if (std::isfinite(cn) && cn < cost) {
                double rel = (cost - cn) / std::max(cost, 1e-300);
                x0 = std::move(xn);
                r = std::move(rn);
                cost = cn;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                if (rel < tol) {
                    out.converged = true;
                    it = max_iter;  // finish after bookkeeping below
                }
                break;
            }
            lambda *= 8.0;
        }
        out.x = x0;
        out.cost = cost;
        if (!stepped) {
            // no downhill step found at any damping; treat as converged-in-place
            out.converged = true;
            break;
        }
        if (it >= max_iter) break;
    }
    out.x = x0;
    out.cost = cost;
    return out;
}

}  // namespace stumpage
