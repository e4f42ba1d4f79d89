#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "stumpage/rng.hpp"

namespace stumpage {

struct OptimResult {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
    int evaluations = 0;
};

// Nelder-Mead downhill simplex (minimization).
inline OptimResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                               std::vector<double> x0, double tol = 1e-6, int max_iter = 2000) {
    const std::size_t n = x0.size();
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

    OptimResult res;
    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        double step = (x0[i] != 0.0) ? 0.10 * std::abs(x0[i]) : 0.05;
        pts[i + 1][i] += step;
    }
    for (std::size_t i = 0; i <= n; ++i) {
        fv[i] = f(pts[i]);
        ++res.evaluations;
    }

    std::vector<std::size_t> order(n + 1);
    for (int it = 0; it < max_iter; ++it) {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        res.iterations = it + 1;
        if (std::abs(fv[order[n]] - fv[order[0]]) <=
            tol * (1.0 + std::abs(fv[order[0]]))) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[order[i]][d] / double(n);
        const std::size_t worst = order[n];

        auto blend = [&](double coef) {
            std::vector<double> p(n);
            for (std::size_t d = 0; d < n; ++d)
                p[d] = centroid[d] + coef * (centroid[d] - pts[worst][d]);
            return p;
        };

        auto xr = blend(alpha);
        double fr = f(xr);
        ++res.evaluations;
        if (fr < fv[order[0]]) {
            auto xe = blend(gamma);
            double fe = f(xe);
            ++res.evaluations;
            if (fe < fr) {
                pts[worst] = std::move(xe);
                fv[worst] = fe;
            } else {
                pts[worst] = std::move(xr);
                fv[worst] = fr;
            }
        } else if (fr < fv[order[n - 1]]) {
            pts[worst] = std::move(xr);
            fv[worst] = fr;
        } else {
            auto xc = blend(fr < fv[worst] ? rho : -rho);
            double fc = f(xc);
            ++res.evaluations;
            if (fc < std::min(fr, fv[worst])) {
                pts[worst] = std::move(xc);
                fv[worst] = fc;
            } else {
                // shrink toward the best vertex
                for (std::size_t i = 1; i <= n; ++i) {
                    std::size_t k = order[i];
                    for (std::size_t d = 0; d < n; ++d)
                        pts[k][d] = pts[order[0]][d] + sigma * (pts[k][d] - pts[order[0]][d]);
                    fv[k] = f(pts[k]);
                    ++res.evaluations;
                }
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fv[i] < fv[best]) best = i;
    res.x = pts[best];
    res.f = fv[best];
    return res;
}

// Multi-start wrapper: the given point plus (starts - 1) multiplicative
// jitters of up to +-50% per coordinate, drawn from a fixed stream so fits
// are reproducible. Returns the best run.
inline OptimResult nelder_mead_multistart(
    const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& x0,
    int starts = 5, double tol = 1e-6, int max_iter = 2000, std::uint64_t jitter_seed = 17) {
    OptimResult best;
    int total_evals = 0;
    int total_iters = 0;
    for (int s = 0; s < starts; ++s) {
        std::vector<double> start = x0;
        if (s > 0) {
            auto eng = make_engine(jitter_seed, static_cast<std::uint64_t>(s));
            std::uniform_real_distribution<double> unif(-0.5, 0.5);
            for (double& v : start) {
                double u = unif(eng);
                v = (v != 0.0) ? v * (1.0 + u) : u;
            }
        }
        OptimResult r = nelder_mead(f, std::move(start), tol, max_iter);
        total_evals += r.evaluations;
        total_iters += r.iterations;
        if (r.f < best.f) best = std::move(r);
    }
    best.evaluations = total_evals;
    best.iterations = total_iters;
    return best;
}

}  // namespace stumpage
