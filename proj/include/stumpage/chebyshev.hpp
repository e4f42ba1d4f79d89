#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace stumpage {

// T_k(x) by the three-term recurrence.
inline double chebyshev_t(int k, double x) {
    if (k == 0) return 1.0;
    if (k == 1) return x;
    double tm1 = 1.0, t = x;
    for (int i = 2; i <= k; ++i) {
        double next = 2.0 * x * t - tm1;
        tm1 = t;
        t = next;
    }
    return t;
}

// sum_k coeffs[k] * T_k(x) via Clenshaw.
inline double chebyshev_eval(std::span<const double> coeffs, double x) {
    if (coeffs.empty()) return 0.0;
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 1;) {
        double b0 = 2.0 * x * b1 - b2 + coeffs[k];
        b2 = b1;
        b1 = b0;
    }
    return x * b1 - b2 + coeffs[0];
}

// Derivative series: if f = sum a_k T_k then f' = sum d_k T_k with the
// standard descending recurrence d_{k-1} = d_{k+1} + 2k a_k.
inline std::vector<double> chebyshev_derivative_coeffs(std::span<const double> a) {
    std::size_t n = a.size();
    if (n <= 1) return {0.0};
    std::vector<double> d(n, 0.0);
    d[n - 1] = 0.0;
    if (n >= 2) d[n - 2] = 2.0 * static_cast<double>(n - 1) * a[n - 1];
    for (std::size_t k = n - 2; k-- > 0;)
        d[k] = d[k + 2] + 2.0 * static_cast<double>(k + 1) * a[k + 1];
    d[0] *= 0.5;
    d.pop_back();
    return d;
}

// Chebyshev-Gauss abscissae x_t = cos((2t - 1) pi / (2 n)), t = 1..n;
// strictly interior to (-1, 1), returned in increasing order.
inline std::vector<double> chebyshev_gauss_nodes(int n) {
    if (n < 1) throw std::invalid_argument("chebyshev_gauss_nodes: n must be >= 1");
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int t = 1; t <= n; ++t)
        x[static_cast<std::size_t>(n - t)] = std::cos((2.0 * t - 1.0) / (2.0 * n) * M_PI);
    return x;
}

// Interpolation coefficients through the n Gauss nodes (discrete orthogonality).
template <typename Fn>
std::vector<double> chebyshev_fit(Fn&& f, int degree, double lo, double hi) {
    int n = degree + 1;
    auto nodes = chebyshev_gauss_nodes(n);
    std::vector<double> fx(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        fx[i] = f(0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes[i]);
    std::vector<double> coeffs(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) s += fx[i] * chebyshev_t(k, nodes[i]);
        coeffs[static_cast<std::size_t>(k)] = (k == 0 ? 1.0 : 2.0) * s / static_cast<double>(n);
    }
    return coeffs;
}

}  // namespace stumpage
