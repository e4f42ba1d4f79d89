#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/distributions/gamma.hpp>

#include "stumpage/model_types.hpp"

namespace stumpage {

// CDF/PDF pair on a compact support. Bid-solver inputs; all types in one
// auction must share [lo, hi].
struct ValueDistribution {
    std::function<double(double)> cdf;
    std::function<double(double)> pdf;
    double lo = 0.0;
    double hi = 1.0;

    void validate() const {
        if (!(hi > lo)) throw std::invalid_argument("ValueDistribution: empty support");
        if (std::abs(cdf(lo)) > 1e-6 || std::abs(cdf(hi) - 1.0) > 1e-6)
            throw std::invalid_argument("ValueDistribution: cdf must span [0,1] on the support");
    }
};

inline ValueDistribution uniform_distribution(double lo, double hi) {
    ValueDistribution d;
    d.lo = lo;
    d.hi = hi;
    d.cdf = [lo, hi](double v) {
        if (v <= lo) return 0.0;
        if (v >= hi) return 1.0;
        return (v - lo) / (hi - lo);
    };
    d.pdf = [lo, hi](double v) { return (v < lo || v > hi) ? 0.0 : 1.0 / (hi - lo); };
    return d;
}

inline double gamma_cdf(double x, double shape, double scale) {
    if (x <= 0.0) return 0.0;
    boost::math::gamma_distribution<double> g(shape, scale);
    return boost::math::cdf(g, x);
}

inline double gamma_pdf(double x, double shape, double scale) {
    if (x <= 0.0) return 0.0;
    boost::math::gamma_distribution<double> g(shape, scale);
    return boost::math::pdf(g, x);
}

inline double gamma_quantile(double p, double shape, double scale) {
    boost::math::gamma_distribution<double> g(shape, scale);
    return boost::math::quantile(g, p);
}

// Gamma restricted to [lo, hi] and renormalized.
inline ValueDistribution truncated_gamma(double shape, double scale, double lo, double hi) {
    if (!(shape > 0.0 && scale > 0.0))
        throw std::invalid_argument("truncated_gamma: shape and scale must be positive");
    if (!(hi > lo) || lo < 0.0)
        throw std::invalid_argument("truncated_gamma: invalid truncation bounds");
    double Flo = gamma_cdf(lo, shape, scale);
    double Fhi = gamma_cdf(hi, shape, scale);
    double mass = Fhi - Flo;
    if (!(mass > 0.0)) throw std::invalid_argument("truncated_gamma: no mass on the support");
    ValueDistribution d;
    d.lo = lo;
    d.hi = hi;
    d.cdf = [=](double v) {
        if (v <= lo) return 0.0;
        if (v >= hi) return 1.0;
        return (gamma_cdf(v, shape, scale) - Flo) / mass;
    };
    d.pdf = [=](double v) {
        if (v < lo || v > hi) return 0.0;
        return gamma_pdf(v, shape, scale) / mass;
    };
    return d;
}

// Common compact support for a set of gamma types. The upper bound is the
// smallest per-type upper quantile: past the weakest type's range the inverse
// hazard F/f of that type blows up and the first-order-condition system
// stops being solvable, so the shared support ends where every type still
// has density. The lower bound may sit in an extreme tail; the hazard
// vanishes there, which is harmless.
struct GammaComponent {
    double shape;
    double scale;
};

inline std::pair<double, double> common_support(const std::vector<GammaComponent>& specs,
                                                double lower_tail = 1e-4,
                                                double upper_tail = 8e-3) {
    if (specs.empty()) throw std::invalid_argument("common_support: no components");
    double lo = std::numeric_limits<double>::max();
    double hi = std::numeric_limits<double>::max();
    for (const auto& s : specs) {
        lo = std::min(lo, gamma_quantile(lower_tail, s.shape, s.scale));
        hi = std::min(hi, gamma_quantile(1.0 - upper_tail, s.shape, s.scale));
    }
    if (!(hi > lo)) throw std::invalid_argument("common_support: degenerate support");
    return {lo, hi};
}

}  // namespace stumpage
