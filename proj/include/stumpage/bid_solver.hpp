#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stumpage/chebyshev.hpp"
#include "stumpage/distributions.hpp"
#include "stumpage/least_squares.hpp"
#include "stumpage/model_types.hpp"
#include "stumpage/rng.hpp"

namespace stumpage {

struct BidWeights {
    double foc = 0.6;
    double lower = 0.2;
    double upper = 0.2;
};

// First-price sealed-bid equilibrium in inverse form: per-type Chebyshev
// series psi_m on the shared bid range [v_lo, b_bar], psi_m(b) = value of a
// type-m bidder submitting b.
struct BidSystem {
    std::vector<double> coeffs_l;
    std::vector<double> coeffs_s;
    double b_bar = 1.0;
    double v_lo = 0.0;
    double v_hi = 1.0;
    int n_logger = 0;
    int n_sawmill = 0;
    int nodes = 0;
    double max_foc_residual = 0.0;
    double max_boundary_error = 0.0;
    bool inequalities_ok = false;
    bool converged = false;
    double objective = 0.0;

    // attached for residual evaluation; absent after JSON round-trips
    std::optional<ValueDistribution> dist_l;
    std::optional<ValueDistribution> dist_s;

    double bid_to_x(double b) const { return (2.0 * b - v_lo - b_bar) / (b_bar - v_lo); }

    const std::vector<double>& coeffs(BidderType t) const {
        return t == BidderType::logger ? coeffs_l : coeffs_s;
    }
};

inline double inverse_bid(const BidSystem& system, BidderType type, double b) {
    double span = system.b_bar - system.v_lo;
    if (b < system.v_lo - 1e-9 * (1.0 + span) || b > system.b_bar + 1e-9 * (1.0 + span))
        throw std::domain_error("inverse_bid: bid outside [v_lo, b_bar]");
    return chebyshev_eval(system.coeffs(type), system.bid_to_x(b));
}

// Monotone inversion of psi via bisection; tolerance is absolute in bid units.
inline double bid(const BidSystem& system, BidderType type, double v, double tol = 1e-10) {
    if (v < system.v_lo - 1e-9 * (1.0 + system.v_hi - system.v_lo) ||
        v > system.v_hi + 1e-9 * (1.0 + system.v_hi - system.v_lo))
        throw std::domain_error("bid: value outside [v_lo, v_hi]");
    double lo = system.v_lo, hi = system.b_bar;
    if (v <= inverse_bid(system, type, lo)) return lo;
    if (v >= inverse_bid(system, type, hi)) return hi;
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        (inverse_bid(system, type, mid) < v ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double psi_derivative(const BidSystem& system, BidderType type, double b) {
    auto d = chebyshev_derivative_coeffs(system.coeffs(type));
    return chebyshev_eval(d, system.bid_to_x(b)) * 2.0 / (system.b_bar - system.v_lo);
}

// Left-hand side of the equilibrium first-order condition for `type` at an
// interior bid. Requires the value distributions to be attached.
inline double foc_residual(const BidSystem& system, BidderType type, double b) {
    if (!system.dist_l || !system.dist_s)
        throw std::logic_error("foc_residual: value distributions not attached to this system");
    double span = system.b_bar - system.v_lo;
    if (b <= system.v_lo + 1e-12 * span || b >= system.b_bar - 1e-12 * span)
        throw std::domain_error("foc_residual: bid must be interior to (v_lo, b_bar)");

    double psi_l = chebyshev_eval(system.coeffs_l, system.bid_to_x(b));
    double psi_s = chebyshev_eval(system.coeffs_s, system.bid_to_x(b));
    double own_psi = type == BidderType::logger ? psi_l : psi_s;
    const ValueDistribution& own =
        type == BidderType::logger ? *system.dist_l : *system.dist_s;

    double gap_l = psi_l - b;
    double gap_s = psi_s - b;
    double own_gap = type == BidderType::logger ? gap_l : gap_s;
    if (std::abs(own_gap) < 1e-14 * (1.0 + span))
        throw std::domain_error("foc_residual: psi(b) = b, first-order condition singular");

    // Inverting the two bidder-level optimality conditions
    //   1/(psi_m - b) = sum over opponent types of count * (f/F) * psi'
    // for the derivatives gives, per type, the opponent-count gap term minus
    // an (opponent count - 1) own-gap term, all scaled by F/f and 1/(N-1).
    double N = system.n_logger + system.n_sawmill;
    double hazard_scale = own.cdf(own_psi) / std::max(own.pdf(own_psi), 1e-300);
    double pressure;
    if (type == BidderType::sawmill)
        pressure = system.n_logger / gap_l - (system.n_logger - 1) / gap_s;
    else
        pressure = system.n_sawmill / gap_s - (system.n_sawmill - 1) / gap_l;
    return psi_derivative(system, type, b) - hazard_scale / (N - 1.0) * pressure;
}

namespace detail {

// Distribution tabulated on a uniform grid over [0, 1] (normalized support);
// keeps the inner least-squares loop off the special-function path.
struct TabulatedDist {
    std::vector<double> F, f;
    double at(const std::vector<double>& tab, double y) const {
        if (y <= 0.0) return tab.front();
        if (y >= 1.0) return tab.back();
        double pos = y * static_cast<double>(tab.size() - 1);
        std::size_t i = static_cast<std::size_t>(pos);
        double w = pos - static_cast<double>(i);
        return tab[i] * (1.0 - w) + tab[i + 1] * w;
    }
    double cdf(double y) const { return at(F, y); }
    double pdf(double y) const { return at(f, y); }

    static TabulatedDist build(const ValueDistribution& d, std::size_t points = 16385) {
        TabulatedDist t;
        t.F.resize(points);
        t.f.resize(points);
        double span = d.hi - d.lo;
        for (std::size_t i = 0; i < points; ++i) {
            double y = static_cast<double>(i) / static_cast<double>(points - 1);
            t.F[i] = d.cdf(d.lo + y * span);
            t.f[i] = d.pdf(d.lo + y * span) * span;
        }
        return t;
    }
};

struct NormalizedProblem {
    TabulatedDist tab_l, tab_s;
    int n_l, n_s;
    int degree;
    int node_count;
    BidWeights weights;
    bool has_l, has_s;

    // The boundary conditions psi(0) = 0 and psi(b_bar) = 1 are enforced
    // exactly: T_k(1) = 1 and T_k(-1) = (-1)^k pin alpha_0 and alpha_1 given
    // the higher coefficients, so each type contributes degree - 1 free
    // parameters and the penalized objective keeps only the FOC and
    // inequality terms. (A soft boundary penalty lets the least squares
    // trade the upper boundary away entirely on thin-tailed supports.)
    int free_per_type() const { return degree - 1; }

    std::vector<double> expand(std::span<const double> free) const {
        std::vector<double> a(static_cast<std::size_t>(degree + 1), 0.0);
        double even_sum = 0.0, odd_sum = 0.0;
        for (int k = 2; k <= degree; ++k) {
            a[static_cast<std::size_t>(k)] = free[static_cast<std::size_t>(k - 2)];
            (k % 2 == 0 ? even_sum : odd_sum) += free[static_cast<std::size_t>(k - 2)];
        }
        a[0] = 0.5 - even_sum;
        a[1] = 0.5 - odd_sum;
        return a;
    }

    std::vector<double> reduce(std::span<const double> full) const {
        return std::vector<double>(full.begin() + 2, full.end());
    }

    // parameter layout: [free_l?][free_s?][b_bar]
    std::pair<std::vector<double>, std::vector<double>> unpack(
        const std::vector<double>& theta) const {
        std::vector<double> al, as;
        std::size_t off = 0;
        if (has_l) {
            al = expand(std::span<const double>(theta).subspan(0, free_per_type()));
            off += static_cast<std::size_t>(free_per_type());
        }
        if (has_s)
            as = expand(std::span<const double>(theta).subspan(off, free_per_type()));
        if (!has_l) al = as;
        if (!has_s) as = al;
        return {std::move(al), std::move(as)};
    }

    std::vector<double> residuals(const std::vector<double>& theta) const {
        auto [al, as] = unpack(theta);
        double b_bar_raw = theta.back();
        double b_bar = std::clamp(b_bar_raw, 1e-3, 1.0 - 1e-6);

        auto dl = chebyshev_derivative_coeffs(al);
        auto ds = chebyshev_derivative_coeffs(as);
        double dxdb = 2.0 / b_bar;
        auto x_of = [&](double b) { return (2.0 * b - b_bar) / b_bar; };

        const double N = n_l + n_s;
        const double w_foc = std::sqrt(weights.foc);
        const double w_pen = std::sqrt(10.0 * weights.foc);

        std::vector<double> res;
        res.reserve(static_cast<std::size_t>(8 * node_count + 1));

        // box penalty keeps the raw b_bar parameter inside (0, 1)
        res.push_back(10.0 * (b_bar_raw - b_bar));

        auto nodes = chebyshev_gauss_nodes(node_count);
        for (double x : nodes) {
            double b = 0.5 * (b_bar + b_bar * x);  // map of eq-space [-1,1] onto [0, b_bar]
            double pl = chebyshev_eval(al, x);
            double ps = chebyshev_eval(as, x);
            double gap_l = std::max(pl - b, 1e-8);
            double gap_s = std::max(ps - b, 1e-8);
            if (has_s) {
                double val = std::clamp(ps, 0.0, 1.0);
                double hz = tab_s.cdf(val) / std::max(tab_s.pdf(val), 1e-8);
                double pressure = n_l / gap_l - (n_l - 1) / gap_s;
                double dpsi = chebyshev_eval(ds, x) * dxdb;
                res.push_back(w_foc * (dpsi - hz / (N - 1.0) * pressure));
            }
            if (has_l) {
                double val = std::clamp(pl, 0.0, 1.0);
                double hz = tab_l.cdf(val) / std::max(tab_l.pdf(val), 1e-8);
                double pressure = n_s / gap_s - (n_s - 1) / gap_l;
                double dpsi = chebyshev_eval(dl, x) * dxdb;
                res.push_back(w_foc * (dpsi - hz / (N - 1.0) * pressure));
            }
        }

        // monotonicity and rationality hinges on a denser grid
        int dense = 3 * node_count;
        for (int i = 1; i < dense; ++i) {
            double b = b_bar * static_cast<double>(i) / static_cast<double>(dense);
            double x = x_of(b);
            if (has_l) {
                res.push_back(w_pen * std::max(0.0, -chebyshev_eval(dl, x) * dxdb));
                res.push_back(w_pen * std::max(0.0, b - chebyshev_eval(al, x)));
            }
            if (has_s) {
                res.push_back(w_pen * std::max(0.0, -chebyshev_eval(ds, x) * dxdb));
                res.push_back(w_pen * std::max(0.0, b - chebyshev_eval(as, x)));
            }
        }
        return res;
    }
};

// Symmetric equilibrium of the participant-weighted mixture, used to seed
// the solver: b(v) = v - int_0^v G^{N-1} / G(v)^{N-1}.
struct SymmetricSeed {
    std::vector<double> b_grid, v_grid;  // monotone tabulation of the inverse
    double b_bar;

    static SymmetricSeed build(const NormalizedProblem& p) {
        const int m = 2048;
        const double N = p.n_l + p.n_s;
        std::vector<double> v(m + 1), G(m + 1), I(m + 1);
        for (int i = 0; i <= m; ++i) {
            v[i] = static_cast<double>(i) / m;
            double g = 0.0;
            if (p.n_l > 0) g += p.n_l / N * p.tab_l.cdf(v[i]);
            if (p.n_s > 0) g += p.n_s / N * p.tab_s.cdf(v[i]);
            G[i] = std::pow(g, N - 1.0);
        }
        I[0] = 0.0;
        for (int i = 1; i <= m; ++i) I[i] = I[i - 1] + 0.5 * (G[i] + G[i - 1]) / m;

        SymmetricSeed s;
        s.b_grid.resize(m + 1);
        s.v_grid = v;
        for (int i = 0; i <= m; ++i) {
            if (G[i] > 1e-12)
                s.b_grid[i] = v[i] - I[i] / G[i];
            else
                s.b_grid[i] = v[i] * (N - 1.0) / N;  // slope 1/psi' at the lower end
        }
        // enforce monotone bids against flat numerical stretches
        for (int i = 1; i <= m; ++i)
            s.b_grid[i] = std::max(s.b_grid[i], s.b_grid[i - 1] + 1e-12);
        s.b_bar = s.b_grid[m];
        return s;
    }

    double psi(double b) const {
        if (b <= b_grid.front()) return v_grid.front();
        if (b >= b_grid.back()) return v_grid.back();
        auto it = std::upper_bound(b_grid.begin(), b_grid.end(), b);
        std::size_t i = static_cast<std::size_t>(it - b_grid.begin());
        double w = (b - b_grid[i - 1]) / (b_grid[i] - b_grid[i - 1]);
        return v_grid[i - 1] * (1.0 - w) + v_grid[i] * w;
    }
};

}  // namespace detail

// Solves the asymmetric first-price equilibrium by minimizing the penalized
// squared first-order-condition system over Chebyshev coefficients and the
// shared maximum bid. Both value distributions must share one support.
inline BidSystem solve_bid_system(const ValueDistribution& F_l, const ValueDistribution& F_s,
                                  int N_l, int N_s, int degree = 7,
                                  BidWeights weights = BidWeights{}, int nodes = 0,
                                  double residual_tol = 1e-4) {
    if (N_l < 0 || N_s < 0 || N_l + N_s < 2)
        throw std::invalid_argument("solve_bid_system: need at least two bidders");
    if (degree < 1) throw std::invalid_argument("solve_bid_system: degree must be >= 1");
    if (nodes <= 0) nodes = 3 * (degree + 1);
    if (N_l > 0) F_l.validate();
    if (N_s > 0) F_s.validate();
    double v_lo = N_l > 0 ? F_l.lo : F_s.lo;
    double v_hi = N_l > 0 ? F_l.hi : F_s.hi;
    if (N_l > 0 && N_s > 0 &&
        (std::abs(F_l.lo - F_s.lo) > 1e-9 * (1.0 + std::abs(F_l.lo)) ||
         std::abs(F_l.hi - F_s.hi) > 1e-9 * (1.0 + std::abs(F_l.hi))))
        throw std::invalid_argument("solve_bid_system: types must share a common support");

    double span = v_hi - v_lo;
    auto normalize = [&](const ValueDistribution& d) {
        ValueDistribution nd;
        nd.lo = 0.0;
        nd.hi = 1.0;
        nd.cdf = [&d, v_lo, span](double y) { return d.cdf(v_lo + y * span); };
        nd.pdf = [&d, v_lo, span](double y) { return d.pdf(v_lo + y * span) * span; };
        return nd;
    };
    ValueDistribution norm_l = normalize(F_l);
    ValueDistribution norm_s = normalize(F_s);

    detail::NormalizedProblem prob;
    prob.tab_l = N_l > 0 ? detail::TabulatedDist::build(norm_l)
                         : detail::TabulatedDist::build(norm_s);
    prob.tab_s = N_s > 0 ? detail::TabulatedDist::build(norm_s)
                         : detail::TabulatedDist::build(norm_l);
    prob.n_l = N_l;
    prob.n_s = N_s;
    prob.degree = degree;
    prob.node_count = nodes;
    prob.weights = weights;
    prob.has_l = N_l > 0;
    prob.has_s = N_s > 0;

    auto seed = detail::SymmetricSeed::build(prob);
    auto seed_full = chebyshev_fit([&](double b) { return seed.psi(b); }, degree, 0.0,
                                   seed.b_bar);
    auto seed_free = prob.reduce(seed_full);

    auto pack = [&](const std::vector<double>& cl, const std::vector<double>& cs,
                    double b_bar) {
        std::vector<double> theta;
        if (prob.has_l) theta.insert(theta.end(), cl.begin(), cl.end());
        if (prob.has_s) theta.insert(theta.end(), cs.begin(), cs.end());
        theta.push_back(b_bar);
        return theta;
    };

    auto residual_fn = [&prob](const std::vector<double>& theta) {
        return prob.residuals(theta);
    };

    LeastSquaresResult best;
    best.cost = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 5; ++s) {
        std::vector<double> cl = seed_free, cs = seed_free;
        double b0 = seed.b_bar;
        if (s > 0) {
            auto eng = make_engine(0x5eedULL, static_cast<std::uint64_t>(s));
            std::uniform_real_distribution<double> unif(-1.0, 1.0);
            double amp = 0.02 * s;
            for (double& c : cl) c *= 1.0 + amp * unif(eng);
            for (double& c : cs) c *= 1.0 + amp * unif(eng);
            b0 = std::clamp(b0 * (1.0 + 0.5 * amp * unif(eng)), 0.05, 0.98);
        }
        LeastSquaresResult r = levenberg_marquardt(residual_fn, pack(cl, cs, b0), 400);
        if (r.cost < best.cost) best = std::move(r);
        if (best.converged && best.cost < 1e-16) break;
    }

    auto [al, as] = prob.unpack(best.x);
    double b_bar_n = std::clamp(best.x.back(), 1e-3, 1.0 - 1e-6);

    BidSystem sys;
    sys.v_lo = v_lo;
    sys.v_hi = v_hi;
    sys.b_bar = v_lo + span * b_bar_n;
    sys.n_logger = N_l;
    sys.n_sawmill = N_s;
    sys.nodes = nodes;
    sys.objective = best.cost;
    auto denorm = [&](std::vector<double> c) {
        for (double& v : c) v *= span;
        c[0] += v_lo;
        return c;
    };
    sys.coeffs_l = denorm(al);
    sys.coeffs_s = denorm(as);
    sys.dist_l = F_l;
    sys.dist_s = F_s;

    // diagnostics against the exact (untabulated) distributions
    double max_foc = 0.0;
    auto gauss = chebyshev_gauss_nodes(nodes);
    for (double x : gauss) {
        double b = 0.5 * (sys.b_bar + v_lo + (sys.b_bar - v_lo) * x);
        if (N_l > 0) max_foc = std::max(max_foc, std::abs(foc_residual(sys, BidderType::logger, b)));
        if (N_s > 0)
            max_foc = std::max(max_foc, std::abs(foc_residual(sys, BidderType::sawmill, b)));
    }
    sys.max_foc_residual = max_foc;

    double be = 0.0;
    for (BidderType t : {BidderType::logger, BidderType::sawmill}) {
        if ((t == BidderType::logger && N_l == 0) || (t == BidderType::sawmill && N_s == 0))
            continue;
        be = std::max(be, std::abs(inverse_bid(sys, t, v_lo) - v_lo));
        be = std::max(be, std::abs(inverse_bid(sys, t, sys.b_bar) - v_hi));
    }
    sys.max_boundary_error = be;

    bool ineq_ok = true;
    int dense = 10 * nodes;
    for (int i = 1; i < dense && ineq_ok; ++i) {
        double b = v_lo + (sys.b_bar - v_lo) * static_cast<double>(i) / dense;
        for (BidderType t : {BidderType::logger, BidderType::sawmill}) {
            if ((t == BidderType::logger && N_l == 0) ||
                (t == BidderType::sawmill && N_s == 0))
                continue;
            if (psi_derivative(sys, t, b) <= 0.0) ineq_ok = false;
            if (inverse_bid(sys, t, b) < b - 1e-6 * (1.0 + span)) ineq_ok = false;
        }
    }
    sys.inequalities_ok = ineq_ok;
    sys.converged = best.converged && max_foc <= residual_tol && ineq_ok;
    return sys;
}

inline nlohmann::json bid_system_to_json(const BidSystem& s) {
    return nlohmann::json{{"coeffs_logger", s.coeffs_l},
                          {"coeffs_sawmill", s.coeffs_s},
                          {"b_bar", s.b_bar},
                          {"v_lo", s.v_lo},
                          {"v_hi", s.v_hi},
                          {"n_logger", s.n_logger},
                          {"n_sawmill", s.n_sawmill},
                          {"nodes", s.nodes},
                          {"max_foc_residual", s.max_foc_residual},
                          {"max_boundary_error", s.max_boundary_error},
                          {"inequalities_ok", s.inequalities_ok},
                          {"converged", s.converged},
                          {"objective", s.objective}};
}

inline BidSystem bid_system_from_json(const nlohmann::json& j) {
    BidSystem s;
    s.coeffs_l = j.at("coeffs_logger").get<std::vector<double>>();
    s.coeffs_s = j.at("coeffs_sawmill").get<std::vector<double>>();
    s.b_bar = j.at("b_bar").get<double>();
    s.v_lo = j.at("v_lo").get<double>();
    s.v_hi = j.at("v_hi").get<double>();
    s.n_logger = j.at("n_logger").get<int>();
    s.n_sawmill = j.at("n_sawmill").get<int>();
    s.nodes = j.at("nodes").get<int>();
    s.max_foc_residual = j.at("max_foc_residual").get<double>();
    s.max_boundary_error = j.at("max_boundary_error").get<double>();
    s.inequalities_ok = j.at("inequalities_ok").get<bool>();
    s.converged = j.at("converged").get<bool>();
    s.objective = j.at("objective").get<double>();
    return s;
}

}  // namespace stumpage
