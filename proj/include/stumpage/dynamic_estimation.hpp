#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stumpage/csv.hpp"
#include "stumpage/cutting_dp.hpp"
#include "stumpage/nelder_mead.hpp"

namespace stumpage {

// One harvesting spell: per-period states and chosen cut fractions for a
// single auction winner. `censored` marks spells whose harvest is incomplete
// when the data ends; they contribute only their observed-period terms.
struct CuttingObservation {
    std::string auction_id;
    BidderType type = BidderType::logger;
    int T = 1;
    double u0 = 1.0;
    struct Step {
        int t;
        int price_idx;
        int remaining;  // quarters standing at the start of the period
        int action;     // quarters cut
    };
    std::vector<Step> steps;
    bool censored = false;
};

inline void validate_observation(const CuttingObservation& obs, int n_price_levels) {
    auto fail = [&](const std::string& what) {
        throw DataError("auction '" + obs.auction_id + "': " + what);
    };
    if (obs.T < 1) fail("contract length must be >= 1");
    if (!(obs.u0 > 0.0)) fail("tract size must be positive");
    int remaining = kQuarterSteps;
    int prev_t = 0;
    for (const auto& s : obs.steps) {
        if (s.t <= prev_t) fail("periods must be strictly increasing");
        if (s.t > obs.T) fail("period " + std::to_string(s.t) + " exceeds contract length");
        if (s.price_idx < 0 || s.price_idx >= n_price_levels)
            fail("price index " + std::to_string(s.price_idx) + " outside the grid");
        if (s.remaining != remaining)
            fail("remaining timber inconsistent at period " + std::to_string(s.t));
        if (s.action < 0 || s.action > s.remaining)
            fail("infeasible action at period " + std::to_string(s.t));
        if (s.t == obs.T && s.action != s.remaining)
            fail("terminal period must remove all remaining timber");
        remaining -= s.action;
        prev_t = s.t;
    }
    if (!obs.censored && remaining != 0)
        fail("harvest incomplete but spell not flagged censored");
}

// Input CSV columns: auction_id, type, T, u0, t, price_idx, q. Rows of one
// auction are grouped by id; q is a fraction snapped to the quarter grid.
inline std::vector<CuttingObservation> read_cutting_csv(const std::string& path,
                                                        int n_price_levels) {
    CsvTable tab = read_csv(path);
    std::size_t c_id = tab.column("auction_id");
    std::size_t c_type = tab.column("type");
    std::size_t c_T = tab.column("T");
    std::size_t c_u0 = tab.column("u0");
    std::size_t c_t = tab.column("t");
    std::size_t c_p = tab.column("price_idx");
    std::size_t c_q = tab.column("q");

    std::map<std::string, CuttingObservation> by_id;
    std::vector<std::string> id_order;
    for (std::size_t r = 0; r < tab.rows.size(); ++r) {
        const std::string& id = tab.rows[r][c_id];
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            CuttingObservation obs;
            obs.auction_id = id;
            try {
                obs.type = bidder_type_from_string(tab.rows[r][c_type]);
            } catch (const std::invalid_argument& e) {
                throw DataError(path + ":" + std::to_string(tab.line_numbers[r]) + ": " +
                                e.what());
            }
            obs.T = static_cast<int>(parse_int(tab, r, c_T, path));
            obs.u0 = parse_double(tab, r, c_u0, path);
            it = by_id.emplace(id, std::move(obs)).first;
            id_order.push_back(id);
        }
        CuttingObservation::Step step;
        step.t = static_cast<int>(parse_int(tab, r, c_t, path));
        step.price_idx = static_cast<int>(parse_int(tab, r, c_p, path));
        step.action = fraction_to_quarters(parse_double(tab, r, c_q, path));
        step.remaining = -1;  // filled below
        it->second.steps.push_back(step);
    }

    std::vector<CuttingObservation> out;
    out.reserve(id_order.size());
    for (const auto& id : id_order) {
        CuttingObservation obs = by_id[id];
        std::sort(obs.steps.begin(), obs.steps.end(),
                  [](const auto& a, const auto& b) { return a.t < b.t; });
        int remaining = kQuarterSteps;
        for (auto& s : obs.steps) {
            s.remaining = remaining;
            remaining -= s.action;
        }
        obs.censored = remaining != 0;
        validate_observation(obs, n_price_levels);
        out.push_back(std::move(obs));
    }
    return out;
}

inline void write_cutting_csv(const std::vector<CuttingObservation>& data,
                              const std::string& path, const std::string& comment = "") {
    CsvWriter w(path);
    if (!comment.empty()) w.comment(comment);
    w.row({"auction_id", "type", "T", "u0", "t", "price_idx", "q"});
    for (const auto& obs : data)
        for (const auto& s : obs.steps)
            w.row({obs.auction_id, to_string(obs.type), std::to_string(obs.T),
                   format_double(obs.u0), std::to_string(s.t), std::to_string(s.price_idx),
                   format_double(quarters_to_fraction(s.action))});
}

namespace detail {

// Observations aggregated to (state, action) counts per (T, u0) problem, so
// each likelihood evaluation solves one DP per distinct problem and walks a
// few hundred cells at most. Map-based keys keep everything order-invariant.
struct CuttingCells {
    // (T, u0) -> (t, price_idx, remaining, action) -> count
    std::map<std::pair<int, double>, std::map<std::array<int, 4>, double>> groups;

    static CuttingCells build(const std::vector<CuttingObservation>& data,
                              int n_price_levels) {
        CuttingCells cells;
        for (const auto& obs : data) {
            validate_observation(obs, n_price_levels);
            auto& g = cells.groups[{obs.T, obs.u0}];
            for (const auto& s : obs.steps)
                g[{s.t, s.price_idx, s.remaining, s.action}] += 1.0;
        }
        return cells;
    }

    double loglik(const DynamicParams& params, const PriceProcess& prices) const {
        double total = 0.0;
        for (const auto& [key, cellmap] : groups) {
            DpSolution sol = solve_dp(params, prices, key.first, key.second);
            for (const auto& [cell, count] : cellmap) {
                CuttingState s{cell[0], cell[1], cell[2]};
                auto probs = sol.ccp(s);
                int q_lo = sol.smallest_feasible_action(s);
                double p = probs[static_cast<std::size_t>(cell[3] - q_lo)];
                total += count * std::log(std::max(p, 1e-300));
            }
        }
        return total;
    }
};

}  // namespace detail

// Log-likelihood of observed cutting choices under the DP-implied CCPs.
inline double cutting_loglik(const std::vector<CuttingObservation>& data,
                             const DynamicParams& params, const PriceProcess& prices) {
    auto cells = detail::CuttingCells::build(data, static_cast<int>(prices.size()));
    return cells.loglik(params, prices);
}

struct DynamicEstimate {
    DynamicParams params{};
    double loglik = 0.0;
    std::vector<double> se;  // (gamma, c1, c2); empty until bootstrapped
    bool converged = false;
    int iterations = 0;
    int evaluations = 0;
};

// Nested fixed point MLE of (gamma, c1, c2) with beta held fixed.
inline DynamicEstimate fit_dynamic(const std::vector<CuttingObservation>& data,
                                   const PriceProcess& prices, const DynamicParams& init,
                                   double beta, int starts = 5, double tol = 1e-6) {
    auto cells = detail::CuttingCells::build(data, static_cast<int>(prices.size()));
    auto objective = [&](const std::vector<double>& x) {
        DynamicParams p{x[0], x[1], x[2], beta};
        return -cells.loglik(p, prices);
    };
    OptimResult r =
        nelder_mead_multistart(objective, {init.gamma, init.c1, init.c2}, starts, tol);
    DynamicEstimate est;
    est.params = DynamicParams{r.x[0], r.x[1], r.x[2], beta};
    est.loglik = -r.f;
    est.converged = r.converged;
    est.iterations = r.iterations;
    est.evaluations = r.evaluations;
    return est;
}

struct BootstrapResult {
    std::vector<double> se;
    int excluded = 0;  // non-convergent refits dropped from the dispersion
    int reps = 0;
    bool warning = false;  // more than 20% of refits excluded
};

// Cluster bootstrap at the auction level: resample whole spells with
// replacement, refit from the point estimate, report the dispersion.
inline BootstrapResult bootstrap_dynamic(const std::vector<CuttingObservation>& data,
                                         const PriceProcess& prices,
                                         const DynamicEstimate& fit, int reps,
                                         std::uint64_t seed, unsigned threads = 1) {
    if (reps < 2) throw std::invalid_argument("bootstrap_dynamic: reps must be >= 2");

    std::vector<std::vector<double>> draws(static_cast<std::size_t>(reps));
    std::vector<char> ok(static_cast<std::size_t>(reps), 0);
    parallel_for_index(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
        auto eng = make_engine(seed, r);
        std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
        std::vector<CuttingObservation> sample;
        sample.reserve(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) sample.push_back(data[pick(eng)]);
        DynamicEstimate e = fit_dynamic(sample, prices, fit.params, fit.params.beta,
                                        /*starts=*/1);
        draws[r] = {e.params.gamma, e.params.c1, e.params.c2};
        ok[r] = e.converged ? 1 : 0;
    });

    BootstrapResult out;
    out.reps = reps;
    std::vector<double> g, c1, c2;
    for (std::size_t r = 0; r < draws.size(); ++r) {
        if (!ok[r]) {
            ++out.excluded;
            continue;
        }
        g.push_back(draws[r][0]);
        c1.push_back(draws[r][1]);
        c2.push_back(draws[r][2]);
    }
    out.se = {sample_sd(g), sample_sd(c1), sample_sd(c2)};
    out.warning = out.excluded > reps / 5;
    return out;
}

}  // namespace stumpage
