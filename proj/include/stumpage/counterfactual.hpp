#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "stumpage/bid_solver.hpp"
#include "stumpage/cutting_dp.hpp"
#include "stumpage/distributions.hpp"
#include "stumpage/model_types.hpp"
#include "stumpage/rng.hpp"

namespace stumpage {

// One counterfactual configuration: auction setup, per-type primitives, the
// price environment, and the contract lengths to sweep.
struct Scenario {
    AuctionConfig config;
    TypeSpec spec_l;
    TypeSpec spec_s;
    DynamicParams dyn_l;
    DynamicParams dyn_s;
    PriceProcess prices;
    std::vector<int> lengths;

    int count(BidderType t) const {
        int c = 0;
        for (BidderType p : config.participants)
            if (p == t) ++c;
        return c;
    }
};

// Continuation values (v0_logger, v0_sawmill) for contract length T.
inline std::pair<double, double> continuation_values(const Scenario& sc, int T) {
    double vl = solve_dp(sc.dyn_l, sc.prices, T, sc.config.u0).v0(sc.config.p0_idx);
    double vs = solve_dp(sc.dyn_s, sc.prices, T, sc.config.u0).v0(sc.config.p0_idx);
    return {vl, vs};
}

// Independent private values: xi ~ type gamma(shape sigma, scale mu), value =
// xi * v0(type). Draws follow the participant order.
inline std::vector<double> draw_valuations(const std::vector<BidderType>& participants,
                                           const TypeSpec& spec_l, const TypeSpec& spec_s,
                                           double v0_l, double v0_s, std::mt19937_64& eng) {
    if (v0_l < 0.0 || v0_s < 0.0)
        throw std::invalid_argument("draw_valuations: continuation values must be nonnegative");
    std::gamma_distribution<double> gl(spec_l.sigma, spec_l.mu);
    std::gamma_distribution<double> gs(spec_s.sigma, spec_s.mu);
    std::vector<double> values;
    values.reserve(participants.size());
    for (BidderType t : participants) {
        if (t == BidderType::logger)
            values.push_back(gl(eng) * v0_l);
        else
            values.push_back(gs(eng) * v0_s);
    }
    return values;
}

struct RevenueEstimate {
    double revenue = 0.0;
    double se = 0.0;
    std::size_t clamped = 0;   // sealed only: value draws clamped into solver support
    bool clamp_warning = false;
    bool solver_converged = true;
};

namespace detail {

inline double second_highest(const std::vector<double>& v) {
    double hi = -std::numeric_limits<double>::infinity();
    double second = hi;
    for (double x : v) {
        if (x > hi) {
            second = hi;
            hi = x;
        } else if (x > second) {
            second = x;
        }
    }
    return second;
}

inline RevenueEstimate monte_carlo_mean(const std::vector<double>& samples) {
    RevenueEstimate r;
    r.revenue = mean(samples);
    r.se = sample_sd(samples) / std::sqrt(static_cast<double>(samples.size()));
    return r;
}

}  // namespace detail

// Oral (button) auction: payment equals the second-highest valuation.
inline RevenueEstimate revenue_oral(const Scenario& sc, std::size_t draws, std::uint64_t seed) {
    if (sc.config.participants.size() < 2)
        throw std::invalid_argument("revenue_oral: oral pricing needs at least two bidders");
    auto [v0_l, v0_s] = continuation_values(sc, sc.config.T);
    auto eng = make_engine(seed, 0x08A1);
    std::vector<double> rev(draws);
    for (std::size_t i = 0; i < draws; ++i) {
        auto values =
            draw_valuations(sc.config.participants, sc.spec_l, sc.spec_s, v0_l, v0_s, eng);
        rev[i] = detail::second_highest(values);
    }
    return detail::monte_carlo_mean(rev);
}

// Builds the sealed-bid system implied by the scenario at contract length T.
// The default Chebyshev degree is higher here than the bare solver's: the
// revenue comparisons downstream need the bid functions accurate through the
// whole value bulk, which a low-degree fit of a truncated gamma cannot give.
inline BidSystem scenario_bid_system(const Scenario& sc, int T, int degree = 22,
                                     BidWeights weights = BidWeights{}, int nodes = 0,
                                     double upper_tail = 8e-3) {
    Scenario at_T = sc;
    at_T.config.T = T;
    auto [v0_l, v0_s] = continuation_values(at_T, T);
    int n_l = sc.count(BidderType::logger);
    int n_s = sc.count(BidderType::sawmill);
    if ((n_l > 0 && !(v0_l > 0.0)) || (n_s > 0 && !(v0_s > 0.0)))
        throw std::invalid_argument(
            "scenario_bid_system: continuation value must be positive for present types");

    std::vector<GammaComponent> comps;
    if (n_l > 0) comps.push_back({sc.spec_l.sigma, sc.spec_l.mu * v0_l});
    if (n_s > 0) comps.push_back({sc.spec_s.sigma, sc.spec_s.mu * v0_s});
    auto [lo, hi] = common_support(comps, 1e-4, upper_tail);

    ValueDistribution Fl = n_l > 0 ? truncated_gamma(sc.spec_l.sigma, sc.spec_l.mu * v0_l, lo, hi)
                                   : truncated_gamma(sc.spec_s.sigma, sc.spec_s.mu * v0_s, lo, hi);
    ValueDistribution Fs = n_s > 0 ? truncated_gamma(sc.spec_s.sigma, sc.spec_s.mu * v0_s, lo, hi)
                                   : Fl;
    return solve_bid_system(Fl, Fs, n_l, n_s, degree, weights, nodes);
}

// Sealed-bid auction: winner pays own bid; bids come from the solved inverse
// equilibrium. Values outside the solver support are clamped and counted.
inline RevenueEstimate revenue_sealed(const Scenario& sc, const BidSystem& system,
                                      std::size_t draws, std::uint64_t seed) {
    if (sc.config.participants.size() < 2)
        throw std::invalid_argument("revenue_sealed: need at least two bidders");
    auto [v0_l, v0_s] = continuation_values(sc, sc.config.T);
    auto eng = make_engine(seed, 0x08A1);
    std::vector<double> rev(draws);
    std::size_t clamped = 0;
    for (std::size_t i = 0; i < draws; ++i) {
        auto values =
            draw_valuations(sc.config.participants, sc.spec_l, sc.spec_s, v0_l, v0_s, eng);
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < values.size(); ++k) {
            double v = values[k];
            if (v < system.v_lo || v > system.v_hi) {
                v = std::clamp(v, system.v_lo, system.v_hi);
                ++clamped;
            }
            top = std::max(top, bid(system, sc.config.participants[k], v));
        }
        rev[i] = top;
    }
    RevenueEstimate r = detail::monte_carlo_mean(rev);
    r.clamped = clamped;
    r.clamp_warning = clamped * 100 > draws * sc.config.participants.size();
    r.solver_converged = system.converged;
    return r;
}

struct RevenueRow {
    std::string tract_label;
    AuctionFormat format;
    std::string participants;  // e.g. "SSL"
    int contract_length;
    double revenue;
    double se;
    std::string flag;  // empty when clean
};

struct RevenueTable {
    std::vector<RevenueRow> rows;
};

struct SweepScenario {
    std::string tract_label;
    Scenario scenario;
};

inline std::string participants_label(const std::vector<BidderType>& ps) {
    std::string s;
    for (BidderType t : ps) s += (t == BidderType::sawmill ? 'S' : 'L');
    return s;
}

// Full cross product of scenarios and contract lengths. Cells are independent
// work units with seeds derived from (master seed, cell index), so results do
// not depend on scheduling.
inline RevenueTable sweep(const std::vector<SweepScenario>& scenarios,
                          const std::vector<int>& lengths, std::size_t draws,
                          std::uint64_t seed, unsigned threads = 1, int degree = 22,
                          BidWeights weights = BidWeights{}) {
    RevenueTable table;
    if (lengths.empty() || scenarios.empty()) return table;

    struct Cell {
        std::size_t scenario_idx;
        int T;
    };
    std::vector<Cell> cells;
    for (std::size_t s = 0; s < scenarios.size(); ++s)
        for (int T : lengths) cells.push_back({s, T});

    std::vector<RevenueRow> rows(cells.size());
    parallel_for_index(cells.size(), threads, [&](std::size_t i) {
        const auto& [s_idx, T] = cells[i];
        const SweepScenario& ss = scenarios[s_idx];
        Scenario sc = ss.scenario;
        sc.config.T = T;
        RevenueRow row;
        row.tract_label = ss.tract_label;
        row.format = sc.config.format;
        row.participants = participants_label(sc.config.participants);
        row.contract_length = T;
        try {
            RevenueEstimate est;
            if (sc.config.format == AuctionFormat::oral) {
                est = revenue_oral(sc, draws, derive_seed(seed, i));
            } else {
                BidSystem sys = scenario_bid_system(sc, T, degree, weights);
                est = revenue_sealed(sc, sys, draws, derive_seed(seed, i));
                if (!est.solver_converged) row.flag = "bid_solver_not_converged";
                if (est.clamp_warning) row.flag = "clamped_values";
            }
            row.revenue = est.revenue;
            row.se = est.se;
        } catch (const std::exception& e) {
            row.revenue = std::numeric_limits<double>::quiet_NaN();
            row.se = std::numeric_limits<double>::quiet_NaN();
            row.flag = e.what();
        }
        rows[i] = std::move(row);
    });
    table.rows = std::move(rows);
    return table;
}

// Wide layout mirroring the counterfactual tables: one column per length.
inline void write_revenue_wide_csv(const RevenueTable& table, const std::vector<int>& lengths,
                                   const std::string& path,
                                   const std::string& comment = "") {
    CsvWriter w(path);
    if (!comment.empty()) w.comment(comment);
    std::vector<std::string> header{"tract_size", "format", "participants"};
    for (int L : lengths) header.push_back("q" + std::to_string(L));
    w.row(header);

    // group rows by (tract, format, participants) preserving first appearance
    std::vector<std::tuple<std::string, AuctionFormat, std::string>> keys;
    for (const auto& r : table.rows) {
        auto key = std::make_tuple(r.tract_label, r.format, r.participants);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    for (const auto& key : keys) {
        std::vector<std::string> row{std::get<0>(key), to_string(std::get<1>(key)),
                                     std::get<2>(key)};
        for (int L : lengths) {
            std::string cell = "";
            for (const auto& r : table.rows)
                if (std::make_tuple(r.tract_label, r.format, r.participants) == key &&
                    r.contract_length == L)
                    cell = format_double(r.revenue);
            row.push_back(cell);
        }
        w.row(row);
    }
}

inline void write_revenue_long_csv(const RevenueTable& table, const std::string& path,
                                   const std::string& comment = "") {
    CsvWriter w(path);
    if (!comment.empty()) w.comment(comment);
    w.row({"tract_size", "format", "participants", "contract_length", "revenue", "se", "flag"});
    for (const auto& r : table.rows)
        w.row({r.tract_label, to_string(r.format), r.participants,
               std::to_string(r.contract_length), format_double(r.revenue), format_double(r.se),
               r.flag});
}

}  // namespace stumpage
