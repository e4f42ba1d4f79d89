#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stumpage/model_types.hpp"
#include "stumpage/numeric.hpp"
#include "stumpage/price_process.hpp"
#include "stumpage/rng.hpp"

namespace stumpage {

// Deterministic part of the per-period payoff from cutting a fraction q of
// the tract: cut volume times (gamma * price - c1 - c2 * cut volume).
// The action-specific EV shock is handled by the caller.
inline double flow_payoff(double q, double remaining, double u0, double price,
                          const DynamicParams& params) {
    if (q > remaining + 1e-12)
        throw std::domain_error("flow_payoff: action exceeds remaining timber");
    double cut = q * u0;
    return cut * (params.gamma * price - params.c1 - params.c2 * cut);
}

// Backward-induction solution of the finite-horizon harvesting problem.
// Integrated values use logsumexp plus the Euler-Mascheroni constant (mean of
// a location-0 type-I EV shock with unit scale).
class DpSolution {
public:
    DpSolution(DynamicParams params, const PriceProcess& prices, int T, double u0)
        : params_(params), T_(T), u0_(u0), n_prices_(static_cast<int>(prices.size())) {
        params_.validate();
        if (T < 1) throw std::invalid_argument("solve_dp: T must be >= 1");
        if (!(u0 > 0.0)) throw std::invalid_argument("solve_dp: u0 must be positive");

        const int R = kQuarterSteps + 1;  // remaining states 0..4
        choice_values_.assign(static_cast<std::size_t>(T) * n_prices_ * R * R,
                              -std::numeric_limits<double>::infinity());
        integrated_values_.assign(static_cast<std::size_t>(T) * n_prices_ * R, 0.0);
        ccps_.assign(static_cast<std::size_t>(T) * n_prices_ * R * R, 0.0);

        std::vector<double> feas;
        feas.reserve(R);
        for (int t = T; t >= 1; --t) {
            for (int p = 0; p < n_prices_; ++p) {
                double price = prices.level(static_cast<std::size_t>(p));
                for (int r = 0; r < R; ++r) {
                    feas.clear();
                    int q_lo = (t == T) ? r : 0;  // terminal period forces q = remaining
                    for (int q = q_lo; q <= r; ++q) {
                        double v = flow_payoff(quarters_to_fraction(q), quarters_to_fraction(r),
                                               u0, price, params_);
                        if (t < T) {
                            double ev = 0.0;
                            const auto& row = prices.row(static_cast<std::size_t>(p));
                            for (int pn = 0; pn < n_prices_; ++pn)
                                ev += row[static_cast<std::size_t>(pn)] *
                                      integrated_values_[value_index(t + 1, pn, r - q)];
                            v += params_.beta * ev;
                        }
                        choice_values_[choice_index(t, p, r, q)] = v;
                        feas.push_back(v);
                    }
                    integrated_values_[value_index(t, p, r)] =
                        log_sum_exp(feas) + kEulerMascheroni;
                    auto probs = softmax(feas);
                    for (int q = q_lo; q <= r; ++q)
                        ccps_[choice_index(t, p, r, q)] = probs[static_cast<std::size_t>(q - q_lo)];
                }
            }
        }
    }

    int horizon() const { return T_; }
    double tract_size() const { return u0_; }
    const DynamicParams& params() const { return params_; }
    int price_levels() const { return n_prices_; }

    bool feasible(const CuttingState& s, int action_quarters) const {
        if (!valid_state(s)) return false;
        if (action_quarters < 0 || action_quarters > s.remaining) return false;
        if (s.t == T_ && action_quarters != s.remaining) return false;
        return true;
    }

    double choice_value(const CuttingState& s, int action_quarters) const {
        require_state(s);
        if (!feasible(s, action_quarters))
            throw std::domain_error("choice_value: infeasible action for state");
        return choice_values_[choice_index(s.t, s.price_idx, s.remaining, action_quarters)];
    }

    double integrated_value(const CuttingState& s) const {
        require_state(s);
        return integrated_values_[value_index(s.t, s.price_idx, s.remaining)];
    }

    // Continuation value at contract start: V at t = 1, full tract standing.
    double v0(int price_idx) const {
        return integrated_value(CuttingState{1, price_idx, kQuarterSteps});
    }

    // Choice probabilities over feasible actions, indexed from the smallest
    // feasible action upward.
    std::vector<double> ccp(const CuttingState& s) const {
        require_state(s);
        int q_lo = (s.t == T_) ? s.remaining : 0;
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(s.remaining - q_lo + 1));
        for (int q = q_lo; q <= s.remaining; ++q)
            out.push_back(ccps_[choice_index(s.t, s.price_idx, s.remaining, q)]);
        return out;
    }

    int smallest_feasible_action(const CuttingState& s) const {
        return (s.t == T_) ? s.remaining : 0;
    }

private:
    bool valid_state(const CuttingState& s) const {
        return s.t >= 1 && s.t <= T_ && s.price_idx >= 0 && s.price_idx < n_prices_ &&
               s.remaining >= 0 && s.remaining <= kQuarterSteps;
    }
    void require_state(const CuttingState& s) const {
        if (!valid_state(s))
            throw std::domain_error("DpSolution: state (t=" + std::to_string(s.t) +
                                    ", p=" + std::to_string(s.price_idx) +
                                    ", r=" + std::to_string(s.remaining) +
                                    ") outside solved ranges");
    }
    std::size_t value_index(int t, int p, int r) const {
        const int R = kQuarterSteps + 1;
        return (static_cast<std::size_t>(t - 1) * n_prices_ + p) * R + r;
    }
    std::size_t choice_index(int t, int p, int r, int q) const {
        const int R = kQuarterSteps + 1;
        return ((static_cast<std::size_t>(t - 1) * n_prices_ + p) * R + r) * R + q;
    }

    DynamicParams params_;
    int T_;
    double u0_;
    int n_prices_;
    std::vector<double> choice_values_;
    std::vector<double> integrated_values_;
    std::vector<double> ccps_;
};

inline DpSolution solve_dp(const DynamicParams& params, const PriceProcess& prices, int T,
                           double u0) {
    return DpSolution(params, prices, T, u0);
}

inline std::vector<double> ccp(const DpSolution& solution, const CuttingState& state) {
    return solution.ccp(state);
}

struct CuttingPath {
    std::vector<int> actions;     // quarters cut per period, length T
    std::vector<int> price_path;  // price grid index per period, length T
    std::vector<double> flows;    // realized deterministic flow payoff per period
};

namespace detail {

inline std::size_t draw_categorical(std::span<const double> probs, std::mt19937_64& eng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(eng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u <= acc) return i;
    }
    return probs.size() - 1;
}

}  // namespace detail

// Forward-simulates harvest paths from the solved CCPs. Path i uses an RNG
// stream derived from (seed, i), so output is reproducible and independent of
// how paths are scheduled across workers.
inline std::vector<CuttingPath> simulate_paths(const DpSolution& solution,
                                               const PriceProcess& prices, std::size_t n,
                                               std::uint64_t seed, int p0_idx,
                                               unsigned threads = 1) {
    if (n < 1) throw std::invalid_argument("simulate_paths: n must be >= 1");
    if (p0_idx < 0 || p0_idx >= solution.price_levels())
        throw std::invalid_argument("simulate_paths: p0_idx out of range");

    const int T = solution.horizon();
    std::vector<CuttingPath> paths(n);
    parallel_for_index(n, threads, [&](std::size_t i) {
        auto eng = make_engine(seed, i);
        CuttingPath path;
        path.actions.resize(static_cast<std::size_t>(T));
        path.price_path.resize(static_cast<std::size_t>(T));
        path.flows.resize(static_cast<std::size_t>(T));
        int p = p0_idx;
        int r = kQuarterSteps;
        for (int t = 1; t <= T; ++t) {
            CuttingState s{t, p, r};
            auto probs = solution.ccp(s);
            int q = solution.smallest_feasible_action(s) +
                    static_cast<int>(detail::draw_categorical(probs, eng));
            path.actions[static_cast<std::size_t>(t - 1)] = q;
            path.price_path[static_cast<std::size_t>(t - 1)] = p;
            path.flows[static_cast<std::size_t>(t - 1)] =
                flow_payoff(quarters_to_fraction(q), quarters_to_fraction(r),
                            solution.tract_size(), prices.level(static_cast<std::size_t>(p)),
                            solution.params());
            r -= q;
            if (t < T)
                p = static_cast<int>(detail::draw_categorical(
                    prices.row(static_cast<std::size_t>(p)), eng));
        }
        paths[i] = std::move(path);
    });
    return paths;
}

struct ContinuationValueRow {
    int contract_length;
    double tract_size;
    int price_idx;
    double v0;
};

// V0 over a (contract length, tract size) grid at a fixed initial price.
inline std::vector<ContinuationValueRow> continuation_value_curve(
    const DynamicParams& params, const PriceProcess& prices, const std::vector<int>& T_list,
    const std::vector<double>& u0_list, int p0_idx) {
    if (T_list.empty() || u0_list.empty())
        throw std::invalid_argument("continuation_value_curve: empty sweep lists");
    std::vector<ContinuationValueRow> rows;
    rows.reserve(T_list.size() * u0_list.size());
    for (double u0 : u0_list)
        for (int T : T_list) {
            DpSolution sol = solve_dp(params, prices, T, u0);
            rows.push_back({T, u0, p0_idx, sol.v0(p0_idx)});
        }
    return rows;
}

inline void write_continuation_value_csv(const std::vector<ContinuationValueRow>& rows,
                                         const std::string& path,
                                         const std::string& comment = "") {
    CsvWriter w(path);
    if (!comment.empty()) w.comment(comment);
    w.row({"contract_length", "tract_size", "price_idx", "v0"});
    for (const auto& r : rows)
        w.row({std::to_string(r.contract_length), format_double(r.tract_size),
               std::to_string(r.price_idx), format_double(r.v0)});
}

}  // namespace stumpage
