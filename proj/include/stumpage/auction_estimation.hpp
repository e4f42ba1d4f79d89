#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stumpage/csv.hpp"
#include "stumpage/distributions.hpp"
#include "stumpage/model_types.hpp"
#include "stumpage/nelder_mead.hpp"
#include "stumpage/numeric.hpp"
#include "stumpage/rng.hpp"

namespace stumpage {

// Participation record for one auction. Auctions with zero entrants are
// never observed, which is why the likelihood below is truncated at n >= 1.
struct EntryObservation {
    std::string auction_id;
    int n = 1;    // active bidders
    int N_l = 0;  // potential loggers
    int N_s = 0;  // potential sawmills
    AuctionFormat format = AuctionFormat::oral;

    void validate() const {
        if (n < 1) throw DataError("auction '" + auction_id + "': n must be >= 1");
        if (N_l < 0 || N_s < 0)
            throw DataError("auction '" + auction_id + "': potential counts must be >= 0");
    }
};

// Winner identity and transaction price for one auction, plus the
// continuation values entering the valuation scale of each type.
struct BidObservation {
    std::string auction_id;
    int n = 2;  // active bidders
    BidderType winner_type = BidderType::logger;
    double tau = 1.0;  // transaction price
    double v0_l = 1.0;
    double v0_s = 1.0;

    void validate() const {
        if (n < 2)
            throw DataError("auction '" + auction_id +
                            "': transaction price requires n >= 2 bidders");
        if (!(tau > 0.0)) throw DataError("auction '" + auction_id + "': tau must be positive");
        if (!(v0_l > 0.0) || !(v0_s > 0.0))
            throw DataError("auction '" + auction_id + "': continuation values must be positive");
    }
};

// Truncated two-type Poisson entry likelihood: entrant counts per type are
// Poisson(lambda_m * N_m), conditioned on at least one entrant overall.
inline double entry_loglik(const std::vector<EntryObservation>& obs, double lambda_l,
                           double lambda_s) {
    if (lambda_l < 0.0 || lambda_s < 0.0)
        throw std::invalid_argument("entry_loglik: rates must be nonnegative");
    double total = 0.0;
    for (const auto& o : obs) {
        o.validate();
        double rl = lambda_l * o.N_l;
        double rs = lambda_s * o.N_s;
        if (rl <= 0.0 && rs <= 0.0) {
            // impossible to observe n >= 1; guard instead of returning -inf
            total += -1e10;
            continue;
        }
        std::vector<double> terms;
        terms.reserve(static_cast<std::size_t>(o.n) + 1);
        for (int j = 0; j <= o.n; ++j)
            terms.push_back(log_poisson_pmf(j, rl) + log_poisson_pmf(o.n - j, rs));
        double log_num = log_sum_exp(terms);
        double log_p0 = -(rl + rs);  // both types draw zero entrants
        double log_den = std::log1p(-std::exp(log_p0));
        total += log_num - log_den;
    }
    return total;
}

struct EntryEstimate {
    double lambda_l = 0.0;
    double lambda_s = 0.0;
    double se_l = 0.0;
    double se_s = 0.0;
    double loglik = 0.0;
    bool converged = false;
    bool lambda_l_identified = true;  // false when no auction has potential bidders of the type
    bool lambda_s_identified = true;
};

inline EntryEstimate fit_entry(const std::vector<EntryObservation>& obs,
                               std::pair<double, double> init = {0.2, 0.2},
                               int bootstrap_reps = 0, std::uint64_t seed = 0,
                               unsigned threads = 1) {
    if (obs.empty()) throw std::invalid_argument("fit_entry: no observations");
    bool has_l = false, has_s = false;
    for (const auto& o : obs) {
        has_l = has_l || o.N_l > 0;
        has_s = has_s || o.N_s > 0;
    }

    auto fit_once = [&](const std::vector<EntryObservation>& sample, double il, double is) {
        // optimize in log space to keep rates positive
        auto objective = [&](const std::vector<double>& x) {
            return -entry_loglik(sample, std::exp(x[0]), std::exp(x[1]));
        };
        return nelder_mead_multistart(objective,
                                      {std::log(std::max(il, 1e-8)), std::log(std::max(is, 1e-8))},
                                      /*starts=*/3, 1e-8);
    };

    OptimResult r = fit_once(obs, init.first, init.second);
    EntryEstimate est;
    est.lambda_l = has_l ? std::exp(r.x[0]) : 0.0;
    est.lambda_s = has_s ? std::exp(r.x[1]) : 0.0;
    est.lambda_l_identified = has_l;
    est.lambda_s_identified = has_s;
    est.loglik = -r.f;
    est.converged = r.converged;

    if (bootstrap_reps >= 2) {
        std::vector<std::pair<double, double>> draws(static_cast<std::size_t>(bootstrap_reps));
        parallel_for_index(static_cast<std::size_t>(bootstrap_reps), threads,
                           [&](std::size_t b) {
                               auto eng = make_engine(seed, b);
                               std::uniform_int_distribution<std::size_t> pick(0, obs.size() - 1);
                               std::vector<EntryObservation> sample;
                               sample.reserve(obs.size());
                               for (std::size_t i = 0; i < obs.size(); ++i)
                                   sample.push_back(obs[pick(eng)]);
                               OptimResult rb = fit_once(sample, est.lambda_l, est.lambda_s);
                               draws[b] = {std::exp(rb.x[0]), std::exp(rb.x[1])};
                           });
        std::vector<double> ls, ss;
        for (const auto& [l, s] : draws) {
            ls.push_back(l);
            ss.push_back(s);
        }
        est.se_l = sample_sd(ls);
        est.se_s = sample_sd(ss);
    }
    return est;
}

// Fraction of loggers among entrants implied by the entry rates.
inline double type_share(double lambda_l, double lambda_s) {
    if (!(lambda_l + lambda_s > 0.0))
        throw std::domain_error("type_share: both entry rates are zero");
    return lambda_l / (lambda_l + lambda_s);
}

struct ValuationParams {
    double mu_l, sigma_l, mu_s, sigma_s;
};

// Density of the event "a bidder of winner_type wins among n bidders at
// transaction price tau" in the second-price (oral) equilibrium. The winner's
// value survives above tau; the opponents' type mix is binomial with logger
// probability p_hat; the second-highest value lands on tau.
inline double transaction_density(const BidObservation& obs, double p_hat,
                                  const ValuationParams& params) {
    obs.validate();
    if (p_hat < 0.0 || p_hat > 1.0)
        throw std::invalid_argument("transaction_density: p_hat must lie in [0, 1]");

    const double scale_l = params.mu_l * obs.v0_l;
    const double scale_s = params.mu_s * obs.v0_s;
    const double Fl = gamma_cdf(obs.tau, params.sigma_l, scale_l);
    const double Fs = gamma_cdf(obs.tau, params.sigma_s, scale_s);
    const double fl = gamma_pdf(obs.tau, params.sigma_l, scale_l);
    const double fs = gamma_pdf(obs.tau, params.sigma_s, scale_s);
    const double survive =
        obs.winner_type == BidderType::logger ? 1.0 - Fl : 1.0 - Fs;

    const int opponents = obs.n - 1;
    double mixture = 0.0;
    double log_choose = 0.0;  // running log C(opponents, j)
    for (int j = 0; j <= opponents; ++j) {
        if (j > 0)
            log_choose += std::log(static_cast<double>(opponents - j + 1)) -
                          std::log(static_cast<double>(j));
        // pow keeps p_hat^0 = 1 exact at the boundary shares
        double comp = std::exp(log_choose) * std::pow(p_hat, j) * std::pow(1.0 - p_hat, opponents - j);
        double second = 0.0;
        if (j >= 1) second += j * fl * std::pow(Fl, j - 1) * std::pow(Fs, opponents - j);
        if (opponents - j >= 1)
            second += (opponents - j) * fs * std::pow(Fl, j) * std::pow(Fs, opponents - j - 1);
        mixture += comp * second;
    }
    return survive * mixture;
}

struct ValuationEstimate {
    ValuationParams params{};
    std::vector<double> se;  // (mu_l, sigma_l, mu_s, sigma_s); empty until bootstrapped
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
};

inline double valuation_loglik(const std::vector<BidObservation>& obs, double p_hat,
                               const ValuationParams& params) {
    double total = 0.0;
    for (const auto& o : obs) {
        double d = transaction_density(o, p_hat, params);
        total += std::log(std::max(d, 1e-300));
    }
    return total;
}

// MLE of the per-type gamma valuation parameters from winner identities and
// transaction prices, p_hat held fixed from the entry stage.
inline ValuationEstimate fit_valuation(const std::vector<BidObservation>& obs, double p_hat,
                                       ValuationParams init = {1.0, 1.0, 1.0, 1.0},
                                       int starts = 5, int bootstrap_reps = 0,
                                       std::uint64_t seed = 0, unsigned threads = 1) {
    if (obs.empty()) throw std::invalid_argument("fit_valuation: no observations");
    for (const auto& o : obs) o.validate();

    auto fit_once = [&](const std::vector<BidObservation>& sample, const ValuationParams& x0,
                        int n_starts) {
        auto objective = [&](const std::vector<double>& x) {
            ValuationParams p{std::exp(x[0]), std::exp(x[1]), std::exp(x[2]), std::exp(x[3])};
            return -valuation_loglik(sample, p_hat, p);
        };
        std::vector<double> start{std::log(x0.mu_l), std::log(x0.sigma_l), std::log(x0.mu_s),
                                  std::log(x0.sigma_s)};
        return nelder_mead_multistart(objective, start, n_starts, 1e-6, 3000);
    };

    OptimResult r = fit_once(obs, init, starts);
    ValuationEstimate est;
    est.params = ValuationParams{std::exp(r.x[0]), std::exp(r.x[1]), std::exp(r.x[2]),
                                 std::exp(r.x[3])};
    est.loglik = -r.f;
    est.converged = r.converged;
    est.iterations = r.iterations;

    if (bootstrap_reps >= 2) {
        std::vector<std::array<double, 4>> draws(static_cast<std::size_t>(bootstrap_reps));
        parallel_for_index(
            static_cast<std::size_t>(bootstrap_reps), threads, [&](std::size_t b) {
                auto eng = make_engine(seed, b);
                std::uniform_int_distribution<std::size_t> pick(0, obs.size() - 1);
                std::vector<BidObservation> sample;
                sample.reserve(obs.size());
                for (std::size_t i = 0; i < obs.size(); ++i) sample.push_back(obs[pick(eng)]);
                OptimResult rb = fit_once(sample, est.params, 1);
                draws[b] = {std::exp(rb.x[0]), std::exp(rb.x[1]), std::exp(rb.x[2]),
                            std::exp(rb.x[3])};
            });
        est.se.resize(4);
        for (std::size_t k = 0; k < 4; ++k) {
            std::vector<double> v;
            v.reserve(draws.size());
            for (const auto& d : draws) v.push_back(d[k]);
            est.se[k] = sample_sd(v);
        }
    }
    return est;
}

// ---- CSV ingestion -------------------------------------------------------

// Entry CSV columns: auction_id, format, n, N_l, N_s.
inline std::vector<EntryObservation> read_entry_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    std::size_t c_id = t.column("auction_id");
    std::size_t c_fmt = t.column("format");
    std::size_t c_n = t.column("n");
    std::size_t c_nl = t.column("N_l");
    std::size_t c_ns = t.column("N_s");
    std::vector<EntryObservation> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        EntryObservation o;
        o.auction_id = t.rows[r][c_id];
        try {
            o.format = auction_format_from_string(t.rows[r][c_fmt]);
        } catch (const std::invalid_argument& e) {
            throw DataError(path + ":" + std::to_string(t.line_numbers[r]) + ": " + e.what());
        }
        o.n = static_cast<int>(parse_int(t, r, c_n, path));
        o.N_l = static_cast<int>(parse_int(t, r, c_nl, path));
        o.N_s = static_cast<int>(parse_int(t, r, c_ns, path));
        try {
            o.validate();
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(t.line_numbers[r]) + ": " + e.what());
        }
        out.push_back(std::move(o));
    }
    return out;
}

inline void write_entry_csv(const std::vector<EntryObservation>& obs, const std::string& path,
                            const std::string& comment = "") {
    CsvWriter w(path);
    if (!comment.empty()) w.comment(comment);
    w.row({"auction_id", "format", "n", "N_l", "N_s"});
    for (const auto& o : obs)
        w.row({o.auction_id, to_string(o.format), std::to_string(o.n), std::to_string(o.N_l),
               std::to_string(o.N_s)});
}

// Bid CSV columns: auction_id, n, winner_type, tau, v0_l, v0_s.
inline std::vector<BidObservation> read_bid_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    std::size_t c_id = t.column("auction_id");
    std::size_t c_n = t.column("n");
    std::size_t c_w = t.column("winner_type");
    std::size_t c_tau = t.column("tau");
    std::size_t c_vl = t.column("v0_l");
    std::size_t c_vs = t.column("v0_s");
    std::vector<BidObservation> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        BidObservation o;
        o.auction_id = t.rows[r][c_id];
        o.n = static_cast<int>(parse_int(t, r, c_n, path));
        try {
            o.winner_type = bidder_type_from_string(t.rows[r][c_w]);
        } catch (const std::invalid_argument& e) {
            throw DataError(path + ":" + std::to_string(t.line_numbers[r]) + ": " + e.what());
        }
        o.tau = parse_double(t, r, c_tau, path);
        o.v0_l = parse_double(t, r, c_vl, path);
        o.v0_s = parse_double(t, r, c_vs, path);
        try {
            o.validate();
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(t.line_numbers[r]) + ": " + e.what());
        }
        out.push_back(std::move(o));
    }
    return out;
}

inline void write_bid_csv(const std::vector<BidObservation>& obs, const std::string& path,
                          const std::string& comment = "") {
    CsvWriter w(path);
    if (!comment.empty()) w.comment(comment);
    w.row({"auction_id", "n", "winner_type", "tau", "v0_l", "v0_s"});
    for (const auto& o : obs)
        w.row({o.auction_id, std::to_string(o.n), to_string(o.winner_type),
               format_double(o.tau), format_double(o.v0_l), format_double(o.v0_s)});
}

}  // namespace stumpage
