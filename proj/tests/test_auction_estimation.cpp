#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "stumpage/auction_estimation.hpp"
#include "stumpage/montecarlo.hpp"

using namespace stumpage;

namespace {

EntryObservation entry_obs(int n, int N_l, int N_s) {
    EntryObservation o;
    o.auction_id = "k";
    o.n = n;
    o.N_l = N_l;
    o.N_s = N_s;
    return o;
}

BidObservation bid_obs(int n, BidderType winner, double tau, double v0 = 1.0) {
    BidObservation o;
    o.auction_id = "k";
    o.n = n;
    o.winner_type = winner;
    o.tau = tau;
    o.v0_l = v0;
    o.v0_s = v0;
    return o;
}

// Quadrature of the transaction density over [0, hi].
double integrate_density(int n, BidderType winner, double p_hat, const ValuationParams& params,
                         double hi, int panels = 4000) {
    double h = hi / panels;
    auto g = [&](double tau) {
        if (tau <= 0.0) return 0.0;
        return transaction_density(bid_obs(n, winner, tau), p_hat, params);
    };
    double s = g(1e-12) + g(hi);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * g(i * h);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("entry likelihood collapses to one type when the other is absent",
          "[auction-estimation]") {
    double lambda_l = 0.12;
    int N_l = 9;
    double rate = lambda_l * N_l;
    double expected =
        std::log(rate * std::exp(-rate)) - std::log(1.0 - std::exp(-rate));
    REQUIRE_THAT(entry_loglik({entry_obs(1, N_l, 0)}, lambda_l, 0.35),
                 Catch::Matchers::WithinAbs(expected, 1e-12));
}

TEST_CASE("entry likelihood is symmetric under swapping type labels",
          "[auction-estimation]") {
    REQUIRE_THAT(entry_loglik({entry_obs(2, 5, 9)}, 0.1, 0.3),
                 Catch::Matchers::WithinAbs(entry_loglik({entry_obs(2, 9, 5)}, 0.3, 0.1),
                                            1e-12));
}

TEST_CASE("entry likelihood equals brute-force enumeration", "[auction-estimation]") {
    REQUIRE_THAT(entry_loglik({entry_obs(2, 10, 10)}, 0.1, 0.15),
                 Catch::Matchers::WithinAbs(
                     std::log(oracle::entry_probability(2, 10, 10, 0.1, 0.15)), 1e-12));

    for (int n = 1; n <= 6; ++n)
        for (auto [N_l, N_s] : {std::pair{4, 11}, {10, 10}, {15, 2}}) {
            double lib = entry_loglik({entry_obs(n, N_l, N_s)}, 0.08, 0.21);
            double ref = std::log(oracle::entry_probability(n, N_l, N_s, 0.08, 0.21));
            REQUIRE_THAT(lib, Catch::Matchers::WithinAbs(ref, 1e-12));
        }
}

TEST_CASE("zero entry rates are guarded, not fatal", "[auction-estimation]") {
    double l = entry_loglik({entry_obs(2, 10, 10)}, 0.0, 0.0);
    REQUIRE(std::isfinite(l));
    REQUIRE(l <= -1e9);
}

TEST_CASE("entry MLE recovers the truth on simulated auctions", "[auction-estimation]") {
    McConfig cfg;
    cfg.auctions = 500;
    auto [entry, bids] = simulate_auction_dataset(cfg, 314);
    EntryEstimate est = fit_entry(entry, {0.2, 0.2});
    REQUIRE(est.converged);
    // Monte-Carlo-scale sampling error: about 0.03 per rate
    REQUIRE_THAT(est.lambda_l, Catch::Matchers::WithinAbs(0.1, 0.09));
    REQUIRE_THAT(est.lambda_s, Catch::Matchers::WithinAbs(0.15, 0.09));
}

TEST_CASE("single-type data matches a one-dimensional grid search", "[auction-estimation]") {
    std::vector<EntryObservation> obs;
    std::mt19937_64 eng(8);
    for (int k = 0; k < 300; ++k) {
        int N_l = 10;
        std::poisson_distribution<int> pois(0.12 * N_l);
        int n = 0;
        do { n = pois(eng); } while (n < 1);
        obs.push_back(entry_obs(n, N_l, 0));
    }
    EntryEstimate est = fit_entry(obs, {0.2, 0.2});
    REQUIRE_FALSE(est.lambda_s_identified);
    REQUIRE(est.lambda_s == 0.0);

    double best_grid = 0.0, best_val = -1e300;
    for (double lam = 0.01; lam <= 0.40; lam += 0.0005) {
        double v = entry_loglik(obs, lam, 0.0);
        if (v > best_val) {
            best_val = v;
            best_grid = lam;
        }
    }
    REQUIRE_THAT(est.lambda_l, Catch::Matchers::WithinAbs(best_grid, 1e-3));
}

TEST_CASE("rescaling potential-bidder counts rescales the rates", "[auction-estimation]") {
    McConfig cfg;
    cfg.auctions = 400;
    auto [entry, bids] = simulate_auction_dataset(cfg, 2024);
    EntryEstimate base = fit_entry(entry, {0.2, 0.2});

    auto doubled = entry;
    for (auto& o : doubled) {
        o.N_l *= 2;
        o.N_s *= 2;
    }
    EntryEstimate scaled = fit_entry(doubled, {0.1, 0.1});
    REQUIRE_THAT(scaled.lambda_l * 2.0, Catch::Matchers::WithinAbs(base.lambda_l, 1e-4));
    REQUIRE_THAT(scaled.lambda_s * 2.0, Catch::Matchers::WithinAbs(base.lambda_s, 1e-4));
}

TEST_CASE("type share arithmetic", "[auction-estimation]") {
    REQUIRE(type_share(0.1, 0.1) == 0.5);
    REQUIRE_THAT(type_share(0.1, 0.15), Catch::Matchers::WithinAbs(0.4, 1e-15));
    REQUIRE(type_share(0.0, 0.15) == 0.0);
    REQUIRE_THROWS_AS(type_share(0.0, 0.0), std::domain_error);
}

TEST_CASE("two identical bidders reduce to the classic losing-value density",
          "[auction-estimation]") {
    ValuationParams sym{1.0, 2.0, 1.0, 2.0};
    for (double p_hat : {0.2, 0.5, 0.9})
        for (double tau : {0.3, 1.0, 2.7}) {
            double d = transaction_density(bid_obs(2, BidderType::logger, tau), p_hat, sym);
            double expected =
                (1.0 - gamma_cdf(tau, 2.0, 1.0)) * gamma_pdf(tau, 2.0, 1.0);
            REQUIRE_THAT(d, Catch::Matchers::WithinAbs(expected, 1e-12));
        }
}

TEST_CASE("transaction density vanishes in the upper tail", "[auction-estimation]") {
    ValuationParams params{1.0, 1.0, 2.0, 3.0};
    REQUIRE(transaction_density(bid_obs(3, BidderType::sawmill, 400.0), 0.4, params) < 1e-30);
    REQUIRE_THROWS(transaction_density(bid_obs(2, BidderType::logger, -1.0), 0.4, params));
}

TEST_CASE("density integrates to the per-bidder win probability", "[auction-estimation]") {
    // weighting each winner type by N * p_type turns the per-bidder density
    // into the winner-type joint, which must integrate to 1
    ValuationParams params{1.0, 1.0, 2.0, 3.0};
    double p_hat = 0.4;
    for (int n : {2, 3}) {
        double total =
            n * p_hat * integrate_density(n, BidderType::logger, p_hat, params, 60.0) +
            n * (1.0 - p_hat) * integrate_density(n, BidderType::sawmill, p_hat, params, 60.0);
        REQUIRE_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-4));
    }
}

TEST_CASE("density matches simulated oral auctions", "[auction-estimation]") {
    // histogram the simulated (winner type, price) joint and compare each
    // cell with the quadrature of N * p_type * density over the cell
    ValuationParams params{1.0, 1.0, 2.0, 3.0};
    const double p_hat = 0.4;
    const int n_bidders = 2;
    const std::size_t draws = 300000;
    const double hi = 8.0;
    const int bins = 12;

    std::mt19937_64 eng(777);
    std::gamma_distribution<double> gl(params.sigma_l, params.mu_l);
    std::gamma_distribution<double> gs(params.sigma_s, params.mu_s);
    std::bernoulli_distribution is_logger(p_hat);

    std::vector<std::vector<double>> counts(2, std::vector<double>(bins, 0.0));
    for (std::size_t i = 0; i < draws; ++i) {
        double best = -1.0, second = -1.0;
        bool best_is_logger = false;
        for (int b = 0; b < n_bidders; ++b) {
            bool logger = is_logger(eng);
            double v = logger ? gl(eng) : gs(eng);
            if (v > best) {
                second = best;
                best = v;
                best_is_logger = logger;
            } else if (v > second) {
                second = v;
            }
        }
        if (second >= hi) continue;
        int bin = static_cast<int>(second / (hi / bins));
        counts[best_is_logger ? 0 : 1][static_cast<std::size_t>(bin)] += 1.0;
    }

    for (int w = 0; w < 2; ++w) {
        BidderType type = w == 0 ? BidderType::logger : BidderType::sawmill;
        double weight = n_bidders * (w == 0 ? p_hat : 1.0 - p_hat);
        for (int b = 0; b < bins; ++b) {
            double lo_edge = b * hi / bins;
            double hi_edge = (b + 1) * hi / bins;
            double cell = weight * (integrate_density(n_bidders, type, p_hat, params, hi_edge) -
                                    integrate_density(n_bidders, type, p_hat, params, lo_edge));
            double phat_cell = counts[static_cast<std::size_t>(w)][static_cast<std::size_t>(b)] /
                               static_cast<double>(draws);
            double se = std::sqrt(cell * (1.0 - cell) / static_cast<double>(draws));
            REQUIRE(std::abs(phat_cell - cell) <= 3.0 * se + 1e-6);
        }
    }
}

TEST_CASE("valuation MLE is scale equivariant", "[auction-estimation]") {
    McConfig cfg;
    cfg.auctions = 250;
    auto [entry, bids] = simulate_auction_dataset(cfg, 55);
    ValuationEstimate base = fit_valuation(bids, 0.4, {1.0, 1.0, 2.0, 3.0}, 1);

    auto scaled = bids;
    for (auto& o : scaled) {
        o.tau *= 7.0;
        o.v0_l *= 7.0;
        o.v0_s *= 7.0;
    }

    // the objective shifts by exactly -n log 7, at any parameter point
    ValuationParams probe{0.9, 1.2, 2.2, 2.6};
    double shift = static_cast<double>(bids.size()) * std::log(7.0);
    REQUIRE_THAT(valuation_loglik(scaled, 0.4, probe) + shift,
                 Catch::Matchers::WithinAbs(valuation_loglik(bids, 0.4, probe), 1e-8));

    // so the argmax is unchanged up to optimizer termination slop
    ValuationEstimate rescaled = fit_valuation(scaled, 0.4, {1.0, 1.0, 2.0, 3.0}, 1);
    REQUIRE_THAT(rescaled.params.mu_l,
                 Catch::Matchers::WithinRel(base.params.mu_l, 2e-2));
    REQUIRE_THAT(rescaled.params.sigma_l,
                 Catch::Matchers::WithinRel(base.params.sigma_l, 2e-2));
    REQUIRE_THAT(rescaled.params.mu_s,
                 Catch::Matchers::WithinRel(base.params.mu_s, 2e-2));
    REQUIRE_THAT(rescaled.params.sigma_s,
                 Catch::Matchers::WithinRel(base.params.sigma_s, 2e-2));
}

TEST_CASE("symmetric types produce matching estimates", "[auction-estimation]") {
    McConfig cfg;
    cfg.auctions = 800;
    cfg.val_truth = ValuationParams{1.0, 2.0, 1.0, 2.0};
    cfg.lambda_l = 0.12;
    cfg.lambda_s = 0.12;
    auto [entry, bids] = simulate_auction_dataset(cfg, 99);
    ValuationEstimate est = fit_valuation(bids, 0.5, {1.0, 2.0, 1.0, 2.0}, 1);
    REQUIRE_THAT(est.params.mu_l, Catch::Matchers::WithinAbs(est.params.mu_s, 0.6));
    REQUIRE_THAT(est.params.sigma_l, Catch::Matchers::WithinAbs(est.params.sigma_s, 1.2));
}

TEST_CASE("auction CSVs round-trip and validate", "[auction-estimation]") {
    McConfig cfg;
    cfg.auctions = 40;
    auto [entry, bids] = simulate_auction_dataset(cfg, 7);
    auto dir = std::filesystem::temp_directory_path();
    auto epath = (dir / "stumpage_entry_rt.csv").string();
    auto bpath = (dir / "stumpage_bids_rt.csv").string();
    write_entry_csv(entry, epath);
    write_bid_csv(bids, bpath);
    auto entry_back = read_entry_csv(epath);
    auto bids_back = read_bid_csv(bpath);
    REQUIRE(entry_back.size() == entry.size());
    REQUIRE(bids_back.size() == bids.size());
    for (std::size_t i = 0; i < bids.size(); ++i) {
        REQUIRE(bids_back[i].tau == bids[i].tau);
        REQUIRE(bids_back[i].winner_type == bids[i].winner_type);
        REQUIRE(bids_back[i].n == bids[i].n);
    }
    std::filesystem::remove(epath);
    std::filesystem::remove(bpath);
}
