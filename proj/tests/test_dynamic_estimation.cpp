#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "stumpage/dynamic_estimation.hpp"
#include "stumpage/montecarlo.hpp"

using namespace stumpage;

namespace {

const DynamicParams kTruth{1.0, 0.5, 0.05, 0.95};

PriceProcess mc_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 10; ++i) g.push_back(i);
    return build_gaussian_transition(g, 1.0);
}

McConfig small_config(int agents, std::uint64_t seed) {
    McConfig c;
    c.agents = agents;
    c.T = 8;
    c.u0 = 1.0;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("forced single-period spells have zero log-likelihood", "[dynamic-estimation]") {
    CuttingObservation obs;
    obs.auction_id = "k1";
    obs.T = 1;
    obs.steps = {{1, 0, 4, 4}};
    PriceProcess prices = mc_grid();
    REQUIRE_THAT(cutting_loglik({obs}, kTruth, prices),
                 Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("flat payoffs give uniform choice terms", "[dynamic-estimation]") {
    // gamma = c1 = c2 = 0, beta = 1: all five first-period actions tie
    DynamicParams flat{0.0, 0.0, 0.0, 1.0};
    CuttingObservation obs;
    obs.auction_id = "k1";
    obs.T = 2;
    obs.steps = {{1, 0, 4, 4}, {2, 0, 0, 0}};
    PriceProcess prices = mc_grid();
    REQUIRE_THAT(cutting_loglik({obs}, flat, prices),
                 Catch::Matchers::WithinAbs(std::log(0.2), 1e-12));
}

TEST_CASE("log-likelihood peaks at the generating parameters on average",
          "[dynamic-estimation]") {
    PriceProcess prices = mc_grid();
    double at_truth = 0.0, at_perturbed = 0.0;
    for (std::uint64_t rep = 0; rep < 3; ++rep) {
        auto data = simulate_cutting_dataset(small_config(300, 11 + rep), rep);
        at_truth += cutting_loglik(data, kTruth, prices);
        DynamicParams off = kTruth;
        off.gamma += 0.4;
        at_perturbed += cutting_loglik(data, off, prices);
    }
    REQUIRE(at_truth > at_perturbed);
}

TEST_CASE("infeasible observed actions name the offending record", "[dynamic-estimation]") {
    CuttingObservation obs;
    obs.auction_id = "bad-spell";
    obs.T = 2;
    obs.steps = {{1, 0, 4, 4}, {2, 0, 0, 2}};  // cuts timber that is no longer standing
    PriceProcess prices = mc_grid();
    try {
        cutting_loglik({obs}, kTruth, prices);
        FAIL("expected a validation error");
    } catch (const DataError& e) {
        REQUIRE(std::string(e.what()).find("bad-spell") != std::string::npos);
    }
}

TEST_CASE("censored spells contribute only observed periods", "[dynamic-estimation]") {
    PriceProcess prices = mc_grid();
    CuttingObservation full;
    full.auction_id = "full";
    full.T = 3;
    full.steps = {{1, 4, 4, 0}, {2, 4, 4, 1}, {3, 4, 3, 3}};

    CuttingObservation censored = full;
    censored.auction_id = "cut-short";
    censored.steps.pop_back();
    censored.censored = true;

    double l_full = cutting_loglik({full}, kTruth, prices);
    double l_censored = cutting_loglik({censored}, kTruth, prices);
    // dropping periods can only remove nonpositive log terms
    REQUIRE(l_censored >= l_full);

    // incomplete spell without the censored flag is a data error
    CuttingObservation broken = censored;
    broken.censored = false;
    REQUIRE_THROWS_AS(cutting_loglik({broken}, kTruth, prices), DataError);
}

TEST_CASE("estimates are invariant to observation order", "[dynamic-estimation]") {
    PriceProcess prices = mc_grid();
    auto data = simulate_cutting_dataset(small_config(120, 5), 42);
    auto shuffled = data;
    std::mt19937_64 eng(9);
    std::shuffle(shuffled.begin(), shuffled.end(), eng);

    REQUIRE(cutting_loglik(data, kTruth, prices) ==
            cutting_loglik(shuffled, kTruth, prices));

    DynamicEstimate a = fit_dynamic(data, prices, kTruth, kTruth.beta, 2);
    DynamicEstimate b = fit_dynamic(shuffled, prices, kTruth, kTruth.beta, 2);
    REQUIRE(a.params.gamma == b.params.gamma);
    REQUIRE(a.params.c1 == b.params.c1);
    REQUIRE(a.params.c2 == b.params.c2);
}

TEST_CASE("smoke: tiny data fits without error", "[dynamic-estimation]") {
    PriceProcess prices = mc_grid();
    auto data = simulate_cutting_dataset(small_config(10, 3), 1);
    DynamicEstimate est = fit_dynamic(data, prices, kTruth, kTruth.beta, 1);
    REQUIRE(std::isfinite(est.loglik));
    REQUIRE(est.loglik <= 0.0);
}

TEST_CASE("doubling the price sensitivity moves the estimate up", "[dynamic-estimation]") {
    PriceProcess prices = mc_grid();
    McConfig base = small_config(400, 77);
    auto data_base = simulate_cutting_dataset(base, 7);

    McConfig high = base;
    high.dyn_truth.gamma = 2.0;
    auto data_high = simulate_cutting_dataset(high, 7);

    DynamicEstimate fit_base = fit_dynamic(data_base, prices, kTruth, kTruth.beta, 2);
    DynamicParams init_high = kTruth;
    init_high.gamma = 2.0;
    DynamicEstimate fit_high = fit_dynamic(data_high, prices, init_high, kTruth.beta, 2);
    REQUIRE(fit_high.params.gamma > fit_base.params.gamma);
}

TEST_CASE("bootstrap of a single cluster is degenerate", "[dynamic-estimation]") {
    PriceProcess prices = mc_grid();
    auto data = simulate_cutting_dataset(small_config(1, 21), 4);
    REQUIRE(data.size() == 1);  // every resample draws the same spell
    DynamicEstimate est = fit_dynamic(data, prices, kTruth, kTruth.beta, 1);
    BootstrapResult bs = bootstrap_dynamic(data, prices, est, 2, 5);
    REQUIRE_THAT(bs.se[0], Catch::Matchers::WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(bs.se[1], Catch::Matchers::WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(bs.se[2], Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("bootstrap is deterministic and thread-count independent",
          "[dynamic-estimation]") {
    PriceProcess prices = mc_grid();
    auto data = simulate_cutting_dataset(small_config(60, 13), 2);
    DynamicEstimate est = fit_dynamic(data, prices, kTruth, kTruth.beta, 1);
    BootstrapResult a = bootstrap_dynamic(data, prices, est, 6, 11, 1);
    BootstrapResult b = bootstrap_dynamic(data, prices, est, 6, 11, 4);
    REQUIRE(a.se == b.se);
    BootstrapResult c = bootstrap_dynamic(data, prices, est, 6, 12, 1);
    REQUIRE(a.se != c.se);  // different seed, different resamples
}

TEST_CASE("cutting CSV round-trips exactly", "[dynamic-estimation]") {
    auto data = simulate_cutting_dataset(small_config(25, 31), 9);
    auto path = std::filesystem::temp_directory_path() / "stumpage_cutting_rt.csv";
    write_cutting_csv(data, path.string());
    auto back = read_cutting_csv(path.string(), 10);
    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        REQUIRE(back[i].auction_id == data[i].auction_id);
        REQUIRE(back[i].T == data[i].T);
        REQUIRE(back[i].u0 == data[i].u0);
        REQUIRE(back[i].steps.size() == data[i].steps.size());
        for (std::size_t s = 0; s < data[i].steps.size(); ++s) {
            REQUIRE(back[i].steps[s].t == data[i].steps[s].t);
            REQUIRE(back[i].steps[s].price_idx == data[i].steps[s].price_idx);
            REQUIRE(back[i].steps[s].remaining == data[i].steps[s].remaining);
            REQUIRE(back[i].steps[s].action == data[i].steps[s].action);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("malformed cutting CSV names the line", "[dynamic-estimation]") {
    auto path = std::filesystem::temp_directory_path() / "stumpage_cutting_bad.csv";
    {
        std::ofstream out(path);
        out << "auction_id,type,T,u0,t,price_idx,q\n";
        out << "a0,logger,2,1,1,0,0.25\n";
        out << "a0,logger,2,1,2,zzz,0.75\n";
    }
    try {
        read_cutting_csv(path.string(), 10);
        FAIL("expected a parse error");
    } catch (const DataError& e) {
        REQUIRE(std::string(e.what()).find(":3:") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("observed fractions snap to the quarter grid with ties down",
          "[dynamic-estimation]") {
    REQUIRE(fraction_to_quarters(0.0) == 0);
    REQUIRE(fraction_to_quarters(0.26) == 1);
    REQUIRE(fraction_to_quarters(0.375) == 1);  // tie rounds down
    REQUIRE(fraction_to_quarters(0.376) == 2);
    REQUIRE(fraction_to_quarters(1.0) == 4);
}
