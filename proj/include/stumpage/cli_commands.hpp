#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stumpage/auction_estimation.hpp"
#include "stumpage/counterfactual.hpp"
#include "stumpage/cutting_dp.hpp"
#include "stumpage/dynamic_estimation.hpp"
#include "stumpage/montecarlo.hpp"
#include "stumpage/price_process.hpp"

namespace stumpage::cli {

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& context) {
    if (!obj.is_object()) throw ConfigError(context + ": expected a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(context + ": unknown key '" + it.key() + "'");
}

inline void require_input_file(const json& block, const std::string& key,
                               const std::string& context) {
    if (!block.contains(key)) return;
    std::string path = block.at(key).get<std::string>();
    if (!std::filesystem::exists(path))
        throw ConfigError(context + ": input file does not exist: " + path);
}

inline void check_output_path(const std::string& path, const std::string& context) {
    std::filesystem::path p(path);
    if (p.has_parent_path() && !std::filesystem::exists(p.parent_path()))
        throw ConfigError(context + ": output directory does not exist: " +
                          p.parent_path().string());
}

// Price environment: an explicit grid with gaussian transitions, a uniform
// grid spec, or a raw series CSV discretized and counted.
inline PriceProcess parse_price_spec(const json& spec) {
    check_keys(spec, {"grid", "grid_min", "grid_max", "levels", "variance", "series_csv",
                      "smoothing"},
               "price");
    if (spec.contains("series_csv")) {
        std::string path = spec.at("series_csv").get<std::string>();
        if (!std::filesystem::exists(path))
            throw ConfigError("price.series_csv: input file does not exist: " + path);
        auto series = read_price_series_csv(path);
        int levels = spec.value("levels", 10);
        double smoothing = spec.value("smoothing", 1.0);
        auto disc = discretize_prices(series, static_cast<std::size_t>(levels));
        return estimate_transition(series, disc.grid, smoothing);
    }
    double variance = spec.value("variance", 1.0);
    if (spec.contains("grid"))
        return build_gaussian_transition(spec.at("grid").get<std::vector<double>>(), variance);
    double lo = spec.value("grid_min", 1.0);
    double hi = spec.value("grid_max", 10.0);
    int levels = spec.value("levels", 10);
    if (levels < 2) throw ConfigError("price.levels must be >= 2");
    std::vector<double> grid(static_cast<std::size_t>(levels));
    for (int i = 0; i < levels; ++i)
        grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (levels - 1);
    return build_gaussian_transition(std::move(grid), variance);
}

struct CommonOptions {
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

inline CommonOptions parse_common(const json& root) {
    CommonOptions opt;
    opt.seed = root.value("seed", std::uint64_t{1});
    opt.threads = root.value("threads", 1u);
    if (opt.threads < 1) throw ConfigError("threads must be >= 1");
    return opt;
}

inline void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path);
    out << j.dump(2) << '\n';
}

inline json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return j;
}

// ---- solve-dp --------------------------------------------------------------

inline int cmd_solve_dp(const json& root) {
    check_keys(root, {"seed", "threads", "solve_dp"}, "config");
    CommonOptions opt = parse_common(root);
    if (!root.contains("solve_dp")) throw ConfigError("config: missing 'solve_dp' block");
    const json& b = root.at("solve_dp");
    check_keys(b, {"gamma", "c1", "c2", "beta", "price", "contract_lengths", "tract_sizes",
                   "p0_idx", "output_csv"},
               "solve_dp");

    DynamicParams params{b.at("gamma").get<double>(), b.at("c1").get<double>(),
                         b.at("c2").get<double>(), b.value("beta", 0.95)};
    PriceProcess prices = parse_price_spec(b.value("price", json::object()));
    auto lengths = b.at("contract_lengths").get<std::vector<int>>();
    auto sizes = b.at("tract_sizes").get<std::vector<double>>();
    int p0 = b.value("p0_idx", 0);
    std::string out_csv = b.at("output_csv").get<std::string>();
    check_output_path(out_csv, "solve_dp");

    auto rows = continuation_value_curve(params, prices, lengths, sizes, p0);
    write_continuation_value_csv(rows, out_csv, "seed=" + std::to_string(opt.seed));
    std::cout << json{{"command", "solve-dp"}, {"seed", opt.seed}, {"output_csv", out_csv}}.dump()
              << std::endl;
    return 0;
}

// ---- estimate ---------------------------------------------------------------

inline int cmd_estimate(const json& root) {
    check_keys(root, {"seed", "threads", "estimate"}, "config");
    CommonOptions opt = parse_common(root);
    if (!root.contains("estimate")) throw ConfigError("config: missing 'estimate' block");
    const json& b = root.at("estimate");
    check_keys(b,
               {"cutting_csv", "entry_csv", "bids_csv", "price", "beta", "init_dynamic",
                "init_entry", "init_valuation", "p_hat", "bootstrap_reps",
                "dynamic_fit_starts", "valuation_fit_starts", "output_json"},
               "estimate");
    require_input_file(b, "cutting_csv", "estimate");
    require_input_file(b, "entry_csv", "estimate");
    require_input_file(b, "bids_csv", "estimate");
    std::string out_json = b.at("output_json").get<std::string>();
    check_output_path(out_json, "estimate");

    PriceProcess prices = parse_price_spec(b.value("price", json::object()));
    double beta = b.value("beta", 0.95);
    int bootstrap_reps = b.value("bootstrap_reps", 0);
    int dyn_starts = b.value("dynamic_fit_starts", 5);
    int val_starts = b.value("valuation_fit_starts", 3);

    json report{{"command", "estimate"}, {"seed", opt.seed}};

    // stage 1: dynamic parameters, per type on disjoint subsamples
    if (b.contains("cutting_csv")) {
        auto data = read_cutting_csv(b.at("cutting_csv").get<std::string>(),
                                     static_cast<int>(prices.size()));
        json init = b.value("init_dynamic", json{{"gamma", 0.5}, {"c1", 0.5}, {"c2", 0.01}});
        DynamicParams init_params{init.at("gamma").get<double>(), init.at("c1").get<double>(),
                                  init.at("c2").get<double>(), beta};
        json dyn_out;
        for (BidderType type : {BidderType::logger, BidderType::sawmill}) {
            std::vector<CuttingObservation> subsample;
            for (const auto& obs : data)
                if (obs.type == type) subsample.push_back(obs);
            if (subsample.empty()) continue;
            DynamicEstimate est = fit_dynamic(subsample, prices, init_params, beta, dyn_starts);
            json je{{"gamma", est.params.gamma}, {"c1", est.params.c1},
                    {"c2", est.params.c2},     {"beta", beta},
                    {"loglik", est.loglik},    {"converged", est.converged},
                    {"iterations", est.iterations}};
            if (bootstrap_reps >= 2) {
                BootstrapResult bs = bootstrap_dynamic(subsample, prices, est, bootstrap_reps,
                                                       derive_seed(opt.seed, 0xB001),
                                                       opt.threads);
                je["se"] = bs.se;
                je["bootstrap_excluded"] = bs.excluded;
                je["bootstrap_warning"] = bs.warning;
            }
            dyn_out[to_string(type)] = je;
        }
        report["dynamic"] = dyn_out;
    }

    // stage 2: entry rates, per auction format
    double p_hat = b.value("p_hat", -1.0);
    if (b.contains("entry_csv")) {
        auto entry = read_entry_csv(b.at("entry_csv").get<std::string>());
        json init = b.value("init_entry", json{{"lambda_l", 0.2}, {"lambda_s", 0.2}});
        std::pair<double, double> init_pair{init.at("lambda_l").get<double>(),
                                            init.at("lambda_s").get<double>()};
        json entry_out;
        for (AuctionFormat fmt : {AuctionFormat::oral, AuctionFormat::sealed}) {
            std::vector<EntryObservation> subset;
            for (const auto& o : entry)
                if (o.format == fmt) subset.push_back(o);
            if (subset.empty()) continue;
            EntryEstimate est = fit_entry(subset, init_pair, bootstrap_reps,
                                          derive_seed(opt.seed, 0xB002), opt.threads);
            entry_out[to_string(fmt)] = {{"lambda_l", est.lambda_l},
                                         {"lambda_s", est.lambda_s},
                                         {"se_l", est.se_l},
                                         {"se_s", est.se_s},
                                         {"loglik", est.loglik},
                                         {"converged", est.converged},
                                         {"lambda_l_identified", est.lambda_l_identified},
                                         {"lambda_s_identified", est.lambda_s_identified}};
            if (fmt == AuctionFormat::oral && p_hat < 0.0)
                p_hat = type_share(est.lambda_l, est.lambda_s);
        }
        if (p_hat < 0.0 && !entry_out.empty()) {
            const auto& any = entry_out.begin().value();
            p_hat = type_share(any.at("lambda_l").get<double>(),
                               any.at("lambda_s").get<double>());
        }
        report["entry"] = entry_out;
    }

    // stage 3: valuation distribution from winner identity and price
    if (b.contains("bids_csv")) {
        if (p_hat < 0.0)
            throw ConfigError(
                "estimate: valuation stage needs an entry_csv or an explicit p_hat");
        auto bids = read_bid_csv(b.at("bids_csv").get<std::string>());
        json init = b.value("init_valuation", json{{"mu_l", 1.0},
                                                   {"sigma_l", 1.0},
                                                   {"mu_s", 1.0},
                                                   {"sigma_s", 1.0}});
        ValuationParams init_params{init.at("mu_l").get<double>(),
                                    init.at("sigma_l").get<double>(),
                                    init.at("mu_s").get<double>(),
                                    init.at("sigma_s").get<double>()};
        ValuationEstimate est =
            fit_valuation(bids, p_hat, init_params, val_starts, bootstrap_reps,
                          derive_seed(opt.seed, 0xB003), opt.threads);
        json jv{{"mu_l", est.params.mu_l},       {"sigma_l", est.params.sigma_l},
                {"mu_s", est.params.mu_s},       {"sigma_s", est.params.sigma_s},
                {"p_hat", p_hat},                {"loglik", est.loglik},
                {"converged", est.converged}};
        if (!est.se.empty()) jv["se"] = est.se;
        report["valuation"] = jv;
    }

    write_json_file(report, out_json);
    std::cout << json{{"command", "estimate"}, {"seed", opt.seed}, {"output_json", out_json}}
                     .dump()
              << std::endl;
    return 0;
}

// ---- solve-bids --------------------------------------------------------------

inline int cmd_solve_bids(const json& root) {
    check_keys(root, {"seed", "threads", "solve_bids"}, "config");
    CommonOptions opt = parse_common(root);
    if (!root.contains("solve_bids")) throw ConfigError("config: missing 'solve_bids' block");
    const json& b = root.at("solve_bids");
    check_keys(b, {"n_logger", "n_sawmill", "logger", "sawmill", "degree", "nodes", "weights",
                   "lower_tail", "upper_tail", "output_json"},
               "solve_bids");
    int n_l = b.at("n_logger").get<int>();
    int n_s = b.at("n_sawmill").get<int>();
    int degree = b.value("degree", 7);
    int nodes = b.value("nodes", 0);
    double lower_tail = b.value("lower_tail", 1e-4);
    double upper_tail = b.value("upper_tail", 8e-3);
    BidWeights weights;
    if (b.contains("weights")) {
        auto w = b.at("weights").get<std::vector<double>>();
        if (w.size() != 3) throw ConfigError("solve_bids.weights must have 3 entries");
        weights = BidWeights{w[0], w[1], w[2]};
    }
    std::string out_json = b.at("output_json").get<std::string>();
    check_output_path(out_json, "solve_bids");

    auto parse_type = [&](const std::string& key) {
        const json& t = b.at(key);
        check_keys(t, {"mu", "sigma", "v0"}, "solve_bids." + key);
        return std::tuple<double, double, double>(t.at("mu").get<double>(),
                                                  t.at("sigma").get<double>(),
                                                  t.value("v0", 1.0));
    };
    std::vector<GammaComponent> comps;
    double mu_l = 1, sig_l = 1, v0_l = 1, mu_s = 1, sig_s = 1, v0_s = 1;
    if (n_l > 0) {
        std::tie(mu_l, sig_l, v0_l) = parse_type("logger");
        comps.push_back({sig_l, mu_l * v0_l});
    }
    if (n_s > 0) {
        std::tie(mu_s, sig_s, v0_s) = parse_type("sawmill");
        comps.push_back({sig_s, mu_s * v0_s});
    }
    if (comps.empty()) throw ConfigError("solve_bids: no bidders configured");
    auto [lo, hi] = common_support(comps, lower_tail, upper_tail);
    ValueDistribution Fl = n_l > 0 ? truncated_gamma(sig_l, mu_l * v0_l, lo, hi)
                                   : truncated_gamma(sig_s, mu_s * v0_s, lo, hi);
    ValueDistribution Fs = n_s > 0 ? truncated_gamma(sig_s, mu_s * v0_s, lo, hi) : Fl;

    BidSystem sys = solve_bid_system(Fl, Fs, n_l, n_s, degree, weights, nodes);
    json out = bid_system_to_json(sys);
    out["seed"] = opt.seed;
    write_json_file(out, out_json);
    std::cout << json{{"command", "solve-bids"},
                      {"seed", opt.seed},
                      {"converged", sys.converged},
                      {"max_foc_residual", sys.max_foc_residual},
                      {"output_json", out_json}}
                     .dump()
              << std::endl;
    return sys.converged ? 0 : 2;
}

// ---- counterfactual ----------------------------------------------------------

inline int cmd_counterfactual(const json& root) {
    check_keys(root, {"seed", "threads", "counterfactual"}, "config");
    CommonOptions opt = parse_common(root);
    if (!root.contains("counterfactual"))
        throw ConfigError("config: missing 'counterfactual' block");
    const json& b = root.at("counterfactual");
    check_keys(b,
               {"dynamic", "beta", "valuation", "price", "p0_idx", "tract_sizes",
                "compositions", "formats", "lengths", "draws", "degree", "output_csv",
                "output_long_csv"},
               "counterfactual");

    double beta = b.value("beta", 0.95);
    auto parse_dyn = [&](const std::string& key) {
        const json& d = b.at("dynamic").at(key);
        check_keys(d, {"gamma", "c1", "c2"}, "counterfactual.dynamic." + key);
        return DynamicParams{d.at("gamma").get<double>(), d.at("c1").get<double>(),
                             d.at("c2").get<double>(), beta};
    };
    auto parse_val = [&](const std::string& key, BidderType t) {
        const json& v = b.at("valuation").at(key);
        check_keys(v, {"mu", "sigma", "lambda"}, "counterfactual.valuation." + key);
        TypeSpec spec{t, v.at("mu").get<double>(), v.at("sigma").get<double>(),
                      v.value("lambda", 0.0)};
        spec.validate();
        return spec;
    };
    DynamicParams dyn_l = parse_dyn("logger");
    DynamicParams dyn_s = parse_dyn("sawmill");
    TypeSpec spec_l = parse_val("logger", BidderType::logger);
    TypeSpec spec_s = parse_val("sawmill", BidderType::sawmill);
    PriceProcess prices = parse_price_spec(b.value("price", json::object()));
    int p0 = b.value("p0_idx", 0);
    auto lengths = b.value("lengths", std::vector<int>{4, 8, 12, 16});
    std::size_t draws = b.value("draws", std::size_t{100000});
    int degree = b.value("degree", 7);

    std::vector<std::string> formats = b.value("formats", std::vector<std::string>{"oral"});
    const json& tracts = b.at("tract_sizes");
    check_keys(tracts, {"Small", "Large"}, "counterfactual.tract_sizes");

    std::vector<SweepScenario> scenarios;
    for (auto it = tracts.begin(); it != tracts.end(); ++it) {
        double u0 = it.value().get<double>();
        for (const std::string& comp : b.at("compositions").get<std::vector<std::string>>()) {
            std::vector<BidderType> participants;
            for (char c : comp) participants.push_back(bidder_type_from_string(std::string(1, c)));
            for (const std::string& fmt : formats) {
                AuctionConfig cfg;
                cfg.T = lengths.empty() ? 1 : lengths.front();
                cfg.u0 = u0;
                cfg.p0_idx = p0;
                cfg.format = auction_format_from_string(fmt);
                cfg.participants = participants;
                cfg.validate();
                scenarios.push_back(SweepScenario{
                    it.key(), Scenario{cfg, spec_l, spec_s, dyn_l, dyn_s, prices, lengths}});
            }
        }
    }

    RevenueTable table = sweep(scenarios, lengths, draws, opt.seed, opt.threads, degree);

    std::string comment = "seed=" + std::to_string(opt.seed);
    if (b.contains("output_csv")) {
        std::string path = b.at("output_csv").get<std::string>();
        check_output_path(path, "counterfactual");
        write_revenue_wide_csv(table, lengths, path, comment);
    }
    if (b.contains("output_long_csv")) {
        std::string path = b.at("output_long_csv").get<std::string>();
        check_output_path(path, "counterfactual");
        write_revenue_long_csv(table, path, comment);
    }
    std::cout << json{{"command", "counterfactual"},
                      {"seed", opt.seed},
                      {"cells", table.rows.size()}}
                     .dump()
              << std::endl;
    return 0;
}

// ---- montecarlo ---------------------------------------------------------------

inline McConfig parse_mc_config(const json& b, const CommonOptions& opt) {
    check_keys(b,
               {"reps", "auctions", "agents", "truth", "beta", "price", "T", "u0",
                "potential_min", "potential_max", "dynamic_fit_starts",
                "valuation_fit_starts", "output_csv", "output_json", "emit_data_dir"},
               "montecarlo");
    McConfig cfg;
    cfg.reps = b.value("reps", 500);
    cfg.auctions = b.value("auctions", 500);
    cfg.agents = b.value("agents", 1000);
    if (b.contains("truth")) {
        const json& t = b.at("truth");
        check_keys(t, {"mu_l", "sigma_l", "mu_s", "sigma_s", "lambda_l", "lambda_s", "gamma",
                       "c1", "c2"},
                   "montecarlo.truth");
        cfg.val_truth = ValuationParams{t.value("mu_l", 1.0), t.value("sigma_l", 1.0),
                                        t.value("mu_s", 2.0), t.value("sigma_s", 3.0)};
        cfg.lambda_l = t.value("lambda_l", 0.1);
        cfg.lambda_s = t.value("lambda_s", 0.15);
        cfg.dyn_truth.gamma = t.value("gamma", 1.0);
        cfg.dyn_truth.c1 = t.value("c1", 0.5);
        cfg.dyn_truth.c2 = t.value("c2", 0.05);
    }
    cfg.dyn_truth.beta = b.value("beta", 0.95);
    if (b.contains("price")) {
        const json& p = b.at("price");
        check_keys(p, {"grid_min", "grid_max", "levels", "variance"}, "montecarlo.price");
        cfg.grid_min = p.value("grid_min", 1.0);
        cfg.grid_max = p.value("grid_max", 10.0);
        cfg.grid_levels = p.value("levels", 10);
        cfg.grid_variance = p.value("variance", 1.0);
    }
    cfg.T = b.value("T", 8);
    cfg.u0 = b.value("u0", 1.0);
    cfg.potential_min = b.value("potential_min", 5);
    cfg.potential_max = b.value("potential_max", 15);
    cfg.dynamic_fit_starts = b.value("dynamic_fit_starts", 5);
    cfg.valuation_fit_starts = b.value("valuation_fit_starts", 3);
    cfg.seed = opt.seed;
    cfg.threads = opt.threads;
    return cfg;
}

inline int cmd_montecarlo(const json& root) {
    check_keys(root, {"seed", "threads", "montecarlo"}, "config");
    CommonOptions opt = parse_common(root);
    if (!root.contains("montecarlo")) throw ConfigError("config: missing 'montecarlo' block");
    const json& b = root.at("montecarlo");
    McConfig cfg = parse_mc_config(b, opt);
    std::string out_csv = b.at("output_csv").get<std::string>();
    std::string out_json = b.at("output_json").get<std::string>();
    check_output_path(out_csv, "montecarlo");
    check_output_path(out_json, "montecarlo");

    if (b.contains("emit_data_dir")) {
        std::string dir = b.at("emit_data_dir").get<std::string>();
        std::filesystem::create_directories(dir);
        std::uint64_t rep_seed = derive_seed(cfg.seed, 0);
        std::string comment = "seed=" + std::to_string(cfg.seed);
        auto cutting = simulate_cutting_dataset(cfg, rep_seed);
        auto [entry, bids] = simulate_auction_dataset(cfg, rep_seed);
        write_cutting_csv(cutting, dir + "/cutting.csv", comment);
        write_entry_csv(entry, dir + "/entry.csv", comment);
        write_bid_csv(bids, dir + "/bids.csv", comment);
    }

    McReport report = run_mc(cfg);
    write_mc_csv(report, out_csv, "seed=" + std::to_string(cfg.seed));
    json archive = mc_report_to_json(report, cfg);
    archive["seed"] = cfg.seed;
    write_json_file(archive, out_json);
    std::cout << json{{"command", "montecarlo"},
                      {"seed", cfg.seed},
                      {"output_csv", out_csv},
                      {"output_json", out_json},
                      {"runtime_seconds", report.runtime_seconds}}
                     .dump()
              << std::endl;
    return 0;
}

// Dispatch with machine-readable errors on stderr.
inline int run_command(const std::string& name, const json& config) {
    try {
        if (name == "solve-dp") return cmd_solve_dp(config);
        if (name == "estimate") return cmd_estimate(config);
        if (name == "solve-bids") return cmd_solve_bids(config);
        if (name == "counterfactual") return cmd_counterfactual(config);
        if (name == "montecarlo") return cmd_montecarlo(config);
        throw ConfigError("unknown command: " + name);
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"command", name}}.dump() << std::endl;
        return 1;
    }
}

}  // namespace stumpage::cli
