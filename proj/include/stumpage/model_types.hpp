#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stumpage {

enum class BidderType { logger, sawmill };

inline std::string to_string(BidderType t) {
    return t == BidderType::logger ? "logger" : "sawmill";
}

inline BidderType bidder_type_from_string(const std::string& s) {
    if (s == "logger" || s == "l" || s == "L") return BidderType::logger;
    if (s == "sawmill" || s == "s" || s == "S") return BidderType::sawmill;
    throw std::invalid_argument("unknown bidder type: '" + s + "'");
}

enum class AuctionFormat { oral, sealed };

inline std::string to_string(AuctionFormat f) {
    return f == AuctionFormat::oral ? "oral" : "sealed";
}

inline AuctionFormat auction_format_from_string(const std::string& s) {
    if (s == "oral") return AuctionFormat::oral;
    if (s == "sealed") return AuctionFormat::sealed;
    throw std::invalid_argument("unknown auction format: '" + s + "'");
}

// Flow-payoff and discounting parameters of the harvesting problem.
struct DynamicParams {
    double gamma;  // payoff per price-unit per volume-unit cut
    double c1;     // linear cutting cost per volume-unit
    double c2;     // quadratic cutting cost per squared volume-unit
    double beta;   // per-period discount factor, in (0, 1]

    void validate() const {
        if (!(beta > 0.0 && beta <= 1.0))
            throw std::invalid_argument("DynamicParams: beta must lie in (0, 1]");
    }
};

// Harvest fractions live on the grid {0, 0.25, 0.5, 0.75, 1}; states and
// actions are stored as quarter counts 0..4 so arithmetic stays exact.
inline constexpr int kQuarterSteps = 4;

inline double quarters_to_fraction(int q) { return static_cast<double>(q) / kQuarterSteps; }

inline int fraction_to_quarters(double f) {
    int q = static_cast<int>(f * kQuarterSteps + 0.5);
    // ties between grid points round down
    if (q > 0 && (quarters_to_fraction(q) - f) > 0.125 - 1e-12) --q;
    if (q < 0) q = 0;
    if (q > kQuarterSteps) q = kQuarterSteps;
    return q;
}

struct CuttingState {
    int t;          // period, 1..T
    int price_idx;  // index into the price grid
    int remaining;  // quarters of the tract still standing, 0..4
};

// Per-bidder-type valuation distribution and entry rate.
struct TypeSpec {
    BidderType type;
    double mu;      // gamma scale multiplier; effective scale = mu * V0
    double sigma;   // gamma shape
    double lambda;  // entrants per potential bidder

    void validate() const {
        if (!(mu > 0.0)) throw std::invalid_argument("TypeSpec: mu must be positive");
        if (!(sigma > 0.0)) throw std::invalid_argument("TypeSpec: sigma must be positive");
        if (lambda < 0.0) throw std::invalid_argument("TypeSpec: lambda must be nonnegative");
    }
};

struct AuctionConfig {
    int T = 1;                             // contract length in quarters
    double u0 = 1.0;                       // initial tract size, volume units
    int p0_idx = 0;                        // initial price grid index
    AuctionFormat format = AuctionFormat::oral;
    std::vector<BidderType> participants;  // ordered multiset

    void validate() const {
        if (T < 1) throw std::invalid_argument("AuctionConfig: T must be >= 1");
        if (!(u0 > 0.0)) throw std::invalid_argument("AuctionConfig: u0 must be positive");
        if (participants.empty())
            throw std::invalid_argument("AuctionConfig: participants must be nonempty");
    }
};

}  // namespace stumpage
