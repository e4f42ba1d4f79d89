#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stumpage/csv.hpp"

namespace stumpage {

// Discrete price grid with a row-stochastic transition matrix. Row r of
// `transition` is the distribution of next-period price given grid[r].
class PriceProcess {
public:
    PriceProcess(std::vector<double> grid, std::vector<std::vector<double>> transition)
        : grid_(std::move(grid)), transition_(std::move(transition)) {
        if (grid_.size() < 2) throw std::invalid_argument("PriceProcess: grid needs >= 2 levels");
        for (std::size_t i = 1; i < grid_.size(); ++i)
            if (!(grid_[i] > grid_[i - 1]))
                throw std::invalid_argument("PriceProcess: grid must be strictly increasing");
        if (transition_.size() != grid_.size())
            throw std::invalid_argument("PriceProcess: transition must be square on the grid");
        for (const auto& row : transition_) {
            if (row.size() != grid_.size())
                throw std::invalid_argument("PriceProcess: transition must be square on the grid");
            double s = 0.0;
            for (double p : row) {
                if (p < 0.0) throw std::invalid_argument("PriceProcess: negative transition entry");
                s += p;
            }
            if (std::abs(s - 1.0) > 1e-12)
                throw std::invalid_argument("PriceProcess: transition row must sum to 1");
        }
    }

    std::size_t size() const { return grid_.size(); }
    const std::vector<double>& grid() const { return grid_; }
    double level(std::size_t idx) const { return grid_.at(idx); }
    const std::vector<double>& row(std::size_t idx) const { return transition_.at(idx); }
    const std::vector<std::vector<double>>& transition() const { return transition_; }

    std::size_t nearest_index(double price) const {
        std::size_t best = 0;
        double d = std::abs(price - grid_[0]);
        for (std::size_t i = 1; i < grid_.size(); ++i) {
            double di = std::abs(price - grid_[i]);
            if (di < d) {
                d = di;
                best = i;
            }
        }
        return best;
    }

private:
    std::vector<double> grid_;
    std::vector<std::vector<double>> transition_;
};

// Transition rows proportional to a normal density centered at the current
// level, renormalized on the grid.
inline PriceProcess build_gaussian_transition(std::vector<double> grid, double variance) {
    if (grid.empty()) throw std::invalid_argument("build_gaussian_transition: empty grid");
    if (!(variance > 0.0))
        throw std::invalid_argument("build_gaussian_transition: variance must be positive");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::invalid_argument("build_gaussian_transition: grid must be strictly increasing");
    const std::size_t n = grid.size();
    std::vector<std::vector<double>> trans(n, std::vector<double>(n));
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            double z = grid[c] - grid[r];
            trans[r][c] = std::exp(-z * z / (2.0 * variance));
            s += trans[r][c];
        }
        for (std::size_t c = 0; c < n; ++c) trans[r][c] /= s;
    }
    return PriceProcess(std::move(grid), std::move(trans));
}

// Empirical transition: observations snap to the nearest grid point, counts
// get additive smoothing, rows normalize. smoothing = 0 requires every row
// to have been visited.
inline PriceProcess estimate_transition(const std::vector<double>& series,
                                        std::vector<double> grid, double smoothing) {
    if (series.size() < 2)
        throw std::invalid_argument("estimate_transition: need at least 2 observations");
    if (smoothing < 0.0)
        throw std::invalid_argument("estimate_transition: smoothing must be nonnegative");
    const std::size_t n = grid.size();
    // nearest_index needs a valid process; validate the grid directly here
    if (n < 2) throw std::invalid_argument("estimate_transition: grid needs >= 2 levels");
    for (std::size_t i = 1; i < n; ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::invalid_argument("estimate_transition: grid must be strictly increasing");

    auto snap = [&](double p) {
        std::size_t best = 0;
        double d = std::abs(p - grid[0]);
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(p - grid[i]) < d) {
                d = std::abs(p - grid[i]);
                best = i;
            }
        return best;
    };

    std::vector<std::vector<double>> counts(n, std::vector<double>(n, smoothing));
    for (std::size_t k = 0; k + 1 < series.size(); ++k)
        counts[snap(series[k])][snap(series[k + 1])] += 1.0;

    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (double c : counts[r]) s += c;
        if (s <= 0.0)
            throw std::invalid_argument(
                "estimate_transition: row " + std::to_string(r) +
                " has no observations and smoothing is 0 (degenerate row)");
        for (double& c : counts[r]) c /= s;
    }
    return PriceProcess(std::move(grid), std::move(counts));
}

struct DiscretizeResult {
    std::vector<double> grid;
    bool reduced = false;  // true when bins were cut back to the distinct-value count
};

// Quantile bins over the raw series; each grid level is its bin's median.
inline DiscretizeResult discretize_prices(std::vector<double> series, std::size_t bins) {
    if (bins < 2) throw std::invalid_argument("discretize_prices: bins must be >= 2");
    if (series.empty()) throw std::invalid_argument("discretize_prices: empty series");
    std::sort(series.begin(), series.end());

    std::size_t distinct = 1;
    for (std::size_t i = 1; i < series.size(); ++i)
        if (series[i] != series[i - 1]) ++distinct;

    DiscretizeResult out;
    if (distinct < bins) {
        out.reduced = true;
        bins = std::max<std::size_t>(distinct, 1);
    }

    auto median_of = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
        std::size_t m = hi - lo;
        return m % 2 == 1 ? series[lo + m / 2]
                          : 0.5 * (series[lo + m / 2 - 1] + series[lo + m / 2]);
    };

    const std::size_t n = series.size();
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < bins; ++b) {
        std::size_t lo = b * n / bins;
        std::size_t hi = (b + 1) * n / bins;
        if (hi <= lo) continue;
        double v = median_of(lo, hi);
        if (v > prev) {
            out.grid.push_back(v);
            prev = v;
        } else {
            out.reduced = true;  // duplicate representative collapsed
        }
    }
    return out;
}

// Two-column price series CSV: (period, price_index) with a header row.
inline std::vector<double> read_price_series_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.header.size() < 2)
        throw DataError(path + ": expected columns (period, price_index)");
    std::size_t col = 1;
    std::vector<std::pair<double, double>> rows;
    rows.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        rows.emplace_back(parse_double(t, r, 0, path), parse_double(t, r, col, path));
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> series;
    series.reserve(rows.size());
    for (const auto& [period, price] : rows) series.push_back(price);
    return series;
}

}  // namespace stumpage
