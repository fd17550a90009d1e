#pragma once

// Episode metrics on the open-price valuation series V_0..V_T, the z-score
// composite used for leaderboards, and cross-run dispersion.
//
// Conventions: daily returns R_i = V_i / V_{i-1} - 1; mean daily return with
// a zero risk-free rate and no annualization; population standard deviation
// for downside deviation and z-scores, sample standard deviation for
// dispersion across runs.

#include <backtrade/errors.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace backtrade {

class ReturnSeries {
public:
    explicit ReturnSeries(std::vector<double> valuations) : valuations_(std::move(valuations)) {
        if (valuations_.empty()) {
            throw EmptyInput("valuation series is empty");
        }
        for (double v : valuations_) {
            if (!(v > 0.0)) {
                throw EmptyInput("valuations must be positive");
            }
        }
        returns_.reserve(valuations_.size() - 1);
        for (std::size_t i = 1; i < valuations_.size(); ++i) {
            returns_.push_back(valuations_[i] / valuations_[i - 1] - 1.0);
        }
    }

    std::span<const double> valuations() const noexcept { return valuations_; }
    std::span<const double> returns() const noexcept { return returns_; }

private:
    std::vector<double> valuations_;
    std::vector<double> returns_;
};

/// (V_T - V_0) / V_0
inline double final_return(std::span<const double> valuations) {
    if (valuations.empty()) {
        throw EmptyInput("final return of an empty series");
    }
    return (valuations.back() - valuations.front()) / valuations.front();
}

/// Worst decline from the running peak, as a fraction <= 0.
inline double max_drawdown(std::span<const double> valuations) {
    if (valuations.empty()) {
        throw EmptyInput("max drawdown of an empty series");
    }
    double peak = valuations.front();
    double worst = 0.0;
    for (double v : valuations) {
        peak = std::max(peak, v);
        worst = std::min(worst, (v - peak) / peak);
    }
    return worst;
}

inline double mean(std::span<const double> values) {
    if (values.empty()) {
        throw EmptyInput("mean of an empty list");
    }
    // Constant input: return that value exactly.
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
        return values.front();
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    return sum / static_cast<double>(values.size());
}

/// sqrt(mean(min(R_i, 0)^2)) over all returns, not just the negative ones.
inline double downside_deviation(std::span<const double> returns) {
    if (returns.empty()) {
        throw EmptyInput("downside deviation of an empty return list");
    }
    double sum = 0.0;
    for (double r : returns) {
        const double d = std::min(r, 0.0);
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(returns.size()));
}

/// Mean daily return over downside deviation; nullopt (undefined) when there is
/// no downside at all.
inline std::optional<double> sortino(std::span<const double> returns) {
    const double dd = downside_deviation(returns);
    if (dd == 0.0) {
        return std::nullopt;
    }
    return mean(returns) / dd;
}

struct MetricReport {
    double final_return = 0.0;
    double max_drawdown = 0.0;
    std::optional<double> sortino;
    double downside_deviation = 0.0;
    double mean_daily_return = 0.0;

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// A single-point series has no returns; its Sortino is undefined and the
/// return statistics are zero.
inline MetricReport compute_metrics(std::span<const double> valuations) {
    const ReturnSeries series({valuations.begin(), valuations.end()});
    MetricReport m;
    m.final_return = final_return(series.valuations());
    m.max_drawdown = max_drawdown(series.valuations());
    if (!series.returns().empty()) {
        m.downside_deviation = downside_deviation(series.returns());
        m.mean_daily_return = mean(series.returns());
        m.sortino = sortino(series.returns());
    }
    return m;
}

struct ZScores {
    std::vector<double> values;
    bool degenerate = false;  // zero variance: every value is 0
};

/// (x - mean) / population std.
inline ZScores zscores(std::span<const double> values) {
    if (values.size() < 2) {
        throw TooFewRows("z-scores need at least two values");
    }
    const double mu = mean(values);
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mu) * (v - mu);
    }
    const double sd = std::sqrt(ss / static_cast<double>(values.size()));
    ZScores out;
    if (sd == 0.0 || !std::isfinite(sd)) {
        out.values.assign(values.size(), 0.0);
        out.degenerate = true;
        return out;
    }
    out.values.reserve(values.size());
    for (double v : values) {
        out.values.push_back((v - mu) / sd);
    }
    return out;
}

struct LeaderboardEntry {
    std::string label;
    double final_return = 0.0;
    double max_drawdown = 0.0;  // signed, <= 0
    std::optional<double> sortino;
};

struct RankedEntry {
    LeaderboardEntry entry;
    double score = 0.0;
    int rank = 0;
};

struct Ranking {
    std::vector<RankedEntry> rows;  // best first
    std::vector<std::string> warnings;
};

/// Composite score (z(return) - z(drawdown depth) + z(sortino)) / 3, where
/// drawdown depth is -max_drawdown, so shallower drawdowns score higher.
/// z(-x) = -z(x), so this is computed as the sum of z-scores of the signed columns.
/// Rows with an undefined Sortino are excluded with a warning. Ties go to the
/// higher final return, then the lexicographically smaller label.
inline Ranking composite_rank(std::span<const LeaderboardEntry> input) {
    Ranking out;
    std::vector<LeaderboardEntry> rows;
    for (const auto& e : input) {
        if (!e.sortino) {
            out.warnings.push_back("excluding " + e.label + ": Sortino ratio undefined (no downside returns)");
            continue;
        }
        rows.push_back(e);
    }
    if (rows.size() < 2) {
        throw TooFewRows("composite ranking needs at least two rows with defined metrics");
    }
    std::vector<double> ret, dd, sor;
    for (const auto& r : rows) {
        ret.push_back(r.final_return);
        dd.push_back(r.max_drawdown);
        sor.push_back(*r.sortino);
    }
    const auto zr = zscores(ret);
    const auto zd = zscores(dd);
    const auto zs = zscores(sor);
    for (const auto& [z, name] : {std::pair{&zr, "final return"}, {&zd, "max drawdown"}, {&zs, "sortino"}}) {
        if (z->degenerate) {
            out.warnings.push_back(std::string("column ") + name + " has zero variance and contributes 0");
        }
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.rows.push_back({rows[i], (zr.values[i] + zd.values[i] + zs.values[i]) / 3.0, 0});
    }
    std::sort(out.rows.begin(), out.rows.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.entry.final_return != b.entry.final_return) {
            return a.entry.final_return > b.entry.final_return;
        }
        return a.entry.label < b.entry.label;
    });
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        out.rows[i].rank = static_cast<int>(i + 1);
    }
    return out;
}

struct Dispersion {
    double mean = 0.0;
    double std = 0.0;  // sample
    std::optional<double> cv;  // std / |mean|; undefined when mean == 0
    double variance = 0.0;

    friend bool operator==(const Dispersion&, const Dispersion&) = default;
};

inline Dispersion dispersion(std::span<const double> final_returns) {
    if (final_returns.size() < 2) {
        throw TooFewRuns("dispersion needs at least two runs");
    }
    Dispersion d;
    d.mean = mean(final_returns);
    double ss = 0.0;
    for (double v : final_returns) {
        ss += (v - d.mean) * (v - d.mean);
    }
    d.variance = ss / static_cast<double>(final_returns.size() - 1);
    d.std = std::sqrt(d.variance);
    if (d.mean != 0.0) {
        d.cv = d.std / std::abs(d.mean);
    }
    return d;
}

}  // namespace backtrade
