#pragma once

#include <backtrade/dates.hpp>
#include <backtrade/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace backtrade {

using PriceMap = std::map<std::string, double>;

/// Long-only holdings. Tickers with zero shares are never stored.
struct Portfolio {
    double cash = 0.0;
    std::map<std::string, std::int64_t> positions;

    std::int64_t shares_of(const std::string& ticker) const {
        const auto it = positions.find(ticker);
        return it == positions.end() ? 0 : it->second;
    }

    friend bool operator==(const Portfolio&, const Portfolio&) = default;
};

enum class Side { buy, sell };

inline const char* to_string(Side side) { return side == Side::buy ? "buy" : "sell"; }

struct OrderIntent {
    std::string ticker;
    Side side = Side::buy;
    std::int64_t shares = 0;
    double reference_price = 0.0;

    friend bool operator==(const OrderIntent&, const OrderIntent&) = default;
};

struct ExecutedTrade {
    OrderIntent intent;
    double cash_delta = 0.0;  // negative for buys
    double fee = 0.0;
    Date day;

    friend bool operator==(const ExecutedTrade&, const ExecutedTrade&) = default;
};

struct InsufficientShares {
    std::string ticker;
    std::int64_t have = 0;
    std::int64_t want = 0;

    friend bool operator==(const InsufficientShares&, const InsufficientShares&) = default;
};

struct InsufficientCash {
    double shortfall = 0.0;

    friend bool operator==(const InsufficientCash&, const InsufficientCash&) = default;
};

using Violation = std::variant<InsufficientShares, InsufficientCash>;

struct ValidationReport {
    std::vector<Violation> violations;

    /// Plain-text diagnosis, fed back to the agent on revision.
    std::string describe() const {
        std::string out;
        for (const auto& v : violations) {
            if (!out.empty()) {
                out += '\n';
            }
            if (const auto* s = std::get_if<InsufficientShares>(&v)) {
                out += "InsufficientShares: " + s->ticker + " holds " + std::to_string(s->have) +
                       " shares but the order sells " + std::to_string(s->want);
            } else {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.2f", std::get<InsufficientCash>(v).shortfall);
                out += std::string("InsufficientCash: buy orders exceed available cash by $") + buf;
            }
        }
        return out;
    }
};

/// cash + sum(shares * price) over held tickers.
inline double portfolio_value(const Portfolio& portfolio, const PriceMap& prices) {
    double value = portfolio.cash;
    for (const auto& [ticker, shares] : portfolio.positions) {
        const auto it = prices.find(ticker);
        if (it == prices.end()) {
            throw MissingPrice(ticker);
        }
        value += static_cast<double>(shares) * it->second;
    }
    return value;
}

/// floor(amount / open_price). The leftover stays in cash.
inline std::int64_t dollars_to_shares(double amount, double open_price) {
    if (!(open_price > 0.0)) {
        throw NonPositivePrice("open price must be positive");
    }
    if (!(amount > 0.0)) {
        return 0;
    }
    auto shares = static_cast<std::int64_t>(std::floor(amount / open_price));
    // The quotient can round across an integer boundary; settle it by the product.
    while (shares > 0 && static_cast<double>(shares) * open_price > amount) {
        --shares;
    }
    while (static_cast<double>(shares + 1) * open_price <= amount) {
        ++shares;
    }
    return shares;
}

namespace detail {

inline double fee_rate(double fee_bps) { return fee_bps / 10000.0; }

// Relative slack for comparing cash balances built from sums of products.
inline double cash_tolerance(double scale) { return 1e-9 * std::max(1.0, std::abs(scale)); }

}  // namespace detail

/// Checks an intent set against holdings and cash, crediting sells before
/// buys. Returns nullopt when executable.
inline std::optional<ValidationReport> validate_feasibility(const Portfolio& portfolio,
                                                            std::span<const OrderIntent> intents,
                                                            double fee_bps = 0.0) {
    std::set<std::string> seen;
    for (const auto& intent : intents) {
        if (!seen.insert(intent.ticker).second) {
            throw DuplicateTicker(intent.ticker);
        }
        if (intent.shares < 1) {
            throw InfeasibleExecution("order for " + intent.ticker + " has no shares");
        }
        if (!(intent.reference_price > 0.0)) {
            throw NonPositivePrice("reference price for " + intent.ticker + " must be positive");
        }
    }

    const double rate = detail::fee_rate(fee_bps);
    ValidationReport report;
    double proceeds = 0.0;
    double cost = 0.0;
    for (const auto& intent : intents) {
        const double notional = static_cast<double>(intent.shares) * intent.reference_price;
        if (intent.side == Side::sell) {
            const auto have = portfolio.shares_of(intent.ticker);
            if (intent.shares > have) {
                report.violations.emplace_back(InsufficientShares{intent.ticker, have, intent.shares});
            }
            proceeds += notional * (1.0 - rate);
        } else {
            cost += notional * (1.0 + rate);
        }
    }
    const double shortfall = cost - (portfolio.cash + proceeds);
    if (shortfall > detail::cash_tolerance(cost)) {
        report.violations.emplace_back(InsufficientCash{shortfall});
    }
    if (report.violations.empty()) {
        return std::nullopt;
    }
    return report;
}

struct Execution {
    Portfolio portfolio;
    std::vector<ExecutedTrade> trades;
};

/// Applies a feasible intent set: all sells, then all buys, each group in the
/// given order.
inline Execution execute(const Portfolio& portfolio, std::span<const OrderIntent> intents, Date day,
                         double fee_bps = 0.0) {
    if (auto report = validate_feasibility(portfolio, intents, fee_bps)) {
        throw InfeasibleExecution("execute called with an infeasible intent set: " + report->describe());
    }
    const double rate = detail::fee_rate(fee_bps);
    Execution result{portfolio, {}};
    auto& p = result.portfolio;
    for (const Side pass : {Side::sell, Side::buy}) {
        for (const auto& intent : intents) {
            if (intent.side != pass) {
                continue;
            }
            const double notional = static_cast<double>(intent.shares) * intent.reference_price;
            const double fee = notional * rate;
            double delta = 0.0;
            if (pass == Side::sell) {
                delta = notional - fee;
                auto it = p.positions.find(intent.ticker);
                it->second -= intent.shares;
                if (it->second == 0) {
                    p.positions.erase(it);
                }
            } else {
                delta = -(notional + fee);
                p.positions[intent.ticker] += intent.shares;
            }
            p.cash += delta;
            result.trades.push_back({intent, delta, fee, day});
        }
    }
    if (p.cash < 0.0) {
        if (-p.cash > detail::cash_tolerance(portfolio.cash)) {
            throw InfeasibleExecution("cash went negative during execution");
        }
        p.cash = 0.0;
    }
    return result;
}

}  // namespace backtrade
