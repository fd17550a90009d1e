#pragma once

// Scripted agents: the passive equal-weight baseline, a null baseline, fault
// injectors for error accounting, and a news-driven agent whose behavior
// depends on which context inputs are present.

#include <backtrade/agent.hpp>
#include <backtrade/decisions.hpp>
#include <backtrade/errors.hpp>

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

namespace backtrade {

namespace detail {

inline std::string hold_all(const OverviewContext& overview) {
    std::vector<Decision> decisions;
    for (const auto& t : overview.tickers) {
        decisions.push_back({t.ticker, Action::hold, std::nullopt});
    }
    return decisions_to_json(decisions).dump();
}

}  // namespace detail

class HoldOnlyAgent final : public Agent {
public:
    AgentIdentity identity() const override { return {"hold_only", "1"}; }
    std::string select(const SelectionRequest&) const override { return "[]"; }
    std::string decide(const DecisionRequest& request) const override {
        return detail::hold_all(request.overview);
    }
};

/// Spends initial_cash / N on each of the N tickers on the first day, then holds.
class PassiveBuyAndHoldAgent final : public Agent {
public:
    explicit PassiveBuyAndHoldAgent(double initial_cash) : initial_cash_(initial_cash) {}

    AgentIdentity identity() const override { return {"passive_buy_and_hold", "1"}; }
    std::string select(const SelectionRequest&) const override { return "[]"; }

    std::string decide(const DecisionRequest& request) const override {
        const auto& overview = request.overview;
        if (overview.day_index != 0 || overview.tickers.empty()) {
            return detail::hold_all(overview);
        }
        const double each = initial_cash_ / static_cast<double>(overview.tickers.size());
        std::vector<Decision> decisions;
        for (const auto& t : overview.tickers) {
            decisions.push_back({t.ticker, Action::increase, each});
        }
        return decisions_to_json(decisions).dump();
    }

private:
    double initial_cash_;
};

enum class FaultKind { schema, overspend };

/// Misbehaves on 1-based trading days divisible by `every_nth`, holds otherwise.
/// Faults persist through revisions, so every faulty day exhausts the budget.
class FaultAgent final : public Agent {
public:
    FaultAgent(FaultKind kind, int every_nth) : kind_(kind), every_nth_(every_nth) {
        if (every_nth < 1) {
            throw ConfigError("fault agent every_nth must be >= 1");
        }
    }

    AgentIdentity identity() const override {
        return {std::string("fault_") + (kind_ == FaultKind::schema ? "schema" : "overspend") + "_every_" +
                    std::to_string(every_nth_),
                "1"};
    }

    std::string select(const SelectionRequest&) const override { return "[]"; }

    std::string decide(const DecisionRequest& request) const override {
        const auto& overview = request.overview;
        if ((overview.day_index + 1) % static_cast<std::size_t>(every_nth_) != 0 || overview.tickers.empty()) {
            return detail::hold_all(overview);
        }
        if (kind_ == FaultKind::schema) {
            return "I recommend buying AAPL aggressively today. {\"ticker\": \"AAPL\", \"action\": \"BUY\"";
        }
        const auto& first = overview.tickers.front();
        std::vector<Decision> decisions{{first.ticker, Action::increase, overview.equity * 10.0 + first.open_price}};
        return decisions_to_json(decisions).dump();
    }

private:
    FaultKind kind_;
    int every_nth_;
};

/// Selects every ticker for analysis, then buys `amount_per_article` dollars
/// per visible news article plus `dividend_bonus` dollars when fundamentals
/// show a positive dividend yield. With neither input it never trades.
class NewsDrivenAgent final : public Agent {
public:
    explicit NewsDrivenAgent(double amount_per_article = 1000.0, double dividend_bonus = 500.0)
        : per_article_(amount_per_article), dividend_bonus_(dividend_bonus) {}

    AgentIdentity identity() const override { return {"news_driven", "1"}; }

    std::string select(const SelectionRequest& request) const override {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& t : request.overview.tickers) {
            list.push_back(t.ticker);
        }
        return list.dump();
    }

    std::string decide(const DecisionRequest& request) const override {
        const auto& overview = request.overview;
        double budget = overview.cash;
        std::vector<Decision> decisions;
        for (const auto& t : overview.tickers) {
            double amount = per_article_ * static_cast<double>(t.news.size());
            for (const auto& f : request.analysis.fundamentals) {
                if (f.ticker == t.ticker && f.snapshot && f.snapshot->dividend_yield > 0.0) {
                    amount += dividend_bonus_;
                }
            }
            amount = std::min(amount, budget);
            if (amount >= t.open_price) {
                budget -= amount;
                decisions.push_back({t.ticker, Action::increase, amount});
            } else {
                decisions.push_back({t.ticker, Action::hold, std::nullopt});
            }
        }
        return decisions_to_json(decisions).dump();
    }

private:
    double per_article_;
    double dividend_bonus_;
};

inline std::unique_ptr<Agent> hold_only() { return std::make_unique<HoldOnlyAgent>(); }

inline std::unique_ptr<Agent> passive_buy_and_hold(const EpisodeConfig& config) {
    if (config.universe.empty()) {
        throw ConfigError("passive baseline needs a non-empty universe");
    }
    return std::make_unique<PassiveBuyAndHoldAgent>(config.initial_cash);
}

inline std::unique_ptr<Agent> fault_agent(FaultKind kind, int every_nth) {
    return std::make_unique<FaultAgent>(kind, every_nth);
}

}  // namespace backtrade
