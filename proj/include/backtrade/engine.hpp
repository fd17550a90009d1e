#pragma once

// The daily decision loop. For each trading day of an episode:
//   1. overview context (open prices, news, holdings, 7-day action history)
//   2. the agent picks tickers; their fundamentals form the analysis context
//   3. the agent answers with a decision payload
//   4. decisions become share orders at the open; infeasible or malformed
//      answers go back to the agent until the revision budget runs out, after
//      which the day is a hold for every ticker.

#include <backtrade/agent.hpp>
#include <backtrade/context.hpp>
#include <backtrade/decisions.hpp>
#include <backtrade/errors.hpp>
#include <backtrade/market_data.hpp>
#include <backtrade/portfolio.hpp>

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace backtrade {

enum class ErrorKind { arithmetic, schema };

inline const char* to_string(ErrorKind kind) { return kind == ErrorKind::arithmetic ? "arithmetic" : "schema"; }

struct ErrorEvent {
    Date date;
    ErrorKind kind = ErrorKind::schema;
    std::string detail;
    int revision_index = 0;

    friend bool operator==(const ErrorEvent&, const ErrorEvent&) = default;
};

struct StepRecord {
    Date date;
    OverviewContext overview;
    std::vector<std::string> selected;
    DecisionSet decisions;  // the accepted set; all holds after a fallback
    std::vector<ExecutedTrade> trades;
    std::vector<ErrorEvent> errors;
    std::vector<std::string> notes;  // e.g. full-liquidation clamps
    bool fallback_hold_all = false;
    Portfolio portfolio;  // after execution
    double valuation_at_open = 0.0;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

enum class EpisodeStatus { completed, aborted };

struct EpisodeLog {
    EpisodeConfig config;
    AgentIdentity agent;
    std::vector<StepRecord> steps;
    double final_value = 0.0;
    EpisodeStatus status = EpisodeStatus::completed;
    std::string abort_reason;

    /// V_0 (initial cash) followed by each day's post-execution valuation.
    std::vector<double> valuations() const {
        std::vector<double> out{config.initial_cash};
        for (const auto& s : steps) {
            out.push_back(s.valuation_at_open);
        }
        return out;
    }

    friend bool operator==(const EpisodeLog&, const EpisodeLog&) = default;
};

/// Per-ticker outcomes of one past trading day.
struct DayActions {
    Date date;
    std::map<std::string, HistoryEntry> by_ticker;
};

using ActionHistory = std::vector<DayActions>;

inline void validate_config(const MarketSnapshotStore& store, const EpisodeConfig& config) {
    if (config.universe.empty()) {
        throw ConfigError("episode universe is empty");
    }
    std::set<std::string> seen;
    for (const auto& t : config.universe) {
        if (!store.has_ticker(t)) {
            throw ConfigError("ticker " + t + " is not in the snapshot universe");
        }
        if (!seen.insert(t).second) {
            throw ConfigError("ticker " + t + " listed twice in the episode universe");
        }
    }
    if (!(config.start_date < config.end_date)) {
        throw ConfigError("episode start date must precede its end date");
    }
    const auto days = store.calendar().days();
    if (days.empty() || config.start_date < days.front() || config.end_date > days.back()) {
        throw ConfigError("episode dates fall outside the snapshot's trading days");
    }
    if (config.max_revisions < 1) {
        throw ConfigError("max_revisions must be >= 1");
    }
    if (!(config.initial_cash > 0.0)) {
        throw ConfigError("initial cash must be positive");
    }
    if (config.fee_bps < 0.0) {
        throw ConfigError("fee_bps must be non-negative");
    }
}

inline PriceMap open_prices(const MarketSnapshotStore& store, std::span<const std::string> universe, Date date) {
    PriceMap prices;
    for (const auto& t : universe) {
        prices[t] = store.visible_quote(t, date).open_price;
    }
    return prices;
}

/// Step 1 context for `date`. `history` holds one entry per earlier trading
/// day of this episode, oldest first.
inline OverviewContext build_overview_context(const MarketSnapshotStore& store, const Portfolio& portfolio,
                                              const ActionHistory& history, Date date,
                                              const EpisodeConfig& config) {
    const PriceMap prices = open_prices(store, config.universe, date);
    const Timestamp open = store.calendar().market_open(date);
    OverviewContext ctx;
    ctx.date = date;
    ctx.day_index = history.size();
    ctx.cash = portfolio.cash;
    ctx.equity = portfolio_value(portfolio, prices);
    const std::size_t first = history.size() > kActionHistoryDays ? history.size() - kActionHistoryDays : 0;
    for (const auto& ticker : config.universe) {
        TickerOverview t;
        t.ticker = ticker;
        t.open_price = prices.at(ticker);
        if (config.include_news) {
            t.news = store.visible_news(ticker, open);
        }
        t.position = portfolio.shares_of(ticker);
        for (std::size_t i = first; i < history.size(); ++i) {
            const auto it = history[i].by_ticker.find(ticker);
            t.action_history.push_back(it != history[i].by_ticker.end()
                                           ? it->second
                                           : HistoryEntry{history[i].date, HistoryAction::hold, 0, 0.0});
        }
        ctx.tickers.push_back(std::move(t));
    }
    return ctx;
}

inline AnalysisContext build_analysis_context(const MarketSnapshotStore& store, std::span<const std::string> selected,
                                              Date date, const EpisodeConfig& config) {
    AnalysisContext ctx;
    ctx.date = date;
    if (!config.include_fundamentals) {
        return ctx;
    }
    for (const auto& ticker : selected) {
        TickerFundamentals f{ticker, std::nullopt};
        try {
            f.snapshot = store.visible_fundamentals(ticker, date);
        } catch (const NoSnapshotYet&) {
        }
        ctx.fundamentals.push_back(std::move(f));
    }
    return ctx;
}

struct OrderPlan {
    std::vector<OrderIntent> intents;
    std::vector<std::string> notes;
};

/// Dollar deltas to share orders: increase buys floor(amount/open); decrease
/// sells min(floor(amount/open), held), or the whole position when the amount
/// covers its market value. Decisions that round to zero shares are dropped.
inline OrderPlan plan_orders(const DecisionSet& decisions, const Portfolio& portfolio, const PriceMap& prices) {
    OrderPlan plan;
    for (const auto& d : decisions.decisions) {
        if (d.action == Action::hold) {
            continue;
        }
        const auto price_it = prices.find(d.ticker);
        if (price_it == prices.end()) {
            throw MissingPrice(d.ticker);
        }
        const double price = price_it->second;
        const double amount = d.amount_usd.value_or(0.0);
        if (d.action == Action::increase) {
            const auto shares = dollars_to_shares(amount, price);
            if (shares > 0) {
                plan.intents.push_back({d.ticker, Side::buy, shares, price});
            } else {
                plan.notes.push_back("increase of " + d.ticker + " is below one share; skipped");
            }
            continue;
        }
        const auto held = portfolio.shares_of(d.ticker);
        std::int64_t shares = 0;
        if (held > 0 && amount >= static_cast<double>(held) * price) {
            shares = held;
            plan.notes.push_back("decrease of " + d.ticker + " covers the position value; liquidating " +
                                 std::to_string(held) + " shares");
        } else {
            shares = std::min(dollars_to_shares(amount, price), held);
        }
        if (shares > 0) {
            plan.intents.push_back({d.ticker, Side::sell, shares, price});
        } else {
            plan.notes.push_back("decrease of " + d.ticker + " sells no shares; skipped");
        }
    }
    return plan;
}

struct RevisionOutcome {
    Portfolio portfolio;
    DecisionSet accepted;
    std::vector<ExecutedTrade> trades;
    std::vector<ErrorEvent> errors;
    std::vector<std::string> notes;
    bool fallback_hold_all = false;
};

/// Asks the agent for a (revised) raw decision payload. `feedback` is empty on
/// the first attempt of a day.
using ReviseFn = std::function<std::string(const std::optional<std::string>& feedback, int revision)>;

namespace detail {

inline DecisionSet hold_all_set(std::span<const std::string> universe, Date date) {
    DecisionSet set{date, {}};
    for (const auto& t : universe) {
        set.decisions.push_back({t, Action::hold, std::nullopt});
    }
    return set;
}

// One shared budget of `max_revisions` attempts covers schema and arithmetic
// failures alike. `current` is the already-parsed first attempt, if any.
inline RevisionOutcome negotiate(const Portfolio& portfolio, std::optional<DecisionSet> current,
                                 const PriceMap& prices, const ReviseFn& revise, int max_revisions,
                                 std::span<const std::string> universe, Date date, double fee_bps) {
    RevisionOutcome out;
    std::optional<std::string> feedback;
    for (int attempt = 0; attempt < max_revisions; ++attempt) {
        if (!current) {
            const std::string raw = revise(feedback, attempt);
            try {
                current = parse_decisions(raw, universe, date);
            } catch (const SchemaError& e) {
                out.errors.push_back({date, ErrorKind::schema, e.what(), attempt});
                feedback = std::string("Your response could not be parsed: ") + e.what();
                continue;
            }
        }
        OrderPlan plan = plan_orders(*current, portfolio, prices);
        if (auto report = validate_feasibility(portfolio, plan.intents, fee_bps)) {
            out.errors.push_back({date, ErrorKind::arithmetic, report->describe(), attempt});
            feedback = "Your decisions cannot be executed:\n" + report->describe();
            current.reset();
            continue;
        }
        Execution exec = execute(portfolio, plan.intents, date, fee_bps);
        out.portfolio = std::move(exec.portfolio);
        out.trades = std::move(exec.trades);
        out.accepted = std::move(*current);
        out.notes = std::move(plan.notes);
        return out;
    }
    out.portfolio = portfolio;
    out.accepted = hold_all_set(universe, date);
    out.fallback_hold_all = true;
    return out;
}

}  // namespace detail

/// Step 4 for an already-parsed decision set. Infeasible sets are returned to
/// the agent through `revise`; after `max_revisions` failed attempts (the
/// first one included) the day falls back to holding everything.
inline RevisionOutcome execute_with_revision(const Portfolio& portfolio, const DecisionSet& decisions,
                                             const PriceMap& prices, const ReviseFn& revise, int max_revisions,
                                             std::span<const std::string> universe, double fee_bps = 0.0) {
    return detail::negotiate(portfolio, decisions, prices, revise, max_revisions, universe, decisions.date,
                             fee_bps);
}

/// Runs one episode. Decision errors never abort it; an AgentTransportError
/// does, and the log keeps every step completed before the failure.
inline EpisodeLog run_episode(const MarketSnapshotStore& store, const EpisodeConfig& config, const Agent& agent) {
    validate_config(store, config);
    EpisodeLog log;
    log.config = config;
    log.agent = agent.identity();
    log.final_value = config.initial_cash;

    Portfolio portfolio{config.initial_cash, {}};
    ActionHistory history;
    for (const Date date : store.calendar().slice(config.start_date, config.end_date)) {
        StepRecord step;
        step.date = date;
        try {
            step.overview = build_overview_context(store, portfolio, history, date, config);
            const PriceMap prices = open_prices(store, config.universe, date);

            const std::string raw_selection = agent.select({step.overview, config.seed});
            try {
                step.selected = parse_selection(raw_selection, config.universe);
            } catch (const SchemaError& e) {
                step.errors.push_back({date, ErrorKind::schema, std::string("selection: ") + e.what(), 0});
            }
            const AnalysisContext analysis = build_analysis_context(store, step.selected, date, config);

            const ReviseFn revise = [&](const std::optional<std::string>& feedback, int revision) {
                return agent.decide({step.overview, analysis, feedback, revision, config.seed});
            };
            RevisionOutcome outcome = detail::negotiate(portfolio, std::nullopt, prices, revise,
                                                        config.max_revisions, config.universe, date, config.fee_bps);

            step.errors.insert(step.errors.end(), outcome.errors.begin(), outcome.errors.end());
            step.decisions = std::move(outcome.accepted);
            step.trades = std::move(outcome.trades);
            step.notes = std::move(outcome.notes);
            step.fallback_hold_all = outcome.fallback_hold_all;
            portfolio = std::move(outcome.portfolio);
            step.portfolio = portfolio;
            step.valuation_at_open = portfolio_value(portfolio, prices);
        } catch (const AgentTransportError& e) {
            log.status = EpisodeStatus::aborted;
            log.abort_reason = e.what();
            break;
        }

        DayActions day{date, {}};
        for (const auto& trade : step.trades) {
            day.by_ticker[trade.intent.ticker] =
                HistoryEntry{date, trade.intent.side == Side::buy ? HistoryAction::buy : HistoryAction::sell,
                             trade.intent.shares, trade.intent.reference_price};
        }
        history.push_back(std::move(day));
        log.final_value = step.valuation_at_open;
        log.steps.push_back(std::move(step));
    }
    return log;
}

struct ErrorRates {
    double arithmetic = 0.0;  // percent of days with at least one arithmetic event
    double schema = 0.0;
};

inline ErrorRates error_rates(std::span<const EpisodeLog> logs) {
    std::size_t days = 0, arithmetic_days = 0, schema_days = 0;
    for (const auto& log : logs) {
        for (const auto& step : log.steps) {
            ++days;
            bool a = false, s = false;
            for (const auto& e : step.errors) {
                (e.kind == ErrorKind::arithmetic ? a : s) = true;
            }
            arithmetic_days += a;
            schema_days += s;
        }
    }
    if (days == 0) {
        throw EmptyInput("error rates need at least one recorded trading day");
    }
    return {100.0 * static_cast<double>(arithmetic_days) / static_cast<double>(days),
            100.0 * static_cast<double>(schema_days) / static_cast<double>(days)};
}

}  // namespace backtrade
