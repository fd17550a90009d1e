#pragma once

// Episode configuration and the observation contexts handed to agents.

#include <backtrade/dates.hpp>
#include <backtrade/market_data.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace backtrade {

inline constexpr double kDefaultInitialCash = 100000.0;
inline constexpr int kDefaultMaxRevisions = 3;
inline constexpr std::size_t kActionHistoryDays = 7;

struct EpisodeConfig {
    std::vector<std::string> universe;
    Date start_date;
    Date end_date;
    double initial_cash = kDefaultInitialCash;
    int max_revisions = kDefaultMaxRevisions;
    bool include_news = true;
    bool include_fundamentals = true;
    double fee_bps = 0.0;
    std::uint64_t seed = 0;

    friend bool operator==(const EpisodeConfig&, const EpisodeConfig&) = default;
};

enum class HistoryAction { buy, sell, hold };

inline const char* to_string(HistoryAction a) {
    switch (a) {
        case HistoryAction::buy: return "buy";
        case HistoryAction::sell: return "sell";
        case HistoryAction::hold: return "hold";
    }
    return "hold";
}

/// One ticker's outcome on one past trading day: an executed trade or a hold marker.
struct HistoryEntry {
    Date date;
    HistoryAction action = HistoryAction::hold;
    std::int64_t shares = 0;
    double price = 0.0;

    friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct TickerOverview {
    std::string ticker;
    double open_price = 0.0;
    std::vector<NewsArticle> news;  // empty when news is ablated
    std::int64_t position = 0;
    std::vector<HistoryEntry> action_history;  // oldest first, at most 7

    friend bool operator==(const TickerOverview&, const TickerOverview&) = default;
};

/// Step 1 observation. `cash` and `equity` are the holdings side of the
/// overview, valued at today's open before any trade.
struct OverviewContext {
    Date date;
    std::size_t day_index = 0;  // 0 on the first trading day of the episode
    double cash = 0.0;
    double equity = 0.0;
    std::vector<TickerOverview> tickers;

    friend bool operator==(const OverviewContext&, const OverviewContext&) = default;
};

struct TickerFundamentals {
    std::string ticker;
    std::optional<FundamentalsSnapshot> snapshot;  // nullopt: nothing published yet

    friend bool operator==(const TickerFundamentals&, const TickerFundamentals&) = default;
};

/// Step 2 observation: fundamentals for the tickers selected in Step 1.
struct AnalysisContext {
    Date date;
    std::vector<TickerFundamentals> fundamentals;

    friend bool operator==(const AnalysisContext&, const AnalysisContext&) = default;
};

}  // namespace backtrade
