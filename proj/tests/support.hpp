#pragma once

#include <backtrade/agent.hpp>
#include <backtrade/agents.hpp>
#include <backtrade/engine.hpp>
#include <backtrade/market_data.hpp>
#include <backtrade/synthetic.hpp>

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace bt_test {

using namespace backtrade;

inline Date day(int y, unsigned m, unsigned d) { return Date{std::chrono::year{y} / m / d}; }

inline Timestamp at(int y, unsigned m, unsigned d, int h, int min = 0) {
    return Timestamp{day(y, m, d)} + std::chrono::hours{h} + std::chrono::minutes{min};
}

/// AAPL / MSFT over 2025-03-03..05 (Mon-Wed); the open is 14:30 UTC (EST).
inline SnapshotHeader two_ticker_header() {
    SnapshotHeader h;
    h.universe = {"AAPL", "MSFT"};
    h.first_date = day(2025, 2, 28);
    h.last_date = day(2025, 3, 5);
    return h;
}

inline std::vector<DailyQuote> two_ticker_quotes() {
    return {{"AAPL", day(2025, 3, 3), 240.0}, {"AAPL", day(2025, 3, 4), 245.0}, {"AAPL", day(2025, 3, 5), 250.0},
            {"MSFT", day(2025, 3, 3), 400.0}, {"MSFT", day(2025, 3, 4), 395.0}, {"MSFT", day(2025, 3, 5), 405.0}};
}

inline MarketSnapshotStore two_ticker_store(std::vector<NewsArticle> news = {},
                                            std::vector<FundamentalsSnapshot> fundamentals = {}) {
    return MarketSnapshotStore::build(two_ticker_header(), two_ticker_quotes(), std::move(fundamentals),
                                      std::move(news));
}

inline FundamentalsSnapshot fundamentals(const std::string& ticker, Date as_of, double cap = 3.0e12) {
    FundamentalsSnapshot f;
    f.ticker = ticker;
    f.as_of = as_of;
    f.market_cap = cap;
    f.pe_ratio = 30.5;
    f.dividend_yield = 0.005;
    f.week52_high = 260.0;
    f.week52_low = 160.0;
    f.recent_quarterly_dividends = {{day(2025, 2, 13), 0.25}};
    return f;
}

/// Synthetic store whose prices come from `price(ticker, day)`.
inline MarketSnapshotStore priced_store(std::size_t tickers, std::size_t days,
                                        std::function<double(std::size_t, std::size_t)> price,
                                        bool with_news = false) {
    SyntheticSpec spec;
    spec.tickers = tickers;
    spec.trading_days = days;
    spec.price = std::move(price);
    spec.max_news_per_day = with_news ? 3 : 0;
    return make_synthetic_store(spec);
}

inline EpisodeConfig config_for(const MarketSnapshotStore& store, std::size_t universe_size = 0) {
    EpisodeConfig c;
    const auto& all = store.universe();
    const std::size_t n = universe_size == 0 ? all.size() : universe_size;
    c.universe.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    c.start_date = store.calendar().days().front();
    c.end_date = store.calendar().days().back();
    return c;
}

/// Agent driven by callbacks, for constructed scenarios.
class ScriptedAgent final : public Agent {
public:
    using SelectFn = std::function<std::string(const SelectionRequest&)>;
    using DecideFn = std::function<std::string(const DecisionRequest&)>;

    ScriptedAgent(DecideFn decide, SelectFn select = {}) : decide_(std::move(decide)), select_(std::move(select)) {}

    AgentIdentity identity() const override { return {"scripted", "test"}; }
    std::string select(const SelectionRequest& r) const override { return select_ ? select_(r) : "[]"; }
    std::string decide(const DecisionRequest& r) const override { return decide_(r); }

private:
    DecideFn decide_;
    SelectFn select_;
};

}  // namespace bt_test
