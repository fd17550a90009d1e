#pragma once

// Deterministic synthetic snapshots for tests, benchmarks and the bundled
// 82-day fixture. Prices follow a seeded lognormal walk unless a price
// function is supplied.

#include <backtrade/dates.hpp>
#include <backtrade/market_data.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace backtrade {

struct SyntheticSpec {
    std::size_t tickers = 20;
    std::size_t trading_days = 82;
    Date first_day = Date{std::chrono::year{2025} / 3 / 3};
    std::vector<Date> holidays = {Date{std::chrono::year{2025} / 4 / 18}, Date{std::chrono::year{2025} / 5 / 26},
                                  Date{std::chrono::year{2025} / 6 / 19}};
    std::uint64_t seed = 7;
    double daily_volatility = 0.015;
    int max_news_per_day = 3;
    bool with_fundamentals = true;
    std::size_t fundamentals_every = 20;  // trading days between snapshots
    /// Overrides the random walk: price(ticker index, day index).
    std::function<double(std::size_t, std::size_t)> price;
};

inline std::string synthetic_ticker(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "SYN%02zu", index + 1);
    return buf;
}

/// Weekdays from `first_day`, skipping `holidays`, until `count` days are collected.
inline std::vector<Date> weekday_calendar(Date first_day, std::size_t count, const std::vector<Date>& holidays) {
    std::vector<Date> days;
    for (Date d = first_day; days.size() < count; d += std::chrono::days{1}) {
        if (!is_weekend(d) && std::find(holidays.begin(), holidays.end(), d) == holidays.end()) {
            days.push_back(d);
        }
    }
    return days;
}

inline MarketSnapshotStore make_synthetic_store(const SyntheticSpec& spec) {
    SnapshotHeader header;
    for (std::size_t i = 0; i < spec.tickers; ++i) {
        header.universe.push_back(synthetic_ticker(i));
    }
    const auto days = weekday_calendar(spec.first_day, spec.trading_days, spec.holidays);
    header.first_date = days.front() - std::chrono::days{3};
    header.last_date = days.back();

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> shock(0.0, spec.daily_volatility);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<DailyQuote> quotes;
    std::vector<FundamentalsSnapshot> fundamentals;
    std::vector<NewsArticle> news;
    std::map<std::pair<std::string, Date>, int> next_rank;
    const auto open_offset = parse_local_time(header.market_open_local_time);

    for (std::size_t ti = 0; ti < spec.tickers; ++ti) {
        const auto& ticker = header.universe[ti];
        double price = 40.0 + 360.0 * unit(rng);
        double high = price, low = price;
        for (std::size_t di = 0; di < days.size(); ++di) {
            if (spec.price) {
                price = spec.price(ti, di);
            } else if (di > 0) {
                price *= std::exp(shock(rng));
                price = std::round(price * 100.0) / 100.0;
            }
            high = std::max(high, price);
            low = std::min(low, price);
            quotes.push_back({ticker, days[di], price});

            if (spec.with_fundamentals && spec.fundamentals_every > 0 && di % spec.fundamentals_every == 0) {
                FundamentalsSnapshot f;
                f.ticker = ticker;
                f.as_of = days[di];
                f.market_cap = price * 1.0e9 * (1.0 + static_cast<double>(ti));
                if (ti % 7 != 6) {
                    f.pe_ratio = std::round((8.0 + 30.0 * unit(rng)) * 100.0) / 100.0;
                }
                f.dividend_yield = ti % 3 == 0 ? 0.0 : std::round(0.04 * unit(rng) * 10000.0) / 10000.0;
                f.week52_high = high * 1.2;
                f.week52_low = low * 0.8;
                if (f.dividend_yield > 0.0) {
                    for (int q = 1; q <= 2; ++q) {
                        f.recent_quarterly_dividends.push_back(
                            {days[di] - std::chrono::days{91 * q},
                             std::round(price * f.dividend_yield / 4.0 * 100.0) / 100.0});
                    }
                }
                fundamentals.push_back(std::move(f));
            }

            const Timestamp open = local_to_utc(days[di], open_offset, header.timezone);
            const int count = static_cast<int>(unit(rng) * (spec.max_news_per_day + 1));
            for (int k = 0; k < count; ++k) {
                const auto lead = std::chrono::minutes{1 + static_cast<int>(unit(rng) * 40 * 60)};
                NewsArticle n;
                n.ticker = ticker;
                n.published_at = open - lead;
                if (n.published_at < Timestamp{header.first_date}) {
                    continue;
                }
                const Date pub_day = std::chrono::floor<std::chrono::days>(n.published_at);
                n.relevance_rank = ++next_rank[{ticker, pub_day}];
                n.headline = ticker + " headline " + format_date(days[di]) + " #" + std::to_string(k + 1);
                n.summary = "Synthetic summary for " + ticker + ".";
                news.push_back(std::move(n));
            }
        }
    }
    return MarketSnapshotStore::build(std::move(header), std::move(quotes), std::move(fundamentals), std::move(news));
}

}  // namespace backtrade
