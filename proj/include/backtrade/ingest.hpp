#pragma once

// Normalizes vendor exports into a snapshot store.
//
//   prices CSV        columns date, ticker, open (extra columns ignored)
//   fundamentals CSV  ticker, as_of, market_cap, pe_ratio, dividend_yield,
//                     week52_high, week52_low, recent_quarterly_dividends
//                     (dividends as "YYYY-MM-DD:amount;..." , empty pe_ratio = N/A)
//   news JSON         array of {ticker, published_at, headline, summary, relevance_rank}
//
// Records outside the universe or date range are dropped and counted.
// Identical duplicates are dropped with a warning; conflicting duplicates
// and malformed records are per-record errors.

#include <backtrade/dates.hpp>
#include <backtrade/errors.hpp>
#include <backtrade/market_data.hpp>
#include <backtrade/report.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace backtrade {

struct IngestOptions {
    std::vector<std::string> universe;
    Date from;
    Date to;
    std::string market_open_local_time = "09:30";
    std::string timezone = "America/New_York";
};

struct IngestResult {
    std::optional<MarketSnapshotStore> store;
    std::vector<std::string> warnings;
    std::vector<std::string> errors;
    std::string completeness_report;

    bool ok() const { return store.has_value() && errors.empty(); }
};

namespace detail {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, cells)

    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        return std::nullopt;
    }
};

inline CsvTable read_csv(std::istream& in, const std::string& source) {
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        auto cells = split_csv_line(line);
        for (auto& c : cells) {
            c = std::string(trim(c));
        }
        if (t.header.empty()) {
            t.header = std::move(cells);
        } else {
            t.rows.emplace_back(line_no, std::move(cells));
        }
    }
    if (t.header.empty()) {
        throw ParseError(source + ": empty file");
    }
    return t;
}

inline std::size_t require_column(const CsvTable& t, std::string_view name, const std::string& source) {
    const auto c = t.column(name);
    if (!c) {
        throw ParseError(fmt::format("{}: missing column '{}'", source, name));
    }
    return *c;
}

inline std::vector<Dividend> parse_dividend_list(const std::string& text) {
    std::vector<Dividend> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find(';', pos);
        if (end == std::string::npos) {
            end = text.size();
        }
        const auto item = std::string(trim(std::string_view(text).substr(pos, end - pos)));
        pos = end + 1;
        if (item.empty()) {
            continue;
        }
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw ParseError("dividend entry must be date:amount, got '" + item + "'");
        }
        out.push_back({parse_date(item.substr(0, colon)), parse_number(item.substr(colon + 1), "dividend amount")});
    }
    return out;
}

}  // namespace detail

class SnapshotIngestor {
public:
    explicit SnapshotIngestor(IngestOptions options) : options_(std::move(options)) {
        if (options_.universe.empty()) {
            throw ConfigError("ingest needs a non-empty universe");
        }
        if (options_.from > options_.to) {
            throw ConfigError("ingest date range is reversed");
        }
        universe_.insert(options_.universe.begin(), options_.universe.end());
        if (universe_.size() != options_.universe.size()) {
            throw ConfigError("ingest universe lists a ticker twice");
        }
        parse_local_time(options_.market_open_local_time);
        utc_offset(options_.timezone, options_.from);
    }

    void add_prices_csv(std::istream& in, const std::string& source) {
        const auto table = detail::read_csv(in, source);
        const auto c_date = detail::require_column(table, "date", source);
        const auto c_ticker = detail::require_column(table, "ticker", source);
        const auto c_open = detail::require_column(table, "open", source);
        for (const auto& [line, cells] : table.rows) {
            const auto where = fmt::format("{}:{}", source, line);
            try {
                if (cells.size() != table.header.size()) {
                    throw ParseError(fmt::format("expected {} cells, got {}", table.header.size(), cells.size()));
                }
                DailyQuote q{cells[c_ticker], parse_date(cells[c_date]), parse_number(cells[c_open], "open")};
                if (!(q.open_price > 0.0)) {
                    throw ParseError("non-positive open price");
                }
                if (!keep(q.ticker, q.date, dropped_quotes_)) {
                    continue;
                }
                const auto key = std::make_pair(q.ticker, q.date);
                const auto it = quotes_.find(key);
                if (it == quotes_.end()) {
                    quotes_.emplace(key, Sourced<DailyQuote>{q, where});
                } else if (it->second.value == q) {
                    warnings_.push_back(fmt::format("{}: duplicate quote for {} on {} (identical to {}), dropped", where,
                                                    q.ticker, format_date(q.date), it->second.where));
                } else {
                    errors_.push_back(fmt::format("{}: conflicting quote for {} on {}: {} here vs {} at {}", where,
                                                  q.ticker, format_date(q.date), q.open_price,
                                                  it->second.value.open_price, it->second.where));
                }
            } catch (const Error& e) {
                errors_.push_back(where + ": " + e.what());
            }
        }
    }

    void add_fundamentals_csv(std::istream& in, const std::string& source) {
        const auto table = detail::read_csv(in, source);
        const auto c_ticker = detail::require_column(table, "ticker", source);
        const auto c_asof = detail::require_column(table, "as_of", source);
        const auto c_cap = detail::require_column(table, "market_cap", source);
        const auto c_pe = detail::require_column(table, "pe_ratio", source);
        const auto c_yield = detail::require_column(table, "dividend_yield", source);
        const auto c_hi = detail::require_column(table, "week52_high", source);
        const auto c_lo = detail::require_column(table, "week52_low", source);
        const auto c_div = table.column("recent_quarterly_dividends");
        for (const auto& [line, cells] : table.rows) {
            const auto where = fmt::format("{}:{}", source, line);
            try {
                if (cells.size() != table.header.size()) {
                    throw ParseError(fmt::format("expected {} cells, got {}", table.header.size(), cells.size()));
                }
                FundamentalsSnapshot f;
                f.ticker = cells[c_ticker];
                f.as_of = parse_date(cells[c_asof]);
                f.market_cap = parse_number(cells[c_cap], "market_cap");
                const auto& pe = cells[c_pe];
                if (!pe.empty() && pe != "N/A" && pe != "null") {
                    f.pe_ratio = parse_number(pe, "pe_ratio");
                }
                f.dividend_yield = parse_number(cells[c_yield], "dividend_yield");
                f.week52_high = parse_number(cells[c_hi], "week52_high");
                f.week52_low = parse_number(cells[c_lo], "week52_low");
                if (c_div) {
                    f.recent_quarterly_dividends = detail::parse_dividend_list(cells[*c_div]);
                }
                if (!(f.market_cap > 0.0) || f.dividend_yield < 0.0 || f.week52_low > f.week52_high) {
                    throw ParseError("fundamentals invariant violated");
                }
                if (universe_.count(f.ticker) == 0 || f.as_of > options_.to) {
                    ++dropped_fundamentals_;
                    continue;
                }
                const auto key = std::make_pair(f.ticker, f.as_of);
                const auto it = fundamentals_.find(key);
                if (it == fundamentals_.end()) {
                    fundamentals_.emplace(key, Sourced<FundamentalsSnapshot>{f, where});
                } else if (it->second.value == f) {
                    warnings_.push_back(fmt::format("{}: duplicate fundamentals for {} as of {}, dropped", where,
                                                    f.ticker, format_date(f.as_of)));
                } else {
                    errors_.push_back(fmt::format("{}: conflicting fundamentals for {} as of {} (first seen at {})",
                                                  where, f.ticker, format_date(f.as_of), it->second.where));
                }
            } catch (const Error& e) {
                errors_.push_back(where + ": " + e.what());
            }
        }
    }

    void add_news_json(std::istream& in, const std::string& source) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            errors_.push_back(source + ": " + e.what());
            return;
        }
        if (!doc.is_array()) {
            errors_.push_back(source + ": news file must hold a JSON array");
            return;
        }
        for (std::size_t i = 0; i < doc.size(); ++i) {
            const auto where = fmt::format("{}[{}]", source, i);
            try {
                auto record = doc[i];
                if (!record.is_object()) {
                    throw ParseError("news entry must be an object");
                }
                record["kind"] = "news";
                if (!record.contains("summary")) {
                    record["summary"] = "";
                }
                const NewsArticle n = news_from_json(record);
                if (universe_.count(n.ticker) == 0 || n.published_at >= Timestamp{options_.to + std::chrono::days{1}}) {
                    ++dropped_news_;
                    continue;
                }
                const auto key = std::make_tuple(n.ticker, n.published_at, n.headline);
                const auto it = news_.find(key);
                if (it == news_.end()) {
                    news_.emplace(key, Sourced<NewsArticle>{n, where});
                } else if (it->second.value == n) {
                    warnings_.push_back(fmt::format("{}: duplicate news article for {} at {}, dropped", where, n.ticker,
                                                    format_timestamp(n.published_at)));
                } else {
                    errors_.push_back(fmt::format("{}: conflicting news article for {} at {} (first seen at {})", where,
                                                  n.ticker, format_timestamp(n.published_at), it->second.where));
                }
            } catch (const nlohmann::json::exception& e) {
                errors_.push_back(where + ": " + e.what());
            } catch (const Error& e) {
                errors_.push_back(where + ": " + e.what());
            }
        }
    }

    /// Validates everything collected so far. Never throws for data problems;
    /// they are reported in the result.
    IngestResult finish() const {
        IngestResult r;
        r.warnings = warnings_;
        r.errors = errors_;
        const Timestamp earliest{first_date()};
        std::size_t dropped_news = dropped_news_;
        for (const auto& [k, v] : news_) {
            dropped_news += v.value.published_at < earliest ? 1 : 0;
        }
        if (dropped_quotes_ + dropped_fundamentals_ + dropped_news > 0) {
            r.warnings.push_back(fmt::format(
                "dropped records outside the universe or date range: {} quotes, {} fundamentals, {} news",
                dropped_quotes_, dropped_fundamentals_, dropped_news));
        }
        r.completeness_report = completeness_report();
        if (quotes_.empty()) {
            r.errors.push_back("no quotes inside the universe and date range");
        }
        if (!r.errors.empty()) {
            return r;
        }
        SnapshotHeader header;
        header.universe = options_.universe;
        header.first_date = first_date();
        header.last_date = options_.to;
        header.market_open_local_time = options_.market_open_local_time;
        header.timezone = options_.timezone;
        std::vector<DailyQuote> quotes;
        std::vector<FundamentalsSnapshot> fundamentals;
        std::vector<NewsArticle> news;
        for (const auto& [k, v] : quotes_) {
            quotes.push_back(v.value);
        }
        for (const auto& [k, v] : fundamentals_) {
            fundamentals.push_back(v.value);
        }
        for (const auto& [k, v] : news_) {
            if (v.value.published_at >= earliest) {
                news.push_back(v.value);
            }
        }
        try {
            r.store = MarketSnapshotStore::build(std::move(header), std::move(quotes), std::move(fundamentals),
                                                 std::move(news));
        } catch (const CompletenessError& e) {
            r.errors.push_back(fmt::format("gap: {} has no quote on {}", e.ticker(), e.date()));
        } catch (const Error& e) {
            r.errors.push_back(e.what());
        }
        return r;
    }

private:
    template <class T>
    struct Sourced {
        T value;
        std::string where;
    };

    /// Earliest date records may carry: two days before the first session so
    /// that the first day's 48-hour news window is populated, or earlier if
    /// a fundamentals snapshot predates it.
    Date first_date() const {
        Date d = options_.from - std::chrono::days{2};
        for (const auto& [key, f] : fundamentals_) {
            d = std::min(d, key.second);
        }
        return d;
    }

    bool keep(const std::string& ticker, Date date, std::size_t& dropped) {
        if (universe_.count(ticker) == 0 || date < options_.from || date > options_.to) {
            ++dropped;
            return false;
        }
        return true;
    }

    std::string completeness_report() const {
        std::set<Date> days;
        std::map<std::string, std::set<Date>> have;
        for (const auto& [key, q] : quotes_) {
            days.insert(key.second);
            have[key.first].insert(key.second);
        }
        std::string out = fmt::format("completeness: {} tickers x {} trading days ({} to {})\n",
                                      options_.universe.size(), days.size(),
                                      days.empty() ? "-" : format_date(*days.begin()),
                                      days.empty() ? "-" : format_date(*days.rbegin()));
        for (const auto& t : options_.universe) {
            const auto& mine = have[t];
            std::vector<std::string> gaps;
            for (Date d : days) {
                if (mine.count(d) == 0) {
                    gaps.push_back(format_date(d));
                }
            }
            std::string gap_text;
            for (std::size_t i = 0; i < gaps.size() && i < 10; ++i) {
                gap_text += (i ? ", " : "") + gaps[i];
            }
            if (gaps.size() > 10) {
                gap_text += fmt::format(", ... ({} more)", gaps.size() - 10);
            }
            out += fmt::format("  {:<8} {:>4}/{:<4} {}\n", t, mine.size(), days.size(),
                               gaps.empty() ? "complete" : "missing " + gap_text);
        }
        return out;
    }

    IngestOptions options_;
    std::set<std::string> universe_;
    std::map<std::pair<std::string, Date>, Sourced<DailyQuote>> quotes_;
    std::map<std::pair<std::string, Date>, Sourced<FundamentalsSnapshot>> fundamentals_;
    std::map<std::tuple<std::string, Timestamp, std::string>, Sourced<NewsArticle>> news_;
    std::vector<std::string> warnings_;
    std::vector<std::string> errors_;
    std::size_t dropped_quotes_ = 0;
    std::size_t dropped_fundamentals_ = 0;
    std::size_t dropped_news_ = 0;
};

}  // namespace backtrade
