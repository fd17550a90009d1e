#pragma once

// Point-in-time market data: daily open quotes, fundamentals snapshots and
// news, served through visibility-window queries so that a decision made at
// a given market open can only observe records timestamped at or before it.

#include <backtrade/dates.hpp>
#include <backtrade/errors.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace backtrade {

inline constexpr int kSnapshotFormatVersion = 1;
inline constexpr std::size_t kMaxNewsPerQuery = 5;
inline constexpr std::chrono::hours kNewsWindow{48};

struct DailyQuote {
    std::string ticker;
    Date date;
    double open_price = 0.0;

    friend bool operator==(const DailyQuote&, const DailyQuote&) = default;
};

struct Dividend {
    Date date;
    double amount = 0.0;

    friend bool operator==(const Dividend&, const Dividend&) = default;
};

struct FundamentalsSnapshot {
    std::string ticker;
    Date as_of;
    double market_cap = 0.0;
    std::optional<double> pe_ratio;  // absent for loss-making firms
    double dividend_yield = 0.0;
    double week52_high = 0.0;
    double week52_low = 0.0;
    std::vector<Dividend> recent_quarterly_dividends;

    friend bool operator==(const FundamentalsSnapshot&, const FundamentalsSnapshot&) = default;
};

struct NewsArticle {
    std::string ticker;
    Timestamp published_at;
    std::string headline;
    std::string summary;
    int relevance_rank = 1;

    friend bool operator==(const NewsArticle&, const NewsArticle&) = default;
};

struct SnapshotHeader {
    std::vector<std::string> universe;
    Date first_date;
    Date last_date;
    std::string market_open_local_time = "09:30";
    std::string timezone = "America/New_York";
    int version = kSnapshotFormatVersion;

    friend bool operator==(const SnapshotHeader&, const SnapshotHeader&) = default;
};

class TradingCalendar {
public:
    TradingCalendar() = default;

    /// `days` must be strictly increasing; `opens` holds the matching market-open instants.
    TradingCalendar(std::vector<Date> days, std::vector<Timestamp> opens)
        : days_(std::move(days)), opens_(std::move(opens)) {
        if (days_.size() != opens_.size()) {
            throw ParseError("calendar days and open timestamps differ in length");
        }
        for (std::size_t i = 1; i < days_.size(); ++i) {
            if (days_[i] <= days_[i - 1]) {
                throw ParseError("calendar dates must be strictly increasing");
            }
        }
    }

    std::span<const Date> days() const noexcept { return days_; }
    std::size_t size() const noexcept { return days_.size(); }
    bool empty() const noexcept { return days_.empty(); }

    std::optional<std::size_t> index_of(Date date) const {
        const auto it = std::lower_bound(days_.begin(), days_.end(), date);
        if (it == days_.end() || *it != date) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - days_.begin());
    }

    bool contains(Date date) const { return index_of(date).has_value(); }

    Timestamp market_open(Date date) const {
        const auto idx = index_of(date);
        if (!idx) {
            throw NonTradingDay(format_date(date));
        }
        return opens_[*idx];
    }

    Timestamp market_open_at(std::size_t index) const { return opens_.at(index); }

    /// Trading days within [from, to], inclusive. Always contiguous.
    std::span<const Date> slice(Date from, Date to) const {
        const auto lo = std::lower_bound(days_.begin(), days_.end(), from);
        const auto hi = std::upper_bound(days_.begin(), days_.end(), to);
        if (hi <= lo) {
            return {};
        }
        return {&*lo, static_cast<std::size_t>(hi - lo)};
    }

private:
    std::vector<Date> days_;
    std::vector<Timestamp> opens_;
};

/// Immutable after construction; every query is const and safe to call from
/// any number of threads.
class MarketSnapshotStore {
public:
    MarketSnapshotStore() = default;

    /// Validates and indexes the records. Throws ParseError on invariant
    /// violations, UniverseMismatch for tickers outside the header universe and
    /// CompletenessError when a ticker lacks a quote on some trading day.
    static MarketSnapshotStore build(SnapshotHeader header, std::vector<DailyQuote> quotes,
                                     std::vector<FundamentalsSnapshot> fundamentals,
                                     std::vector<NewsArticle> news);

    const SnapshotHeader& header() const noexcept { return header_; }
    const TradingCalendar& calendar() const noexcept { return calendar_; }
    const std::vector<std::string>& universe() const noexcept { return header_.universe; }
    bool has_ticker(const std::string& ticker) const { return series_.count(ticker) != 0; }

    DailyQuote visible_quote(const std::string& ticker, Date date) const {
        const auto& s = series(ticker);
        const auto idx = calendar_.index_of(date);
        if (!idx) {
            throw NonTradingDay(format_date(date));
        }
        return DailyQuote{ticker, date, s.opens[*idx]};
    }

    /// At most five articles with as_of - 48h <= published_at <= as_of, in
    /// vendor relevance order.
    std::vector<NewsArticle> visible_news(const std::string& ticker, Timestamp as_of) const {
        const auto& s = series(ticker);
        const Timestamp earliest = as_of - kNewsWindow;
        std::vector<NewsArticle> out;
        for (const auto& article : s.news) {
            if (article.published_at >= earliest && article.published_at <= as_of) {
                out.push_back(article);
            }
        }
        std::stable_sort(out.begin(), out.end(), [](const NewsArticle& a, const NewsArticle& b) {
            if (a.relevance_rank != b.relevance_rank) {
                return a.relevance_rank < b.relevance_rank;
            }
            return a.published_at > b.published_at;
        });
        if (out.size() > kMaxNewsPerQuery) {
            out.resize(kMaxNewsPerQuery);
        }
        return out;
    }

    /// Latest snapshot with as_of <= `as_of`.
    FundamentalsSnapshot visible_fundamentals(const std::string& ticker, Date as_of) const {
        const auto& s = series(ticker);
        const auto it = std::upper_bound(
            s.fundamentals.begin(), s.fundamentals.end(), as_of,
            [](Date d, const FundamentalsSnapshot& f) { return d < f.as_of; });
        if (it == s.fundamentals.begin()) {
            throw NoSnapshotYet(ticker, format_date(as_of));
        }
        return *std::prev(it);
    }

    /// Copy keeping only what was observable at the open of `last_day`: later
    /// quotes, snapshots dated after it and news published after its open are
    /// dropped. `last_day` must be a trading day.
    MarketSnapshotStore truncated_after(Date last_day) const;

    std::vector<DailyQuote> all_quotes() const;
    std::vector<FundamentalsSnapshot> all_fundamentals() const;
    std::vector<NewsArticle> all_news() const;

private:
    struct TickerSeries {
        std::vector<double> opens;  // aligned with calendar_
        std::vector<FundamentalsSnapshot> fundamentals;  // by as_of
        std::vector<NewsArticle> news;  // by published_at
    };

    const TickerSeries& series(const std::string& ticker) const {
        const auto it = series_.find(ticker);
        if (it == series_.end()) {
            throw UnknownTicker(ticker);
        }
        return it->second;
    }

    SnapshotHeader header_;
    TradingCalendar calendar_;
    std::map<std::string, TickerSeries> series_;
};

inline MarketSnapshotStore MarketSnapshotStore::build(SnapshotHeader header,
                                                      std::vector<DailyQuote> quotes,
                                                      std::vector<FundamentalsSnapshot> fundamentals,
                                                      std::vector<NewsArticle> news) {
    if (header.version != kSnapshotFormatVersion) {
        throw ParseError("unsupported snapshot version " + std::to_string(header.version));
    }
    if (header.universe.empty()) {
        throw ParseError("snapshot universe is empty");
    }
    if (header.first_date > header.last_date) {
        throw ParseError("snapshot date_range is reversed");
    }
    const std::set<std::string> universe(header.universe.begin(), header.universe.end());
    if (universe.size() != header.universe.size()) {
        throw ParseError("snapshot universe lists a ticker twice");
    }
    const auto open_offset = parse_local_time(header.market_open_local_time);
    const auto in_range = [&](Date d) { return d >= header.first_date && d <= header.last_date; };
    const auto require_member = [&](const std::string& ticker) {
        if (universe.count(ticker) == 0) {
            throw UniverseMismatch("record for ticker outside the declared universe: " + ticker);
        }
    };

    std::set<Date> day_set;
    for (const auto& q : quotes) {
        require_member(q.ticker);
        if (!(q.open_price > 0.0)) {
            throw ParseError("non-positive open price for " + q.ticker + " on " + format_date(q.date));
        }
        if (!in_range(q.date)) {
            throw ParseError("quote outside date_range: " + q.ticker + " " + format_date(q.date));
        }
        day_set.insert(q.date);
    }
    std::vector<Date> days(day_set.begin(), day_set.end());
    std::vector<Timestamp> opens;
    opens.reserve(days.size());
    for (Date d : days) {
        opens.push_back(local_to_utc(d, open_offset, header.timezone));
    }

    MarketSnapshotStore store;
    store.calendar_ = TradingCalendar(std::move(days), std::move(opens));
    for (const auto& t : header.universe) {
        store.series_[t].opens.assign(store.calendar_.size(), 0.0);
    }
    for (const auto& q : quotes) {
        auto& slot = store.series_[q.ticker].opens[*store.calendar_.index_of(q.date)];
        if (slot != 0.0) {
            throw ParseError("duplicate quote for " + q.ticker + " on " + format_date(q.date));
        }
        slot = q.open_price;
    }
    for (const auto& t : header.universe) {
        const auto& opens_for = store.series_[t].opens;
        for (std::size_t i = 0; i < opens_for.size(); ++i) {
            if (opens_for[i] == 0.0) {
                throw CompletenessError(t, format_date(store.calendar_.days()[i]));
            }
        }
    }

    for (auto& f : fundamentals) {
        require_member(f.ticker);
        if (!in_range(f.as_of)) {
            throw ParseError("fundamentals outside date_range: " + f.ticker + " " + format_date(f.as_of));
        }
        if (!(f.market_cap > 0.0) || f.dividend_yield < 0.0 || f.week52_low > f.week52_high) {
            throw ParseError("fundamentals invariant violated for " + f.ticker + " as of " +
                             format_date(f.as_of));
        }
        store.series_[f.ticker].fundamentals.push_back(std::move(f));
    }
    for (auto& [ticker, s] : store.series_) {
        std::sort(s.fundamentals.begin(), s.fundamentals.end(),
                  [](const auto& a, const auto& b) { return a.as_of < b.as_of; });
        for (std::size_t i = 1; i < s.fundamentals.size(); ++i) {
            if (s.fundamentals[i].as_of == s.fundamentals[i - 1].as_of) {
                throw ParseError("duplicate fundamentals snapshot for " + ticker + " as of " +
                                 format_date(s.fundamentals[i].as_of));
            }
        }
    }

    const Timestamp range_begin{header.first_date};
    const Timestamp range_end = Timestamp{header.last_date + std::chrono::days{1}} - std::chrono::seconds{1};
    std::set<std::tuple<std::string, Date, int>> ranks;
    for (auto& n : news) {
        require_member(n.ticker);
        if (n.published_at < range_begin || n.published_at > range_end) {
            throw ParseError("news outside date_range: " + n.ticker + " " +
                             format_timestamp(n.published_at));
        }
        if (n.relevance_rank < 1) {
            throw ParseError("news relevance_rank must be >= 1 for " + n.ticker);
        }
        const Date day = std::chrono::floor<std::chrono::days>(n.published_at);
        if (!ranks.emplace(n.ticker, day, n.relevance_rank).second) {
            throw ParseError("duplicate news relevance_rank " + std::to_string(n.relevance_rank) +
                             " for " + n.ticker + " on " + format_date(day));
        }
        store.series_[n.ticker].news.push_back(std::move(n));
    }
    for (auto& [ticker, s] : store.series_) {
        std::stable_sort(s.news.begin(), s.news.end(), [](const auto& a, const auto& b) {
            return std::tie(a.published_at, a.relevance_rank) < std::tie(b.published_at, b.relevance_rank);
        });
    }
    store.header_ = std::move(header);
    return store;
}

inline std::vector<DailyQuote> MarketSnapshotStore::all_quotes() const {
    std::vector<DailyQuote> out;
    for (std::size_t i = 0; i < calendar_.size(); ++i) {
        for (const auto& t : header_.universe) {
            out.push_back({t, calendar_.days()[i], series_.at(t).opens[i]});
        }
    }
    return out;
}

inline std::vector<FundamentalsSnapshot> MarketSnapshotStore::all_fundamentals() const {
    std::vector<FundamentalsSnapshot> out;
    for (const auto& t : header_.universe) {
        const auto& f = series_.at(t).fundamentals;
        out.insert(out.end(), f.begin(), f.end());
    }
    return out;
}

inline std::vector<NewsArticle> MarketSnapshotStore::all_news() const {
    std::vector<NewsArticle> out;
    for (const auto& t : header_.universe) {
        const auto& n = series_.at(t).news;
        out.insert(out.end(), n.begin(), n.end());
    }
    return out;
}

inline MarketSnapshotStore MarketSnapshotStore::truncated_after(Date last_day) const {
    const Timestamp cutoff = calendar_.market_open(last_day);
    std::vector<DailyQuote> quotes;
    for (auto& q : all_quotes()) {
        if (q.date <= last_day) {
            quotes.push_back(std::move(q));
        }
    }
    std::vector<FundamentalsSnapshot> fundamentals;
    for (auto& f : all_fundamentals()) {
        if (f.as_of <= last_day) {
            fundamentals.push_back(std::move(f));
        }
    }
    std::vector<NewsArticle> news;
    for (auto& n : all_news()) {
        if (n.published_at <= cutoff) {
            news.push_back(std::move(n));
        }
    }
    SnapshotHeader header = header_;
    header.last_date = last_day;
    return build(std::move(header), std::move(quotes), std::move(fundamentals), std::move(news));
}

// ---------------------------------------------------------------------------
// Newline-delimited snapshot format. The first line is the header record; every
// other line is one quote, fundamentals or news record tagged by "kind".

namespace detail {

inline void reject_unknown_fields(const nlohmann::json& record, std::initializer_list<const char*> allowed) {
    for (const auto& item : record.items()) {
        const std::string& key = item.key();
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ==
            allowed.end()) {
            throw ParseError("unknown field '" + key + "' in " + record.value("kind", std::string("record")) +
                             " record");
        }
    }
}

template <class T>
T required(const nlohmann::json& record, const char* key) {
    const auto it = record.find(key);
    if (it == record.end() || it->is_null()) {
        throw ParseError(std::string("missing field '") + key + "'");
    }
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string("field '") + key + "' has the wrong type");
    }
}

}  // namespace detail

inline nlohmann::json header_to_json(const SnapshotHeader& h) {
    return {{"kind", "header"},
            {"version", h.version},
            {"universe", h.universe},
            {"date_range", {format_date(h.first_date), format_date(h.last_date)}},
            {"market_open_local_time", h.market_open_local_time},
            {"timezone", h.timezone}};
}

inline nlohmann::json quote_to_json(const DailyQuote& q) {
    return {{"kind", "quote"}, {"ticker", q.ticker}, {"date", format_date(q.date)}, {"open", q.open_price}};
}

inline nlohmann::json fundamentals_to_json(const FundamentalsSnapshot& f) {
    nlohmann::json divs = nlohmann::json::array();
    for (const auto& d : f.recent_quarterly_dividends) {
        divs.push_back({{"date", format_date(d.date)}, {"amount", d.amount}});
    }
    return {{"kind", "fundamentals"},
            {"ticker", f.ticker},
            {"as_of", format_date(f.as_of)},
            {"market_cap", f.market_cap},
            {"pe_ratio", f.pe_ratio ? nlohmann::json(*f.pe_ratio) : nlohmann::json(nullptr)},
            {"dividend_yield", f.dividend_yield},
            {"week52_high", f.week52_high},
            {"week52_low", f.week52_low},
            {"recent_quarterly_dividends", divs}};
}

inline nlohmann::json news_to_json(const NewsArticle& n) {
    return {{"kind", "news"},
            {"ticker", n.ticker},
            {"published_at", format_timestamp(n.published_at)},
            {"headline", n.headline},
            {"summary", n.summary},
            {"relevance_rank", n.relevance_rank}};
}

inline SnapshotHeader header_from_json(const nlohmann::json& r) {
    detail::reject_unknown_fields(r, {"kind", "version", "universe", "date_range", "market_open_local_time",
                                      "timezone"});
    SnapshotHeader h;
    h.version = detail::required<int>(r, "version");
    h.universe = detail::required<std::vector<std::string>>(r, "universe");
    const auto range = detail::required<std::vector<std::string>>(r, "date_range");
    if (range.size() != 2) {
        throw ParseError("date_range must have two dates");
    }
    h.first_date = parse_date(range[0]);
    h.last_date = parse_date(range[1]);
    h.market_open_local_time = r.value("market_open_local_time", std::string("09:30"));
    h.timezone = r.value("timezone", std::string("America/New_York"));
    return h;
}

inline DailyQuote quote_from_json(const nlohmann::json& r) {
    detail::reject_unknown_fields(r, {"kind", "ticker", "date", "open"});
    return {detail::required<std::string>(r, "ticker"), parse_date(detail::required<std::string>(r, "date")),
            detail::required<double>(r, "open")};
}

inline FundamentalsSnapshot fundamentals_from_json(const nlohmann::json& r) {
    detail::reject_unknown_fields(r, {"kind", "ticker", "as_of", "market_cap", "pe_ratio", "dividend_yield",
                                      "week52_high", "week52_low", "recent_quarterly_dividends"});
    FundamentalsSnapshot f;
    f.ticker = detail::required<std::string>(r, "ticker");
    f.as_of = parse_date(detail::required<std::string>(r, "as_of"));
    f.market_cap = detail::required<double>(r, "market_cap");
    if (const auto it = r.find("pe_ratio"); it != r.end() && !it->is_null()) {
        if (!it->is_number()) {
            throw ParseError("field 'pe_ratio' has the wrong type");
        }
        f.pe_ratio = it->get<double>();
    }
    f.dividend_yield = detail::required<double>(r, "dividend_yield");
    f.week52_high = detail::required<double>(r, "week52_high");
    f.week52_low = detail::required<double>(r, "week52_low");
    if (const auto it = r.find("recent_quarterly_dividends"); it != r.end() && !it->is_null()) {
        for (const auto& d : *it) {
            f.recent_quarterly_dividends.push_back(
                {parse_date(detail::required<std::string>(d, "date")), detail::required<double>(d, "amount")});
        }
    }
    return f;
}

inline NewsArticle news_from_json(const nlohmann::json& r) {
    detail::reject_unknown_fields(r, {"kind", "ticker", "published_at", "headline", "summary", "relevance_rank"});
    NewsArticle n;
    n.ticker = detail::required<std::string>(r, "ticker");
    n.published_at = parse_timestamp(detail::required<std::string>(r, "published_at"));
    n.headline = detail::required<std::string>(r, "headline");
    n.summary = r.value("summary", std::string());
    n.relevance_rank = detail::required<int>(r, "relevance_rank");
    return n;
}

inline void write_store(std::ostream& out, const MarketSnapshotStore& store) {
    out << header_to_json(store.header()).dump() << '\n';
    for (const auto& q : store.all_quotes()) {
        out << quote_to_json(q).dump() << '\n';
    }
    for (const auto& f : store.all_fundamentals()) {
        out << fundamentals_to_json(f).dump() << '\n';
    }
    for (const auto& n : store.all_news()) {
        out << news_to_json(n).dump() << '\n';
    }
}

/// Reads a snapshot stream. A non-empty `expected_universe` must match the
/// header universe as a set.
inline MarketSnapshotStore load_store(std::istream& in, std::span<const std::string> expected_universe = {}) {
    std::optional<SnapshotHeader> header;
    std::vector<DailyQuote> quotes;
    std::vector<FundamentalsSnapshot> fundamentals;
    std::vector<NewsArticle> news;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            nlohmann::json record;
            try {
                record = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw ParseError(std::string("invalid JSON: ") + e.what());
            }
            if (!record.is_object()) {
                throw ParseError("record is not an object");
            }
            const auto kind = detail::required<std::string>(record, "kind");
            if (!header) {
                if (kind != "header") {
                    throw ParseError("first record must be the header");
                }
                header = header_from_json(record);
            } else if (kind == "quote") {
                quotes.push_back(quote_from_json(record));
            } else if (kind == "fundamentals") {
                fundamentals.push_back(fundamentals_from_json(record));
            } else if (kind == "news") {
                news.push_back(news_from_json(record));
            } else if (kind == "header") {
                throw ParseError("second header record");
            } else {
                throw ParseError("unknown record kind '" + kind + "'");
            }
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!header) {
        throw ParseError("snapshot has no header record");
    }
    if (!expected_universe.empty()) {
        const std::set<std::string> want(expected_universe.begin(), expected_universe.end());
        const std::set<std::string> have(header->universe.begin(), header->universe.end());
        if (want != have) {
            throw UniverseMismatch("snapshot universe differs from the expected universe");
        }
    }
    return MarketSnapshotStore::build(std::move(*header), std::move(quotes), std::move(fundamentals),
                                      std::move(news));
}

inline MarketSnapshotStore load_store(const std::string& path, std::span<const std::string> expected_universe = {}) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open snapshot file " + path);
    }
    return load_store(in, expected_universe);
}

}  // namespace backtrade
