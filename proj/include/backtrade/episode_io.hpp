#pragma once

// Episode log document, schema "backtrade.episode_log" version 1.
// Newline-delimited JSON: an "episode" record (config, agent, manifest
// digest), one "step" record per trading day, then a "summary" record.
// Doubles are written in shortest round-trip form, so reading a log back
// reproduces every value exactly.

#include <backtrade/engine.hpp>
#include <backtrade/market_data.hpp>
#include <backtrade/metrics.hpp>

#include <nlohmann/json.hpp>

#include <istream>
#include <optional>
#include <ostream>
#include <string>

namespace backtrade {

inline constexpr int kEpisodeLogSchemaVersion = 1;

namespace io {

using nlohmann::json;

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> read_optional_number(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return std::nullopt;
    }
    return it->get<double>();
}

inline json to_json(const EpisodeConfig& c) {
    return {{"universe", c.universe},
            {"start_date", format_date(c.start_date)},
            {"end_date", format_date(c.end_date)},
            {"initial_cash", c.initial_cash},
            {"max_revisions", c.max_revisions},
            {"include_news", c.include_news},
            {"include_fundamentals", c.include_fundamentals},
            {"fee_bps", c.fee_bps},
            {"seed", c.seed}};
}

inline EpisodeConfig config_from_json(const json& j) {
    EpisodeConfig c;
    c.universe = j.at("universe").get<std::vector<std::string>>();
    c.start_date = parse_date(j.at("start_date").get<std::string>());
    c.end_date = parse_date(j.at("end_date").get<std::string>());
    c.initial_cash = j.at("initial_cash").get<double>();
    c.max_revisions = j.at("max_revisions").get<int>();
    c.include_news = j.at("include_news").get<bool>();
    c.include_fundamentals = j.at("include_fundamentals").get<bool>();
    c.fee_bps = j.at("fee_bps").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline json to_json(const AgentIdentity& a) { return {{"name", a.name}, {"version", a.version}}; }

inline AgentIdentity agent_from_json(const json& j) {
    return {j.at("name").get<std::string>(), j.at("version").get<std::string>()};
}

inline json to_json(const HistoryEntry& h) {
    return {{"date", format_date(h.date)}, {"action", to_string(h.action)}, {"shares", h.shares}, {"price", h.price}};
}

inline HistoryEntry history_from_json(const json& j) {
    HistoryEntry h;
    h.date = parse_date(j.at("date").get<std::string>());
    const auto a = j.at("action").get<std::string>();
    h.action = a == "buy" ? HistoryAction::buy : a == "sell" ? HistoryAction::sell : HistoryAction::hold;
    h.shares = j.at("shares").get<std::int64_t>();
    h.price = j.at("price").get<double>();
    return h;
}

inline json to_json(const OverviewContext& o) {
    json tickers = json::array();
    for (const auto& t : o.tickers) {
        json news = json::array();
        for (const auto& n : t.news) {
            news.push_back(news_to_json(n));
        }
        json hist = json::array();
        for (const auto& h : t.action_history) {
            hist.push_back(to_json(h));
        }
        tickers.push_back({{"ticker", t.ticker},
                           {"open_price", t.open_price},
                           {"news", news},
                           {"position", t.position},
                           {"action_history", hist}});
    }
    return {{"date", format_date(o.date)},
            {"day_index", o.day_index},
            {"cash", o.cash},
            {"equity", o.equity},
            {"tickers", tickers}};
}

inline OverviewContext overview_from_json(const json& j) {
    OverviewContext o;
    o.date = parse_date(j.at("date").get<std::string>());
    o.day_index = j.at("day_index").get<std::size_t>();
    o.cash = j.at("cash").get<double>();
    o.equity = j.at("equity").get<double>();
    for (const auto& t : j.at("tickers")) {
        TickerOverview to;
        to.ticker = t.at("ticker").get<std::string>();
        to.open_price = t.at("open_price").get<double>();
        for (const auto& n : t.at("news")) {
            to.news.push_back(news_from_json(n));
        }
        to.position = t.at("position").get<std::int64_t>();
        for (const auto& h : t.at("action_history")) {
            to.action_history.push_back(history_from_json(h));
        }
        o.tickers.push_back(std::move(to));
    }
    return o;
}

inline json to_json(const ExecutedTrade& t) {
    return {{"ticker", t.intent.ticker},
            {"side", to_string(t.intent.side)},
            {"shares", t.intent.shares},
            {"reference_price", t.intent.reference_price},
            {"cash_delta", t.cash_delta},
            {"fee", t.fee},
            {"day", format_date(t.day)}};
}

inline ExecutedTrade trade_from_json(const json& j) {
    ExecutedTrade t;
    t.intent.ticker = j.at("ticker").get<std::string>();
    t.intent.side = j.at("side").get<std::string>() == "buy" ? Side::buy : Side::sell;
    t.intent.shares = j.at("shares").get<std::int64_t>();
    t.intent.reference_price = j.at("reference_price").get<double>();
    t.cash_delta = j.at("cash_delta").get<double>();
    t.fee = j.at("fee").get<double>();
    t.day = parse_date(j.at("day").get<std::string>());
    return t;
}

inline json to_json(const ErrorEvent& e) {
    return {{"date", format_date(e.date)},
            {"kind", to_string(e.kind)},
            {"detail", e.detail},
            {"revision_index", e.revision_index}};
}

inline ErrorEvent error_from_json(const json& j) {
    return {parse_date(j.at("date").get<std::string>()),
            j.at("kind").get<std::string>() == "arithmetic" ? ErrorKind::arithmetic : ErrorKind::schema,
            j.at("detail").get<std::string>(), j.at("revision_index").get<int>()};
}

inline json to_json(const StepRecord& s) {
    json trades = json::array();
    for (const auto& t : s.trades) {
        trades.push_back(to_json(t));
    }
    json errors = json::array();
    for (const auto& e : s.errors) {
        errors.push_back(to_json(e));
    }
    return {{"kind", "step"},
            {"date", format_date(s.date)},
            {"overview", to_json(s.overview)},
            {"selected", s.selected},
            {"decisions", decisions_to_json(s.decisions.decisions)},
            {"trades", trades},
            {"errors", errors},
            {"notes", s.notes},
            {"fallback_hold_all", s.fallback_hold_all},
            {"cash", s.portfolio.cash},
            {"positions", s.portfolio.positions},
            {"valuation_at_open", s.valuation_at_open}};
}

inline StepRecord step_from_json(const json& j) {
    StepRecord s;
    s.date = parse_date(j.at("date").get<std::string>());
    s.overview = overview_from_json(j.at("overview"));
    s.selected = j.at("selected").get<std::vector<std::string>>();
    s.decisions = parse_decisions(j.at("decisions").dump(), {}, s.date);
    for (const auto& t : j.at("trades")) {
        s.trades.push_back(trade_from_json(t));
    }
    for (const auto& e : j.at("errors")) {
        s.errors.push_back(error_from_json(e));
    }
    s.notes = j.at("notes").get<std::vector<std::string>>();
    s.fallback_hold_all = j.at("fallback_hold_all").get<bool>();
    s.portfolio.cash = j.at("cash").get<double>();
    s.portfolio.positions = j.at("positions").get<std::map<std::string, std::int64_t>>();
    s.valuation_at_open = j.at("valuation_at_open").get<double>();
    return s;
}

inline json to_json(const MetricReport& m) {
    return {{"final_return", m.final_return},
            {"max_drawdown", m.max_drawdown},
            {"sortino", optional_number(m.sortino)},
            {"downside_deviation", m.downside_deviation},
            {"mean_daily_return", m.mean_daily_return}};
}

inline MetricReport metrics_from_json(const json& j) {
    MetricReport m;
    m.final_return = j.at("final_return").get<double>();
    m.max_drawdown = j.at("max_drawdown").get<double>();
    m.sortino = read_optional_number(j, "sortino");
    m.downside_deviation = j.at("downside_deviation").get<double>();
    m.mean_daily_return = j.at("mean_daily_return").get<double>();
    return m;
}

inline json to_json(const Dispersion& d) {
    return {{"mean", d.mean}, {"std", d.std}, {"cv", optional_number(d.cv)}, {"variance", d.variance}};
}

inline Dispersion dispersion_from_json(const json& j) {
    Dispersion d;
    d.mean = j.at("mean").get<double>();
    d.std = j.at("std").get<double>();
    d.cv = read_optional_number(j, "cv");
    d.variance = j.at("variance").get<double>();
    return d;
}

}  // namespace io

inline void write_episode_log(std::ostream& out, const EpisodeLog& log, const std::string& manifest_digest = {}) {
    out << nlohmann::json{{"kind", "episode"},
                          {"schema", "backtrade.episode_log"},
                          {"schema_version", kEpisodeLogSchemaVersion},
                          {"manifest_digest", manifest_digest},
                          {"config", io::to_json(log.config)},
                          {"agent", io::to_json(log.agent)}}
               .dump()
        << '\n';
    for (const auto& step : log.steps) {
        out << io::to_json(step).dump() << '\n';
    }
    out << nlohmann::json{{"kind", "summary"},
                          {"status", log.status == EpisodeStatus::completed ? "completed" : "aborted"},
                          {"abort_reason", log.abort_reason},
                          {"final_value", log.final_value},
                          {"steps", log.steps.size()}}
               .dump()
        << '\n';
}

struct LoadedEpisodeLog {
    EpisodeLog log;
    std::string manifest_digest;
};

inline LoadedEpisodeLog read_episode_log(std::istream& in) {
    LoadedEpisodeLog out;
    bool have_header = false, have_summary = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            const auto kind = j.at("kind").get<std::string>();
            if (kind == "episode") {
                if (j.at("schema").get<std::string>() != "backtrade.episode_log" ||
                    j.at("schema_version").get<int>() != kEpisodeLogSchemaVersion) {
                    throw ParseError("unsupported episode log schema");
                }
                out.manifest_digest = j.at("manifest_digest").get<std::string>();
                out.log.config = io::config_from_json(j.at("config"));
                out.log.agent = io::agent_from_json(j.at("agent"));
                have_header = true;
            } else if (kind == "step") {
                out.log.steps.push_back(io::step_from_json(j));
            } else if (kind == "summary") {
                out.log.status = j.at("status").get<std::string>() == "completed" ? EpisodeStatus::completed
                                                                                  : EpisodeStatus::aborted;
                out.log.abort_reason = j.at("abort_reason").get<std::string>();
                out.log.final_value = j.at("final_value").get<double>();
                have_summary = true;
            } else {
                throw ParseError("unknown record kind '" + kind + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("episode log line " + std::to_string(line_no) + ": " + e.what());
        } catch (const SchemaError& e) {
            throw ParseError("episode log line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header || !have_summary) {
        throw ParseError("episode log is missing its episode or summary record");
    }
    return out;
}

}  // namespace backtrade
