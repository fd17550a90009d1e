#pragma once

// Prompt templates for chat-model agents and the renderers that fill them
// from observation contexts. Templates use {{name}} placeholders; the
// rendered blocks carry exactly the inputs an agent is allowed to see.
// Changing any template text requires bumping kPromptVersion and the golden
// files under tests/golden/.

#include <backtrade/context.hpp>
#include <backtrade/errors.hpp>

#include <fmt/format.h>

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

namespace backtrade {

inline constexpr std::string_view kPromptVersion = "v1";

struct PromptTemplates {
    std::string version{kPromptVersion};
    std::string system = R"(You are a trading agent managing a long-only portfolio of US stocks. Each trading day you review the market at the open, optionally study selected stocks in depth, and then decide whether to increase, decrease, or hold each position. Orders execute at today's opening price in whole shares. You cannot short, borrow, or spend more cash than you have.)";

    std::string step1 = R"(Date: {{date}}
Cash available: ${{cash}}
Portfolio value at today's open: ${{equity}}

Stocks in the investment universe:

{{stocks}}
Step 1 - portfolio overview. Select the stocks you want to analyze in depth today. Reply with a JSON list of ticker symbols only, for example ["AAA", "BBB"]. Reply with [] to skip the in-depth analysis.)";

    std::string step2 = R"(Step 2 - in-depth analysis. Fundamental data for the stocks you selected:

{{fundamentals}})";

    std::string step3 = R"(Step 3 - decision. For each stock choose one action: increase, decrease, or hold the position. For increase and decrease give the dollar amount to buy or sell; it is converted to whole shares at today's opening price and any remainder stays in cash. Stocks you leave out are held.
Reply with JSON only, in this format:
[{"ticker": "AAA", "action": "increase", "amount_usd": 1000.0}, {"ticker": "BBB", "action": "decrease", "amount_usd": 500.0}, {"ticker": "CCC", "action": "hold"}]{{feedback}})";
};

/// Reads system.txt, step1.txt, step2.txt and step3.txt from `dir`; the
/// directory name is recorded as the template version.
inline PromptTemplates load_prompt_templates(const std::string& dir) {
    const auto slurp = [&](const char* name) {
        std::ifstream in(dir + "/" + name);
        if (!in) {
            throw ConfigError("cannot read prompt template " + dir + "/" + name);
        }
        std::stringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
            text.pop_back();
        }
        return text;
    };
    PromptTemplates t;
    t.system = slurp("system.txt");
    t.step1 = slurp("step1.txt");
    t.step2 = slurp("step2.txt");
    t.step3 = slurp("step3.txt");
    const auto slash = dir.find_last_of('/');
    t.version = slash == std::string::npos ? dir : dir.substr(slash + 1);
    return t;
}

/// Replaces every {{name}}; an unknown or unterminated placeholder is a ConfigError.
inline std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            return out;
        }
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            throw ConfigError("unterminated placeholder in prompt template");
        }
        out.append(tmpl.substr(pos, open - pos));
        const std::string key(tmpl.substr(open + 2, close - open - 2));
        const auto it = values.find(key);
        if (it == values.end()) {
            throw ConfigError("unknown placeholder {{" + key + "}} in prompt template");
        }
        out += it->second;
        pos = close + 2;
    }
}

inline std::string money(double v) { return fmt::format("{:.2f}", v); }

inline std::string render_stock_block(const TickerOverview& t) {
    std::string out = fmt::format("## {}\nOpening price: ${}\nShares held: {}\n", t.ticker, money(t.open_price),
                                  t.position);
    out += "Recent actions (last 7 trading days):\n";
    if (t.action_history.empty()) {
        out += "- none\n";
    }
    for (const auto& h : t.action_history) {
        if (h.action == HistoryAction::hold) {
            out += fmt::format("- {}: hold\n", format_date(h.date));
        } else {
            out += fmt::format("- {}: {} {} shares at ${}\n", format_date(h.date), to_string(h.action), h.shares,
                               money(h.price));
        }
    }
    out += "News (last 48 hours):\n";
    if (t.news.empty()) {
        out += "- none\n";
    }
    int i = 0;
    for (const auto& n : t.news) {
        out += fmt::format("{}. [{}] {}\n", ++i, format_timestamp(n.published_at), n.headline);
        if (!n.summary.empty()) {
            out += fmt::format("   {}\n", n.summary);
        }
    }
    return out;
}

inline std::string render_fundamentals_block(const TickerFundamentals& f) {
    if (!f.snapshot) {
        return fmt::format("## {}\nNo fundamental data has been published yet.\n", f.ticker);
    }
    const auto& s = *f.snapshot;
    std::string divs;
    for (const auto& d : s.recent_quarterly_dividends) {
        divs += (divs.empty() ? "" : ", ") + fmt::format("{} ${}", format_date(d.date), money(d.amount));
    }
    return fmt::format(
        "## {} (as of {})\nMarket capitalization: ${:.0f}\nP/E ratio: {}\nDividend yield: {:.2f}%\n"
        "52-week high / low: ${} / ${}\nRecent quarterly dividends: {}\n",
        s.ticker, format_date(s.as_of), s.market_cap, s.pe_ratio ? money(*s.pe_ratio) : std::string("N/A"),
        s.dividend_yield * 100.0, money(s.week52_high), money(s.week52_low), divs.empty() ? "none" : divs);
}

inline std::string render_step1(const PromptTemplates& t, const OverviewContext& ctx) {
    std::string stocks;
    for (const auto& s : ctx.tickers) {
        stocks += render_stock_block(s) + "\n";
    }
    return fill_template(t.step1, {{"date", format_date(ctx.date)},
                                   {"cash", money(ctx.cash)},
                                   {"equity", money(ctx.equity)},
                                   {"stocks", stocks}});
}

inline std::string render_step2(const PromptTemplates& t, const AnalysisContext& ctx) {
    std::string blocks;
    for (const auto& f : ctx.fundamentals) {
        blocks += render_fundamentals_block(f) + "\n";
    }
    return fill_template(t.step2, {{"fundamentals", blocks}});
}

inline std::string render_step3(const PromptTemplates& t, const std::optional<std::string>& feedback) {
    const std::string note =
        feedback ? "\n\nYour previous answer was rejected. Revise it.\n" + *feedback : std::string();
    return fill_template(t.step3, {{"feedback", note}});
}

}  // namespace backtrade
