#pragma once

// Decision and selection schemas for agent output. Agents return raw text;
// the engine parses it here so schema errors are counted the same way for
// every agent.
//
// Accepted decision payloads (optionally inside one ``` fenced block):
//   [{"ticker": "AAPL", "action": "increase", "amount_usd": 5000}, ...]
//   {"decisions": [ ...same list... ]}
// Accepted selection payloads: ["AAPL", "MSFT"]

#include <backtrade/dates.hpp>
#include <backtrade/errors.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace backtrade {

enum class Action { increase, decrease, hold };

inline const char* to_string(Action action) {
    switch (action) {
        case Action::increase: return "increase";
        case Action::decrease: return "decrease";
        case Action::hold: return "hold";
    }
    return "hold";
}

struct Decision {
    std::string ticker;
    Action action = Action::hold;
    std::optional<double> amount_usd;  // absent for hold

    friend bool operator==(const Decision&, const Decision&) = default;
};

struct DecisionSet {
    Date date;
    std::vector<Decision> decisions;

    friend bool operator==(const DecisionSet&, const DecisionSet&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Returns the body of the first ``` fenced block, or the whole text when it
/// has no fence. The info string after the opening fence ("json") is dropped.
inline std::string_view extract_payload(std::string_view raw) {
    const auto open = raw.find("```");
    if (open == std::string_view::npos) {
        return trim(raw);
    }
    auto body_start = raw.find('\n', open + 3);
    if (body_start == std::string_view::npos) {
        throw SchemaError("unterminated ``` block");
    }
    ++body_start;
    const auto close = raw.find("```", body_start);
    if (close == std::string_view::npos) {
        throw SchemaError("unterminated ``` block");
    }
    return trim(raw.substr(body_start, close - body_start));
}

inline nlohmann::json parse_payload(std::string_view raw) {
    const auto payload = extract_payload(raw);
    if (payload.empty()) {
        throw SchemaError("response contains no JSON payload");
    }
    try {
        return nlohmann::json::parse(payload);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("response is not valid JSON: ") + e.what());
    }
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace detail

/// Strict parse of an agent's Step 3 response. When `universe` is non-empty
/// every ticker must belong to it. Throws SchemaError with a readable diagnosis.
inline DecisionSet parse_decisions(std::string_view raw, std::span<const std::string> universe = {},
                                   Date date = {}) {
    const nlohmann::json doc = detail::parse_payload(raw);
    const nlohmann::json* list = &doc;
    if (doc.is_object()) {
        if (doc.size() != 1 || !doc.contains("decisions")) {
            throw SchemaError("expected a JSON list of decisions or an object with only a \"decisions\" key");
        }
        list = &doc["decisions"];
    }
    if (!list->is_array()) {
        throw SchemaError("decisions must be a JSON list");
    }

    DecisionSet out{date, {}};
    std::set<std::string> seen;
    std::size_t index = 0;
    for (const auto& item : *list) {
        const std::string where = "decision " + std::to_string(index++);
        if (!item.is_object()) {
            throw SchemaError(where + " is not an object");
        }
        for (const auto& [key, _] : item.items()) {
            if (key != "ticker" && key != "action" && key != "amount_usd") {
                throw SchemaError(where + " has unknown field \"" + key + "\"");
            }
        }
        if (!item.contains("ticker") || !item["ticker"].is_string() || item["ticker"].get<std::string>().empty()) {
            throw SchemaError(where + " needs a non-empty string \"ticker\"");
        }
        Decision d;
        d.ticker = item["ticker"].get<std::string>();
        if (!universe.empty() && std::find(universe.begin(), universe.end(), d.ticker) == universe.end()) {
            throw SchemaError(where + " names ticker " + d.ticker + " which is not in the investment universe");
        }
        if (!seen.insert(d.ticker).second) {
            throw SchemaError("ticker " + d.ticker + " appears in more than one decision");
        }
        if (!item.contains("action") || !item["action"].is_string()) {
            throw SchemaError(where + " (" + d.ticker + ") needs a string \"action\"");
        }
        const auto action = detail::lower(item["action"].get<std::string>());
        if (action == "increase") {
            d.action = Action::increase;
        } else if (action == "decrease") {
            d.action = Action::decrease;
        } else if (action == "hold") {
            d.action = Action::hold;
        } else {
            throw SchemaError(where + " (" + d.ticker + ") has unknown action \"" +
                              item["action"].get<std::string>() + "\"; use increase, decrease or hold");
        }
        const auto amount = item.find("amount_usd");
        const bool has_amount = amount != item.end() && !amount->is_null();
        if (has_amount && !amount->is_number()) {
            throw SchemaError(where + " (" + d.ticker + ") has a non-numeric \"amount_usd\"");
        }
        if (d.action == Action::hold) {
            // A zero amount on hold is tolerated; anything else is contradictory.
            if (has_amount && amount->get<double>() != 0.0) {
                throw SchemaError(where + " (" + d.ticker + ") is a hold but carries an amount");
            }
        } else {
            if (!has_amount) {
                throw SchemaError(where + " (" + d.ticker + ") needs \"amount_usd\" for " + action);
            }
            const double value = amount->get<double>();
            if (!(value > 0.0) || !std::isfinite(value)) {
                throw SchemaError(where + " (" + d.ticker + ") needs a positive \"amount_usd\"");
            }
            d.amount_usd = value;
        }
        out.decisions.push_back(std::move(d));
    }
    return out;
}

/// Step 2 selection: a bare JSON list of ticker strings (possibly empty).
inline std::vector<std::string> parse_selection(std::string_view raw, std::span<const std::string> universe = {}) {
    const nlohmann::json doc = detail::parse_payload(raw);
    if (!doc.is_array()) {
        throw SchemaError("selection must be a JSON list of ticker strings");
    }
    std::vector<std::string> out;
    for (const auto& item : doc) {
        if (!item.is_string()) {
            throw SchemaError("selection entries must be ticker strings");
        }
        auto ticker = item.get<std::string>();
        if (!universe.empty() && std::find(universe.begin(), universe.end(), ticker) == universe.end()) {
            throw SchemaError("selected ticker " + ticker + " is not in the investment universe");
        }
        if (std::find(out.begin(), out.end(), ticker) != out.end()) {
            throw SchemaError("ticker " + ticker + " selected twice");
        }
        out.push_back(std::move(ticker));
    }
    return out;
}

inline nlohmann::json decisions_to_json(const std::vector<Decision>& decisions) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& d : decisions) {
        nlohmann::json item{{"ticker", d.ticker}, {"action", to_string(d.action)}};
        if (d.amount_usd) {
            item["amount_usd"] = *d.amount_usd;
        }
        list.push_back(std::move(item));
    }
    return list;
}

}  // namespace backtrade
