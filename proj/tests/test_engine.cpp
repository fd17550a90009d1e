#include <backtrade/agents.hpp>
#include <backtrade/engine.hpp>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace backtrade;
using namespace bt_test;

namespace {

std::string hold_everything(const OverviewContext& o) {
    std::vector<Decision> d;
    for (const auto& t : o.tickers) {
        d.push_back({t.ticker, Action::hold, std::nullopt});
    }
    return decisions_to_json(d).dump();
}

}  // namespace

TEST(Engine, HoldOnlyFlatPricesKeepsCash) {
    const auto store = priced_store(3, 5, [](std::size_t, std::size_t) { return 50.0; });
    const auto log = run_episode(store, config_for(store), *hold_only());
    ASSERT_EQ(log.steps.size(), 5u);
    EXPECT_EQ(log.final_value, kDefaultInitialCash);
    EXPECT_EQ(log.status, EpisodeStatus::completed);
    EXPECT_EQ(log.valuations().size(), 6u);
}

TEST(Engine, BuyAndHoldDoubling) {
    const auto store = priced_store(2, 3, [](std::size_t t, std::size_t d) {
        const double base = t == 0 ? 30.0 : 70.0;
        return d == 0 ? base : 2.0 * base;
    });
    auto config = config_for(store);
    config.initial_cash = 1000.0;
    const auto log = run_episode(store, config, *passive_buy_and_hold(config));
    // 500 / 30 -> 16 shares (480), 500 / 70 -> 7 shares (490), 30 left in cash.
    EXPECT_EQ(log.steps[0].portfolio, (Portfolio{30.0, {{"SYN01", 16}, {"SYN02", 7}}}));
    EXPECT_DOUBLE_EQ(log.final_value, 2.0 * 970.0 + 30.0);
}

TEST(Engine, MalformedAgentFallsBackEveryDay) {
    const auto store = priced_store(2, 4, [](std::size_t, std::size_t) { return 10.0; });
    ScriptedAgent agent([](const DecisionRequest&) { return std::string("not json"); });
    const auto log = run_episode(store, config_for(store), agent);
    for (const auto& step : log.steps) {
        EXPECT_TRUE(step.fallback_hold_all);
        ASSERT_EQ(step.errors.size(), static_cast<std::size_t>(kDefaultMaxRevisions));
        for (int i = 0; i < kDefaultMaxRevisions; ++i) {
            EXPECT_EQ(step.errors[static_cast<std::size_t>(i)].kind, ErrorKind::schema);
            EXPECT_EQ(step.errors[static_cast<std::size_t>(i)].revision_index, i);
        }
        EXPECT_TRUE(step.trades.empty());
        for (const auto& d : step.decisions.decisions) {
            EXPECT_EQ(d.action, Action::hold);
        }
    }
}

TEST(Engine, SchemaThenArithmeticShareOneBudget) {
    const auto store = priced_store(1, 2, [](std::size_t, std::size_t) { return 10.0; });
    std::vector<std::optional<std::string>> feedback_seen;
    ScriptedAgent agent([&](const DecisionRequest& r) -> std::string {
        feedback_seen.push_back(r.feedback);
        switch (r.revision) {
            case 0: return "oops";
            case 1: return R"([{"ticker":"SYN01","action":"increase","amount_usd":1e9}])";
            default: return R"([{"ticker":"SYN01","action":"increase","amount_usd":100}])";
        }
    });
    auto config = config_for(store);
    config.end_date = store.calendar().days()[1];
    const auto log = run_episode(store, config, agent);
    const auto& step = log.steps[0];
    ASSERT_EQ(step.errors.size(), 2u);
    EXPECT_EQ(step.errors[0].kind, ErrorKind::schema);
    EXPECT_EQ(step.errors[1].kind, ErrorKind::arithmetic);
    EXPECT_FALSE(step.fallback_hold_all);
    ASSERT_EQ(step.trades.size(), 1u);
    EXPECT_EQ(step.trades[0].intent.shares, 10);
    EXPECT_FALSE(feedback_seen[0].has_value());
    ASSERT_TRUE(feedback_seen[1].has_value());
    EXPECT_NE(feedback_seen[1]->find("could not be parsed"), std::string::npos);
    EXPECT_NE(feedback_seen[2]->find("InsufficientCash"), std::string::npos);
}

TEST(Engine, ExecuteWithRevisionExamples) {
    const std::vector<std::string> universe{"A", "B"};
    const PriceMap prices{{"A", 100.0}, {"B", 50.0}};
    const Portfolio start{1000.0, {}};
    const Date d = day(2025, 3, 3);

    int calls = 0;
    const ReviseFn never = [&](const std::optional<std::string>&, int) {
        ++calls;
        return std::string("[]");
    };
    const DecisionSet ok{d, {{"A", Action::increase, 500.0}}};
    const auto r0 = execute_with_revision(start, ok, prices, never, 3, universe);
    EXPECT_TRUE(r0.errors.empty());
    EXPECT_EQ(r0.trades.size(), 1u);
    EXPECT_EQ(calls, 0);

    const DecisionSet over{d, {{"A", Action::increase, 5000.0}}};
    const ReviseFn fix = [&](const std::optional<std::string>& feedback, int revision) {
        EXPECT_TRUE(feedback.has_value());
        EXPECT_EQ(revision, 1);
        return std::string(R"([{"ticker":"B","action":"increase","amount_usd":500}])");
    };
    const auto r1 = execute_with_revision(start, over, prices, fix, 3, universe);
    ASSERT_EQ(r1.errors.size(), 1u);
    EXPECT_EQ(r1.errors[0].kind, ErrorKind::arithmetic);
    ASSERT_EQ(r1.trades.size(), 1u);
    EXPECT_EQ(r1.trades[0].intent.ticker, "B");
    EXPECT_EQ(r1.portfolio, (Portfolio{500.0, {{"B", 10}}}));

    const ReviseFn stubborn = [&](const std::optional<std::string>&, int) {
        return std::string(R"([{"ticker":"A","action":"increase","amount_usd":5000}])");
    };
    const auto r2 = execute_with_revision(start, over, prices, stubborn, 3, universe);
    EXPECT_EQ(r2.errors.size(), 3u);
    EXPECT_TRUE(r2.trades.empty());
    EXPECT_TRUE(r2.fallback_hold_all);
    EXPECT_EQ(r2.portfolio, start);
}

TEST(Engine, DecreaseClampAndFloor) {
    const PriceMap prices{{"A", 100.0}};
    const Portfolio p{0.0, {{"A", 5}}};
    const auto full = plan_orders({{}, {{"A", Action::decrease, 500.0}}}, p, prices);
    ASSERT_EQ(full.intents.size(), 1u);
    EXPECT_EQ(full.intents[0].shares, 5);
    EXPECT_EQ(full.notes.size(), 1u);

    const auto partial = plan_orders({{}, {{"A", Action::decrease, 250.0}}}, p, prices);
    EXPECT_EQ(partial.intents.at(0).shares, 2);
    EXPECT_TRUE(partial.notes.empty());

    const auto none = plan_orders({{}, {{"A", Action::decrease, 50.0}}}, p, prices);
    EXPECT_TRUE(none.intents.empty());

    const auto empty = plan_orders({{}, {{"B", Action::decrease, 50.0}}}, Portfolio{}, {{"B", 10.0}});
    EXPECT_TRUE(empty.intents.empty());
    EXPECT_THROW(plan_orders({{}, {{"C", Action::increase, 50.0}}}, p, prices), MissingPrice);
}

TEST(Engine, OverviewContextWindowAndAblation) {
    const auto store = make_synthetic_store(SyntheticSpec{});
    auto config = config_for(store, 3);
    int day_no = 0;
    ScriptedAgent agent([&](const DecisionRequest& r) {
        ++day_no;
        const auto& t = r.overview.tickers[0];
        if (day_no == 1) {
            EXPECT_TRUE(t.action_history.empty());
        }
        if (day_no == 9) {
            EXPECT_EQ(t.action_history.size(), 7u);
            EXPECT_EQ(t.action_history.front().date, store.calendar().days()[1]);
            EXPECT_EQ(t.action_history.back().date, store.calendar().days()[7]);
        }
        EXPECT_LE(t.action_history.size(), kActionHistoryDays);
        return hold_everything(r.overview);
    });
    config.end_date = store.calendar().days()[12];
    run_episode(store, config, agent);
    EXPECT_EQ(day_no, 13);

    std::size_t news_seen = 0;
    ScriptedAgent counter([&](const DecisionRequest& r) {
        for (const auto& t : r.overview.tickers) {
            news_seen += t.news.size();
        }
        return hold_everything(r.overview);
    });
    run_episode(store, config, counter);
    EXPECT_GT(news_seen, 0u);
    news_seen = 0;
    config.include_news = false;
    run_episode(store, config, counter);
    EXPECT_EQ(news_seen, 0u);
}

TEST(Engine, HistoryRecordsTradesAndHoldMarkers) {
    const auto store = priced_store(2, 4, [](std::size_t, std::size_t) { return 10.0; });
    std::vector<HistoryEntry> last_seen;
    ScriptedAgent agent([&](const DecisionRequest& r) {
        last_seen = r.overview.tickers[0].action_history;
        if (r.overview.day_index == 1) {
            return std::string(R"([{"ticker":"SYN01","action":"increase","amount_usd":100}])");
        }
        return std::string("[]");
    });
    run_episode(store, config_for(store), agent);
    ASSERT_EQ(last_seen.size(), 3u);
    EXPECT_EQ(last_seen[0].action, HistoryAction::hold);
    EXPECT_EQ(last_seen[1].action, HistoryAction::buy);
    EXPECT_EQ(last_seen[1].shares, 10);
    EXPECT_EQ(last_seen[2].action, HistoryAction::hold);
}

TEST(Engine, SelectionGatesFundamentalsOnly) {
    const auto store = make_synthetic_store(SyntheticSpec{});
    auto config = config_for(store, 4);
    config.end_date = store.calendar().days()[2];
    ScriptedAgent agent(
        [&](const DecisionRequest& r) {
            EXPECT_EQ(r.analysis.fundamentals.size(), config.include_fundamentals ? 1u : 0u);
            if (!r.analysis.fundamentals.empty()) {
                EXPECT_EQ(r.analysis.fundamentals[0].ticker, "SYN02");
            }
            // Trading an unselected ticker is allowed.
            return std::string(R"([{"ticker":"SYN04","action":"increase","amount_usd":1000}])");
        },
        [](const SelectionRequest&) { return std::string(R"(["SYN02"])"); });
    auto log = run_episode(store, config, agent);
    EXPECT_EQ(log.steps[0].selected, (std::vector<std::string>{"SYN02"}));
    EXPECT_EQ(log.steps[0].trades.size(), 1u);
    config.include_fundamentals = false;
    run_episode(store, config, agent);
}

TEST(Engine, MalformedSelectionIsSchemaEventAndEmpty) {
    const auto store = priced_store(2, 2, [](std::size_t, std::size_t) { return 10.0; });
    ScriptedAgent agent([](const DecisionRequest& r) { return hold_everything(r.overview); },
                        [](const SelectionRequest&) { return std::string("SYN01 please"); });
    const auto log = run_episode(store, config_for(store), agent);
    EXPECT_TRUE(log.steps[0].selected.empty());
    ASSERT_EQ(log.steps[0].errors.size(), 1u);
    EXPECT_EQ(log.steps[0].errors[0].kind, ErrorKind::schema);
    EXPECT_FALSE(log.steps[0].fallback_hold_all);
}

TEST(Engine, TransportErrorAbortsKeepingPartialLog) {
    const auto store = priced_store(2, 6, [](std::size_t, std::size_t) { return 10.0; });
    ScriptedAgent agent([](const DecisionRequest& r) -> std::string {
        if (r.overview.day_index == 3) {
            throw AgentTransportError("endpoint unreachable", 3);
        }
        return hold_everything(r.overview);
    });
    const auto log = run_episode(store, config_for(store), agent);
    EXPECT_EQ(log.status, EpisodeStatus::aborted);
    EXPECT_EQ(log.steps.size(), 3u);
    EXPECT_NE(log.abort_reason.find("unreachable"), std::string::npos);
}

TEST(Engine, ConfigValidation) {
    const auto store = priced_store(2, 6, [](std::size_t, std::size_t) { return 10.0; });
    const auto good = config_for(store);
    auto c = good;
    c.universe.clear();
    EXPECT_THROW(validate_config(store, c), ConfigError);
    c = good;
    c.universe = {"SYN01", "SYN01"};
    EXPECT_THROW(validate_config(store, c), ConfigError);
    c = good;
    c.universe = {"NOPE"};
    EXPECT_THROW(validate_config(store, c), ConfigError);
    c = good;
    c.end_date = c.start_date;
    EXPECT_THROW(validate_config(store, c), ConfigError);
    c = good;
    c.end_date += std::chrono::days{30};
    EXPECT_THROW(validate_config(store, c), ConfigError);
    c = good;
    c.max_revisions = 0;
    EXPECT_THROW(validate_config(store, c), ConfigError);
    c = good;
    c.initial_cash = 0;
    EXPECT_THROW(validate_config(store, c), ConfigError);
    EXPECT_THROW(run_episode(store, c, *hold_only()), ConfigError);
}

TEST(Engine, ErrorRates) {
    const auto store = priced_store(2, 10, [](std::size_t, std::size_t) { return 10.0; });
    const auto config = config_for(store);
    const std::vector<EpisodeLog> clean{run_episode(store, config, *hold_only())};
    const auto none = error_rates(clean);
    EXPECT_EQ(none.arithmetic, 0.0);
    EXPECT_EQ(none.schema, 0.0);

    const std::vector<EpisodeLog> faulty{run_episode(store, config, *fault_agent(FaultKind::schema, 1))};
    EXPECT_EQ(error_rates(faulty).schema, 100.0);

    EXPECT_THROW(error_rates(std::span<const EpisodeLog>{}), EmptyInput);

    // 2 arithmetic days out of 50.
    EpisodeLog synthetic;
    for (int i = 0; i < 50; ++i) {
        StepRecord s;
        if (i == 3 || i == 40) {
            s.errors.push_back({s.date, ErrorKind::arithmetic, "x", 0});
            s.errors.push_back({s.date, ErrorKind::arithmetic, "y", 1});
        }
        synthetic.steps.push_back(s);
    }
    const std::vector<EpisodeLog> one{synthetic};
    EXPECT_DOUBLE_EQ(error_rates(one).arithmetic, 4.0);
}

TEST(Engine, NoLookaheadTruncation) {
    SyntheticSpec spec;
    spec.tickers = 5;
    spec.trading_days = 20;
    const auto store = make_synthetic_store(spec);
    NewsDrivenAgent agent;
    const auto full = run_episode(store, config_for(store), agent);
    const auto days = store.calendar().days();
    for (std::size_t t = 1; t < days.size(); ++t) {
        const auto cut = store.truncated_after(days[t]);
        auto config = config_for(store);
        config.end_date = days[t];
        const auto partial = run_episode(cut, config, agent);
        ASSERT_EQ(partial.steps.size(), t + 1);
        for (std::size_t i = 0; i <= t; ++i) {
            EXPECT_EQ(partial.steps[i], full.steps[i]) << "day " << i << " cut " << t;
        }
    }
}
