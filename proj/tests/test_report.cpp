#include <backtrade/report.hpp>

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace backtrade;
using namespace bt_test;

namespace {

const MarketSnapshotStore& synthetic() {
    static const MarketSnapshotStore store = [] {
        SyntheticSpec spec;
        spec.tickers = 20;
        spec.trading_days = 20;
        return make_synthetic_store(spec);
    }();
    return store;
}

RunManifest manifest_for(const EpisodeConfig& config, const Agent& agent, const std::string& spec) {
    RunManifest m;
    m.snapshot_path = "snap.ndjson";
    m.snapshot_digest = "feedbeef";
    m.config = config;
    m.agent_spec = spec;
    m.agent = agent.identity();
    return m;
}

Aggregate fake_aggregate(const std::string& label, double fr, double mdd, std::optional<double> sortino,
                         const std::string& env = "env") {
    Aggregate a;
    a.label = label;
    a.environment_digest = env;
    a.mean_final_return = fr;
    a.mean_max_drawdown = mdd;
    a.mean_sortino = sortino;
    return a;
}

}  // namespace

TEST(Report, Sha256KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Report, ManifestDigestIgnoresTimestampsAndPath) {
    const HoldOnlyAgent agent;
    auto a = manifest_for(config_for(synthetic()), agent, "hold_only");
    auto b = a;
    b.started_at = "2026-01-01T00:00:00Z";
    b.finished_at = "2026-01-01T00:01:00Z";
    b.snapshot_path = "/elsewhere/snap.ndjson";
    b.config.seed = 99;
    EXPECT_EQ(a.digest(), b.digest());
    EXPECT_EQ(a.digest().size(), 64U);

    b.seeds = {0, 1};
    EXPECT_NE(a.digest(), b.digest());
    b = a;
    b.config.fee_bps = 1.0;
    EXPECT_NE(a.digest(), b.digest());
    EXPECT_NE(a.environment_digest(), b.environment_digest());

    const auto doc = a.to_json();
    EXPECT_EQ(doc.at("digest"), a.digest());
    EXPECT_FALSE(doc.at("config").contains("seed"));
}

TEST(Report, EnvironmentDigestIgnoresAgent) {
    const auto config = config_for(synthetic());
    const HoldOnlyAgent hold;
    const NewsDrivenAgent news;
    const auto a = manifest_for(config, hold, "hold_only");
    const auto b = manifest_for(config, news, "news_driven");
    EXPECT_NE(a.digest(), b.digest());
    EXPECT_EQ(a.environment_digest(), b.environment_digest());
}

TEST(Report, MakeAgentSpecs) {
    const auto config = config_for(synthetic(), 4);
    EXPECT_EQ(make_agent("hold_only", config).agent->identity().label(), "hold_only@1");
    EXPECT_EQ(make_agent("passive", config).agent->identity().name, "passive_buy_and_hold");
    EXPECT_EQ(make_agent("news_driven", config).agent->identity().name, "news_driven");
    const auto fault = make_agent("fault:overspend:3", config);
    EXPECT_EQ(fault.agent->identity().name, "fault_overspend_every_3");
    EXPECT_EQ(fault.settings.at("every_nth"), 3);
    EXPECT_THROW(make_agent("fault:weird:3", config), ConfigError);
    EXPECT_THROW(make_agent("fault:schema:x", config), ConfigError);
    EXPECT_THROW(make_agent("remote:/no/such/file.json", config), ConfigError);
    EXPECT_THROW(make_agent("oracle", config), ConfigError);
}

TEST(Report, RunMatrixKeepsOrderAcrossJobs) {
    const NewsDrivenAgent agent;
    std::vector<EpisodeConfig> configs;
    for (std::size_t n : {3U, 5U, 8U, 13U, 20U}) {
        configs.push_back(config_for(synthetic(), n));
    }
    const auto serial = run_matrix(synthetic(), configs, agent, 1);
    const auto parallel = run_matrix(synthetic(), configs, agent, 4);
    ASSERT_EQ(serial.size(), 5U);
    EXPECT_EQ(serial, parallel);
    for (std::size_t i = 0; i < configs.size(); ++i) {
        EXPECT_EQ(parallel[i].config, configs[i]);
    }
}

TEST(Report, HoldOnlySeedsAreIdentical) {
    const HoldOnlyAgent agent;
    const auto config = config_for(synthetic());
    const auto logs = run_seeds(synthetic(), config, agent, {0, 1, 2}, 3);
    ASSERT_EQ(logs.size(), 3U);
    for (const auto& log : logs) {
        EXPECT_EQ(log.steps, logs[0].steps);
    }
    const auto agg = aggregate_runs("hold", manifest_for(config, agent, "hold_only"), logs);
    ASSERT_TRUE(agg.dispersion);
    EXPECT_EQ(agg.dispersion->std, 0.0);
    EXPECT_EQ(agg.mean_final_return, 0.0);
    EXPECT_FALSE(agg.mean_sortino);  // flat series has no downside
}

TEST(Report, AggregateJsonRoundTripIsExact) {
    const NewsDrivenAgent agent;
    const auto config = config_for(synthetic(), 10);
    auto logs = run_seeds(synthetic(), config, agent, {0, 1, 2});
    logs[2].status = EpisodeStatus::aborted;
    logs[2].abort_reason = "transport";
    const auto agg = aggregate_runs("news", manifest_for(config, agent, "news_driven"), logs);
    EXPECT_EQ(agg.runs.size(), 3U);
    ASSERT_TRUE(agg.dispersion);  // two completed runs
    const auto text = aggregate_to_json(agg).dump();
    EXPECT_EQ(aggregate_from_json(nlohmann::json::parse(text)), agg);
    EXPECT_THROW(aggregate_from_json(nlohmann::json{{"schema", "other"}}), ParseError);
}

TEST(Report, AggregateNeedsTwoCompletedRunsForDispersion) {
    const HoldOnlyAgent agent;
    const auto config = config_for(synthetic());
    const auto logs = run_seeds(synthetic(), config, agent, {0});
    EXPECT_FALSE(aggregate_runs("h", manifest_for(config, agent, "hold_only"), logs).dispersion);
}

TEST(Report, LeaderboardGoldenFormats) {
    const auto board = build_leaderboard({fake_aggregate("B", 0.05, -0.10, 1.0), fake_aggregate("A", 0.10, -0.05, 2.0)});
    ASSERT_EQ(board.rows.size(), 2U);
    EXPECT_EQ(format_leaderboard_text(board),
              "Rank  Model    RT(%)   DDN(%)   Sortino    Score\n"
              "   1  A         10.0     -5.0    2.0000    1.000\n"
              "   2  B          5.0    -10.0    1.0000   -1.000\n");
    EXPECT_EQ(format_leaderboard_csv(board),
              "rank,label,final_return_pct,max_drawdown_pct,sortino,score\n"
              "1,A,10.0,-5.0,2.0000,1.0000\n"
              "2,B,5.0,-10.0,1.0000,-1.0000\n");
    const auto j = leaderboard_to_json(board);
    EXPECT_EQ(j.at("rows")[0].at("label"), "A");
    EXPECT_TRUE(j.at("warnings").empty());
}

TEST(Report, LeaderboardRejectsMixedEnvironments) {
    EXPECT_THROW(build_leaderboard({fake_aggregate("A", 0.1, -0.1, 1.0, "x"), fake_aggregate("B", 0.1, -0.1, 1.0, "y")}),
                 ConfigError);
    EXPECT_THROW(build_leaderboard({fake_aggregate("A", 0.1, -0.1, 1.0)}), TooFewRows);
}

TEST(Report, LeaderboardWarnsOnUndefinedSortino) {
    const auto board = build_leaderboard({fake_aggregate("A", 0.1, -0.1, 1.0), fake_aggregate("B", 0.2, -0.2, 2.0),
                                          fake_aggregate("Hold", 0.0, 0.0, std::nullopt)});
    EXPECT_EQ(board.rows.size(), 2U);
    ASSERT_EQ(board.warnings.size(), 1U);
    EXPECT_NE(board.warnings[0].find("Hold"), std::string::npos);
}

TEST(Report, TwoRealAgentsOnOneEnvironment) {
    const auto config = config_for(synthetic(), 10);
    const auto passive = make_agent("passive", config);
    const auto news = make_agent("news_driven", config);
    std::vector<Aggregate> aggs;
    for (const auto* h : {&passive, &news}) {
        const auto logs = run_seeds(synthetic(), config, *h->agent, {0, 1, 2});
        aggs.push_back(aggregate_runs(h->agent->identity().name, manifest_for(config, *h->agent, "x"), logs));
    }
    const auto board = build_leaderboard(aggs);
    ASSERT_EQ(board.rows.size(), 2U);
    EXPECT_EQ(board.rows[0].rank, 1);
    EXPECT_NEAR(board.rows[0].score, -board.rows[1].score, 1e-12);
}

TEST(Report, FixtureLoads) {
    std::ifstream in(std::string(BACKTRADE_SOURCE_DIR) + "/data/published_leaderboard.csv");
    const auto rows = load_leaderboard_fixture(in);
    ASSERT_EQ(rows.size(), 14U);
    EXPECT_EQ(rows[0].entry.label, "Kimi-K2");
    EXPECT_NEAR(rows[0].entry.final_return, 0.019, 1e-15);
    EXPECT_NEAR(rows[0].entry.max_drawdown, -0.118, 1e-15);
    EXPECT_EQ(rows[0].published_rank, 1);

    std::istringstream bad_header("name,rt,ddn,sortino\n");
    EXPECT_THROW(load_leaderboard_fixture(bad_header), ParseError);
    std::istringstream bad_cell("label,final_return_pct,max_drawdown_pct,sortino\nA,1.x,-2,0.1\n");
    EXPECT_THROW(load_leaderboard_fixture(bad_cell), ParseError);
    std::istringstream short_row("label,final_return_pct,max_drawdown_pct,sortino\nA,1\n");
    EXPECT_THROW(load_leaderboard_fixture(short_row), ParseError);
}

TEST(Report, AblationHoldOnlyIsFlat) {
    const HoldOnlyAgent agent;
    const auto base = config_for(synthetic(), 10);
    std::vector<std::vector<EpisodeLog>> per_variant;
    for (std::size_t v = 0; v < ablation_variants().size(); ++v) {
        per_variant.push_back(run_seeds(synthetic(), ablated(base, v), agent, {0, 1}));
    }
    const auto rows = ablation_rows(per_variant);
    ASSERT_EQ(rows.size(), 3U);
    for (const auto& r : rows) {
        EXPECT_EQ(r.mean_final_return, 0.0);
        EXPECT_EQ(r.final_returns.size(), 2U);
    }
    EXPECT_EQ(format_ablation_text("hold_only@1", rows),
              "Variant               CR(%)   (hold_only@1)\n"
              "Full                    0.0\n"
              "w/o News                0.0\n"
              "w/o News & Fund.        0.0\n");
    EXPECT_EQ(format_ablation_csv("h", rows),
              "label,variant,cumulative_return_pct,runs\nh,Full,0.0,2\nh,w/o News,0.0,2\nh,w/o News & Fund.,0.0,2\n");
}

TEST(Report, AblationChangesNewsDrivenAgent) {
    const NewsDrivenAgent agent;
    const auto base = config_for(synthetic(), 10);
    EXPECT_FALSE(ablated(base, 1).include_news);
    EXPECT_TRUE(ablated(base, 1).include_fundamentals);
    EXPECT_FALSE(ablated(base, 2).include_fundamentals);
    std::vector<std::vector<EpisodeLog>> per_variant;
    for (std::size_t v = 0; v < 3; ++v) {
        per_variant.push_back(run_seeds(synthetic(), ablated(base, v), agent, {0}));
    }
    const auto rows = ablation_rows(per_variant);
    EXPECT_NE(rows[0].mean_final_return, rows[2].mean_final_return);
    EXPECT_EQ(rows[2].mean_final_return, 0.0);  // nothing to react to
}

TEST(Report, ErrorTableGroupsByAgent) {
    const auto config = config_for(synthetic(), 5);
    std::vector<EpisodeLog> logs;
    for (const auto& spec : {"fault:schema:4", "fault:overspend:2", "hold_only"}) {
        const auto h = make_agent(spec, config);
        const auto batch = run_seeds(synthetic(), config, *h.agent, {0, 1});
        logs.insert(logs.end(), batch.begin(), batch.end());
    }
    const auto rows = error_table(logs);
    ASSERT_EQ(rows.size(), 3U);
    EXPECT_EQ(rows[0].label, "fault_schema_every_4@1");
    EXPECT_EQ(rows[0].days, 40U);
    EXPECT_DOUBLE_EQ(rows[0].rates.schema, 25.0);
    EXPECT_DOUBLE_EQ(rows[0].rates.arithmetic, 0.0);
    EXPECT_DOUBLE_EQ(rows[1].rates.arithmetic, 50.0);
    EXPECT_DOUBLE_EQ(rows[2].rates.arithmetic + rows[2].rates.schema, 0.0);
    EXPECT_EQ(format_error_table_text({rows[1]}),
              "Agent                        Days  Arithmetic(%)  Schema(%)\n"
              "fault_overspend_every_2@1      40           50.0        0.0\n");
    EXPECT_EQ(format_error_table_csv({rows[0]}), "label,days,arithmetic_pct,schema_pct\nfault_schema_every_4@1,40,0.0,25.0\n");
    EXPECT_THROW(error_table({}), EmptyInput);
}

TEST(Report, UniverseSweepProducesOneAggregatePerSize) {
    std::vector<Aggregate> aggs;
    for (std::size_t n : {5U, 10U, 15U, 20U}) {
        const auto config = config_for(synthetic(), n);
        const auto h = make_agent("passive", config);
        const auto logs = run_seeds(synthetic(), config, *h.agent, {0, 1, 2}, 3);
        aggs.push_back(aggregate_runs("passive", manifest_for(config, *h.agent, "passive"), logs));
    }
    ASSERT_EQ(aggs.size(), 4U);
    for (const auto& a : aggs) {
        ASSERT_TRUE(a.dispersion);
        EXPECT_EQ(a.dispersion->std, 0.0);  // deterministic agent
    }
    EXPECT_NE(aggs[0].environment_digest, aggs[1].environment_digest);
    const auto text = format_scaling_text("passive", aggs);
    std::istringstream lines(text);
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    EXPECT_EQ(header, "Stocks   % Mean    % Std      CV   (passive)");
    EXPECT_EQ(first.substr(0, 6), "     5");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}
