#include <backtrade/episode_io.hpp>

#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace backtrade;
using namespace bt_test;

namespace {

EpisodeLog busy_log() {
    SyntheticSpec spec;
    spec.tickers = 4;
    spec.trading_days = 15;
    const auto store = make_synthetic_store(spec);
    NewsDrivenAgent news;
    auto log = run_episode(store, config_for(store), news);
    // Make sure errors and notes are exercised too.
    const auto faulty = run_episode(store, config_for(store), *fault_agent(FaultKind::overspend, 3));
    log.steps[1].errors = faulty.steps[2].errors;
    log.steps[1].notes = {"decrease of SYN01 covers the position value; liquidating 3 shares"};
    return log;
}

}  // namespace

TEST(EpisodeIo, RoundTripIsExact) {
    const auto log = busy_log();
    std::stringstream text;
    write_episode_log(text, log, "abc123");
    const auto loaded = read_episode_log(text);
    EXPECT_EQ(loaded.manifest_digest, "abc123");
    EXPECT_EQ(loaded.log, log);
    EXPECT_EQ(compute_metrics(loaded.log.valuations()), compute_metrics(log.valuations()));
}

TEST(EpisodeIo, AbortedLogRoundTrips) {
    EpisodeLog log = busy_log();
    log.steps.resize(4);
    log.status = EpisodeStatus::aborted;
    log.abort_reason = "transport";
    log.final_value = log.steps.back().valuation_at_open;
    std::stringstream text;
    write_episode_log(text, log);
    EXPECT_EQ(read_episode_log(text).log, log);
}

TEST(EpisodeIo, RecordShape) {
    std::stringstream text;
    write_episode_log(text, busy_log(), "d");
    std::string first;
    std::getline(text, first);
    const auto header = nlohmann::json::parse(first);
    EXPECT_EQ(header.at("kind"), "episode");
    EXPECT_EQ(header.at("schema"), "backtrade.episode_log");
    EXPECT_EQ(header.at("schema_version"), kEpisodeLogSchemaVersion);
    std::string step_line;
    std::getline(text, step_line);
    const auto step = nlohmann::json::parse(step_line);
    for (const char* key : {"date", "overview", "selected", "decisions", "trades", "errors", "notes",
                            "fallback_hold_all", "cash", "positions", "valuation_at_open"}) {
        EXPECT_TRUE(step.contains(key)) << key;
    }
}

TEST(EpisodeIo, RejectsBrokenDocuments) {
    std::istringstream empty("");
    EXPECT_THROW(read_episode_log(empty), ParseError);
    std::istringstream wrong(R"({"kind":"episode","schema":"other","schema_version":1})");
    EXPECT_THROW(read_episode_log(wrong), ParseError);
    std::istringstream junk("{oops");
    EXPECT_THROW(read_episode_log(junk), ParseError);
}

TEST(EpisodeIo, MetricDocumentsRoundTrip) {
    const MetricReport m{0.1234567890123, -0.0987654321, std::nullopt, 0.0, 0.001};
    EXPECT_EQ(io::metrics_from_json(nlohmann::json::parse(io::to_json(m).dump())), m);
    const Dispersion d{0.02, 0.0141421356237, 0.70710678, 0.0002};
    EXPECT_EQ(io::dispersion_from_json(nlohmann::json::parse(io::to_json(d).dump())), d);
}
