#include <backtrade/prompts.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace backtrade;
using namespace bt_test;

namespace {

std::string golden_path(const std::string& name) { return std::string(BACKTRADE_SOURCE_DIR) + "/tests/golden/" + name; }

std::string read_golden(const std::string& name) {
    std::ifstream in(golden_path(name), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

OverviewContext one_ticker_overview() {
    OverviewContext o;
    o.date = day(2025, 3, 5);
    o.day_index = 2;
    o.cash = 99000.0;
    o.equity = 100250.0;
    TickerOverview t;
    t.ticker = "AAPL";
    t.open_price = 250.0;
    t.position = 5;
    t.news = {{"AAPL", at(2025, 3, 4, 21, 5), "Apple unveils new MacBook Air", "Launch moves up a week.", 1},
              {"AAPL", at(2025, 3, 3, 15, 0), "Supplier output rises", "", 2}};
    t.action_history = {{day(2025, 3, 3), HistoryAction::hold, 0, 0.0},
                        {day(2025, 3, 4), HistoryAction::buy, 5, 245.0}};
    o.tickers.push_back(t);
    return o;
}

}  // namespace

TEST(Prompts, Step1GoldenOneTicker) {
    const auto rendered = render_step1(PromptTemplates{}, one_ticker_overview());
    if (std::getenv("BACKTRADE_UPDATE_GOLDEN")) {
        std::ofstream(golden_path("step1_one_ticker.txt"), std::ios::binary) << rendered;
    }
    EXPECT_EQ(rendered, read_golden("step1_one_ticker.txt"));
}

TEST(Prompts, Step2RendersFundamentalsAndAbsence) {
    auto f = fundamentals("AAPL", day(2025, 3, 3));
    f.pe_ratio.reset();
    const AnalysisContext ctx{day(2025, 3, 5), {{"AAPL", f}, {"MSFT", std::nullopt}}};
    const auto text = render_step2(PromptTemplates{}, ctx);
    EXPECT_NE(text.find("P/E ratio: N/A"), std::string::npos);
    EXPECT_NE(text.find("Dividend yield: 0.50%"), std::string::npos);
    EXPECT_NE(text.find("2025-02-13 $0.25"), std::string::npos);
    EXPECT_NE(text.find("## MSFT\nNo fundamental data"), std::string::npos);
}

TEST(Prompts, Step3FeedbackAppended) {
    const PromptTemplates t;
    const auto plain = render_step3(t, std::nullopt);
    const auto revised = render_step3(t, std::string("InsufficientCash: buy orders exceed available cash by $5.00"));
    EXPECT_EQ(revised.substr(0, plain.size()), plain);
    EXPECT_NE(revised.find("rejected"), std::string::npos);
    EXPECT_NE(revised.find("$5.00"), std::string::npos);
}

TEST(Prompts, FillTemplate) {
    EXPECT_EQ(fill_template("a {{x}} b {{y}}", {{"x", "1"}, {"y", "2"}}), "a 1 b 2");
    EXPECT_THROW(fill_template("{{nope}}", {}), ConfigError);
    EXPECT_THROW(fill_template("{{open", {}), ConfigError);
}

TEST(Prompts, LoadFromDirectory) {
    const auto dir = std::filesystem::temp_directory_path() / "backtrade_prompts_v9";
    std::filesystem::create_directories(dir);
    for (const char* name : {"system.txt", "step1.txt", "step2.txt", "step3.txt"}) {
        std::ofstream(dir / name) << name << " {{feedback}}\n";
    }
    const auto t = load_prompt_templates(dir.string());
    EXPECT_EQ(t.version, "backtrade_prompts_v9");
    EXPECT_EQ(t.system, "system.txt {{feedback}}");
    EXPECT_THROW(load_prompt_templates((dir / "missing").string()), ConfigError);
}

TEST(Prompts, ShippedTemplatesMatchDefaults) {
    const auto shipped = load_prompt_templates(std::string(BACKTRADE_SOURCE_DIR) + "/prompts/v1");
    const PromptTemplates builtin;
    EXPECT_EQ(shipped.version, builtin.version);
    EXPECT_EQ(shipped.system, builtin.system);
    EXPECT_EQ(shipped.step1, builtin.step1);
    EXPECT_EQ(shipped.step2, builtin.step2);
    EXPECT_EQ(shipped.step3, builtin.step3);
}
