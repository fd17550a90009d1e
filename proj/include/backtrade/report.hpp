#pragma once

// Run manifests, evaluation matrices (seeds x universe sizes), aggregate and
// metric documents, and the leaderboard / ablation / error-rate tables.

#include <backtrade/agents.hpp>
#include <backtrade/engine.hpp>
#include <backtrade/episode_io.hpp>
#include <backtrade/metrics.hpp>
#include <backtrade/remote_agent.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace backtrade {

inline constexpr std::string_view kToolVersion = "0.1.0";

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex += fmt::format("{:02x}", digest[i]);
    }
    return hex;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string utc_now() {
    const auto now = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
    return format_timestamp(now);
}

struct RunManifest {
    std::string snapshot_path;
    std::string snapshot_digest;
    EpisodeConfig config;  // seed is taken from `seeds`
    std::string agent_spec;
    AgentIdentity agent;
    nlohmann::json agent_settings = nlohmann::json::object();
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::string tool_version{kToolVersion};
    std::string started_at;
    std::string finished_at;

    /// Everything that determines results, excluding wall-clock timestamps.
    nlohmann::json reproducible_part() const {
        auto config_json = io::to_json(config);
        config_json.erase("seed");
        return {{"snapshot_digest", snapshot_digest},
                {"config", config_json},
                {"agent", io::to_json(agent)},
                {"agent_spec", agent_spec},
                {"agent_settings", agent_settings},
                {"seeds", seeds},
                {"tool_version", tool_version}};
    }

    std::string digest() const { return sha256_hex(reproducible_part().dump()); }

    /// Market environment only: snapshot, episode settings and seeds. Runs
    /// from different agents are comparable iff these match.
    std::string environment_digest() const {
        auto part = reproducible_part();
        part.erase("agent");
        part.erase("agent_spec");
        part.erase("agent_settings");
        part.erase("tool_version");
        return sha256_hex(part.dump());
    }

    nlohmann::json to_json() const {
        auto j = reproducible_part();
        j["snapshot_path"] = snapshot_path;
        j["started_at"] = started_at;
        j["finished_at"] = finished_at;
        j["digest"] = digest();
        j["environment_digest"] = environment_digest();
        return j;
    }
};

// ---------------------------------------------------------------------------
// Agent construction from CLI specs.

inline RemoteAgentConfig remote_config_from_json(const nlohmann::json& j) {
    RemoteAgentConfig c;
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", std::string());
    c.temperature = j.value("temperature", c.temperature);
    c.timeout = std::chrono::milliseconds{j.value("timeout_ms", static_cast<long long>(c.timeout.count()))};
    c.max_context_tokens = j.value("max_context_tokens", c.max_context_tokens);
    c.transport_retries = j.value("transport_retries", c.transport_retries);
    c.max_concurrent_requests = j.value("max_concurrent_requests", c.max_concurrent_requests);
    if (j.contains("prompts_dir")) {
        c.templates = load_prompt_templates(j.at("prompts_dir").get<std::string>());
    }
    return c;
}

struct AgentHandle {
    std::unique_ptr<Agent> agent;
    nlohmann::json settings = nlohmann::json::object();
};

/// hold_only | passive | news_driven | fault:schema:<n> | fault:overspend:<n> | remote:<config.json>
inline AgentHandle make_agent(const std::string& spec, const EpisodeConfig& config) {
    if (spec == "hold_only") {
        return {hold_only()};
    }
    if (spec == "passive" || spec == "passive_buy_and_hold") {
        return {passive_buy_and_hold(config), {{"initial_cash", config.initial_cash}}};
    }
    if (spec == "news_driven") {
        return {std::make_unique<NewsDrivenAgent>()};
    }
    if (spec.rfind("fault:", 0) == 0) {
        const auto rest = spec.substr(6);
        const auto colon = rest.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("fault agent spec is fault:<schema|overspend>:<every_nth>");
        }
        const auto kind_name = rest.substr(0, colon);
        if (kind_name != "schema" && kind_name != "overspend") {
            throw ConfigError("unknown fault kind " + kind_name);
        }
        int every = 0;
        try {
            every = std::stoi(rest.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("fault agent every_nth must be an integer");
        }
        return {fault_agent(kind_name == "schema" ? FaultKind::schema : FaultKind::overspend, every),
                {{"kind", kind_name}, {"every_nth", every}}};
    }
    if (spec.rfind("remote:", 0) == 0) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(spec.substr(7)));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("remote agent config: ") + e.what());
        }
        auto settings = j;
        return {remote_agent(remote_config_from_json(j)), settings};
    }
    throw ConfigError("unknown agent '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Evaluation runs.

/// Runs every config as one episode, at most `jobs` at once. Results keep input order.
inline std::vector<EpisodeLog> run_matrix(const MarketSnapshotStore& store, const std::vector<EpisodeConfig>& configs,
                                          const Agent& agent, unsigned jobs = 1) {
    for (const auto& c : configs) {
        validate_config(store, c);
    }
    std::vector<EpisodeLog> logs(configs.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            logs[i] = run_episode(store, configs[i], agent);
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
    std::vector<std::thread> threads;
    for (unsigned t = 1; t < n; ++t) {
        threads.emplace_back(worker);
    }
    worker();
    for (auto& t : threads) {
        t.join();
    }
    return logs;
}

inline std::vector<EpisodeConfig> with_seeds(const EpisodeConfig& base, const std::vector<std::uint64_t>& seeds) {
    std::vector<EpisodeConfig> out;
    for (const auto seed : seeds) {
        out.push_back(base);
        out.back().seed = seed;
    }
    return out;
}

inline std::vector<EpisodeLog> run_seeds(const MarketSnapshotStore& store, const EpisodeConfig& base,
                                         const Agent& agent, const std::vector<std::uint64_t>& seeds,
                                         unsigned jobs = 1) {
    return run_matrix(store, with_seeds(base, seeds), agent, jobs);
}

struct SeedResult {
    std::uint64_t seed = 0;
    EpisodeStatus status = EpisodeStatus::completed;
    std::string abort_reason;
    MetricReport metrics;

    friend bool operator==(const SeedResult&, const SeedResult&) = default;
};

struct Aggregate {
    std::string label;
    std::string manifest_digest;
    std::string environment_digest;
    std::size_t universe_size = 0;
    std::vector<SeedResult> runs;
    double mean_final_return = 0.0;
    double mean_max_drawdown = 0.0;
    std::optional<double> mean_sortino;  // undefined if any run's Sortino is
    std::optional<Dispersion> dispersion;  // over completed runs' final returns

    friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

inline Aggregate aggregate_runs(const std::string& label, const RunManifest& manifest,
                                const std::vector<EpisodeLog>& logs) {
    Aggregate a;
    a.label = label;
    a.manifest_digest = manifest.digest();
    a.environment_digest = manifest.environment_digest();
    a.universe_size = manifest.config.universe.size();
    std::vector<double> fr, mdd, sor;
    bool sortino_defined = true;
    for (const auto& log : logs) {
        SeedResult r;
        r.seed = log.config.seed;
        r.status = log.status;
        r.abort_reason = log.abort_reason;
        r.metrics = compute_metrics(log.valuations());
        if (log.status == EpisodeStatus::completed) {
            fr.push_back(r.metrics.final_return);
            mdd.push_back(r.metrics.max_drawdown);
            if (r.metrics.sortino) {
                sor.push_back(*r.metrics.sortino);
            } else {
                sortino_defined = false;
            }
        }
        a.runs.push_back(std::move(r));
    }
    if (!fr.empty()) {
        a.mean_final_return = mean(fr);
        a.mean_max_drawdown = mean(mdd);
        if (sortino_defined) {
            a.mean_sortino = mean(sor);
        }
    }
    if (fr.size() >= 2) {
        a.dispersion = dispersion(fr);
    }
    return a;
}

inline nlohmann::json aggregate_to_json(const Aggregate& a) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : a.runs) {
        runs.push_back({{"seed", r.seed},
                        {"status", r.status == EpisodeStatus::completed ? "completed" : "aborted"},
                        {"abort_reason", r.abort_reason},
                        {"metrics", io::to_json(r.metrics)}});
    }
    return {{"schema", "backtrade.aggregate"},
            {"schema_version", 1},
            {"label", a.label},
            {"manifest_digest", a.manifest_digest},
            {"environment_digest", a.environment_digest},
            {"universe_size", a.universe_size},
            {"runs", runs},
            {"mean",
             {{"final_return", a.mean_final_return},
              {"max_drawdown", a.mean_max_drawdown},
              {"sortino", io::optional_number(a.mean_sortino)}}},
            {"dispersion", a.dispersion ? io::to_json(*a.dispersion) : nlohmann::json(nullptr)}};
}

inline Aggregate aggregate_from_json(const nlohmann::json& j) {
    if (j.value("schema", std::string()) != "backtrade.aggregate") {
        throw ParseError("not an aggregate document");
    }
    Aggregate a;
    a.label = j.at("label").get<std::string>();
    a.manifest_digest = j.at("manifest_digest").get<std::string>();
    a.environment_digest = j.at("environment_digest").get<std::string>();
    a.universe_size = j.at("universe_size").get<std::size_t>();
    for (const auto& r : j.at("runs")) {
        a.runs.push_back({r.at("seed").get<std::uint64_t>(),
                          r.at("status").get<std::string>() == "completed" ? EpisodeStatus::completed
                                                                           : EpisodeStatus::aborted,
                          r.at("abort_reason").get<std::string>(), io::metrics_from_json(r.at("metrics"))});
    }
    const auto& m = j.at("mean");
    a.mean_final_return = m.at("final_return").get<double>();
    a.mean_max_drawdown = m.at("max_drawdown").get<double>();
    a.mean_sortino = io::read_optional_number(m, "sortino");
    if (!j.at("dispersion").is_null()) {
        a.dispersion = io::dispersion_from_json(j.at("dispersion"));
    }
    return a;
}

inline nlohmann::json metric_report_document(const std::string& manifest_digest, const SeedResult& r) {
    return {{"schema", "backtrade.metric_report"},
            {"schema_version", 1},
            {"manifest_digest", manifest_digest},
            {"seed", r.seed},
            {"status", r.status == EpisodeStatus::completed ? "completed" : "aborted"},
            {"metrics", io::to_json(r.metrics)}};
}

// ---------------------------------------------------------------------------
// Leaderboard.

struct LeaderboardRow {
    int rank = 0;
    std::string label;
    double final_return_pct = 0.0;
    double max_drawdown_pct = 0.0;
    double sortino = 0.0;
    double score = 0.0;
};

struct Leaderboard {
    std::vector<LeaderboardRow> rows;
    std::vector<std::string> warnings;
};

/// Ranks on each aggregate's seed-averaged metrics. All aggregates must come
/// from the same market environment.
inline Leaderboard build_leaderboard(const std::vector<Aggregate>& aggregates) {
    if (aggregates.size() < 2) {
        throw TooFewRows("a leaderboard needs at least two aggregates");
    }
    for (const auto& a : aggregates) {
        if (a.environment_digest != aggregates.front().environment_digest) {
            throw ConfigError("aggregates " + aggregates.front().label + " and " + a.label +
                              " come from different run environments (digest mismatch)");
        }
    }
    std::vector<LeaderboardEntry> entries;
    for (const auto& a : aggregates) {
        entries.push_back({a.label, a.mean_final_return, a.mean_max_drawdown, a.mean_sortino});
    }
    return [&] {
        const Ranking ranking = composite_rank(entries);
        Leaderboard board;
        board.warnings = ranking.warnings;
        for (const auto& r : ranking.rows) {
            board.rows.push_back({r.rank, r.entry.label, r.entry.final_return * 100.0, r.entry.max_drawdown * 100.0,
                                  *r.entry.sortino, r.score});
        }
        return board;
    }();
}

/// Published-style fixture: CSV with header
/// label,final_return_pct,max_drawdown_pct,sortino[,published_rank]
struct FixtureRow {
    LeaderboardEntry entry;
    std::optional<int> published_rank;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    out.push_back(cell);
    return out;
}

inline double parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw ParseError("malformed number for " + what + ": '" + s + "'");
    }
}

inline std::vector<FixtureRow> load_leaderboard_fixture(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("empty leaderboard fixture");
    }
    const auto header = split_csv_line(line);
    if (header.size() < 4 || header[0] != "label" || header[1] != "final_return_pct" ||
        header[2] != "max_drawdown_pct" || header[3] != "sortino") {
        throw ParseError("leaderboard fixture header must be label,final_return_pct,max_drawdown_pct,sortino[,published_rank]");
    }
    std::vector<FixtureRow> rows;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ParseError("leaderboard fixture row has " + std::to_string(cells.size()) + " cells: " + line);
        }
        FixtureRow r;
        r.entry.label = cells[0];
        r.entry.final_return = parse_number(cells[1], "final_return_pct") / 100.0;
        r.entry.max_drawdown = parse_number(cells[2], "max_drawdown_pct") / 100.0;
        if (!cells[3].empty()) {
            r.entry.sortino = parse_number(cells[3], "sortino");
        }
        if (header.size() > 4 && !cells[4].empty()) {
            r.published_rank = static_cast<int>(parse_number(cells[4], "published_rank"));
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Leaderboard leaderboard_from_entries(const std::vector<LeaderboardEntry>& entries) {
    const Ranking ranking = composite_rank(entries);
    Leaderboard board;
    board.warnings = ranking.warnings;
    for (const auto& r : ranking.rows) {
        board.rows.push_back({r.rank, r.entry.label, r.entry.final_return * 100.0, r.entry.max_drawdown * 100.0,
                              *r.entry.sortino, r.score});
    }
    return board;
}

inline std::string format_leaderboard_text(const Leaderboard& board) {
    std::size_t width = 5;
    for (const auto& r : board.rows) {
        width = std::max(width, r.label.size());
    }
    std::string out = fmt::format("{:>4}  {:<{}}  {:>7}  {:>7}  {:>8}  {:>7}\n", "Rank", "Model", width, "RT(%)",
                                  "DDN(%)", "Sortino", "Score");
    for (const auto& r : board.rows) {
        out += fmt::format("{:>4}  {:<{}}  {:>7.1f}  {:>7.1f}  {:>8.4f}  {:>7.3f}\n", r.rank, r.label, width,
                           r.final_return_pct, r.max_drawdown_pct, r.sortino, r.score);
    }
    return out;
}

inline std::string format_leaderboard_csv(const Leaderboard& board) {
    std::string out = "rank,label,final_return_pct,max_drawdown_pct,sortino,score\n";
    for (const auto& r : board.rows) {
        out += fmt::format("{},{},{:.1f},{:.1f},{:.4f},{:.4f}\n", r.rank, r.label, r.final_return_pct,
                           r.max_drawdown_pct, r.sortino, r.score);
    }
    return out;
}

inline nlohmann::json leaderboard_to_json(const Leaderboard& board) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : board.rows) {
        rows.push_back({{"rank", r.rank},
                        {"label", r.label},
                        {"final_return_pct", r.final_return_pct},
                        {"max_drawdown_pct", r.max_drawdown_pct},
                        {"sortino", r.sortino},
                        {"score", r.score}});
    }
    return {{"schema", "backtrade.leaderboard"}, {"schema_version", 1}, {"rows", rows}, {"warnings", board.warnings}};
}

// ---------------------------------------------------------------------------
// Ablation: the same agent with news removed, then news and fundamentals removed.

struct AblationRow {
    std::string variant;
    std::vector<double> final_returns;  // per seed, completed runs only
    double mean_final_return = 0.0;
};

inline const std::vector<std::string>& ablation_variants() {
    static const std::vector<std::string> names{"Full", "w/o News", "w/o News & Fund."};
    return names;
}

inline EpisodeConfig ablated(EpisodeConfig config, std::size_t variant) {
    config.include_news = variant == 0;
    config.include_fundamentals = variant < 2;
    return config;
}

inline std::vector<AblationRow> ablation_rows(const std::vector<std::vector<EpisodeLog>>& per_variant) {
    std::vector<AblationRow> rows;
    for (std::size_t v = 0; v < per_variant.size(); ++v) {
        AblationRow row{ablation_variants().at(v), {}, 0.0};
        for (const auto& log : per_variant[v]) {
            if (log.status == EpisodeStatus::completed) {
                row.final_returns.push_back(final_return(log.valuations()));
            }
        }
        if (!row.final_returns.empty()) {
            row.mean_final_return = mean(row.final_returns);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string format_ablation_text(const std::string& label, const std::vector<AblationRow>& rows) {
    std::string out = fmt::format("{:<18}  {:>7}   ({})\n", "Variant", "CR(%)", label);
    for (const auto& r : rows) {
        out += fmt::format("{:<18}  {:>7.1f}\n", r.variant, r.mean_final_return * 100.0);
    }
    return out;
}

inline std::string format_ablation_csv(const std::string& label, const std::vector<AblationRow>& rows) {
    std::string out = "label,variant,cumulative_return_pct,runs\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{:.1f},{}\n", label, r.variant, r.mean_final_return * 100.0, r.final_returns.size());
    }
    return out;
}

inline nlohmann::json ablation_to_json(const std::string& label, const std::vector<AblationRow>& rows) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : rows) {
        list.push_back({{"variant", r.variant},
                        {"final_returns", r.final_returns},
                        {"mean_final_return", r.mean_final_return}});
    }
    return {{"schema", "backtrade.ablation"}, {"schema_version", 1}, {"label", label}, {"rows", list}};
}

// ---------------------------------------------------------------------------
// Error-rate table, one row per agent label.

struct ErrorTableRow {
    std::string label;
    std::size_t days = 0;
    ErrorRates rates;
};

inline std::vector<ErrorTableRow> error_table(const std::vector<EpisodeLog>& logs) {
    if (logs.empty()) {
        throw EmptyInput("error table needs at least one episode log");
    }
    std::vector<std::string> order;
    std::map<std::string, std::vector<EpisodeLog>> groups;
    for (const auto& log : logs) {
        const auto label = log.agent.label();
        if (!groups.count(label)) {
            order.push_back(label);
        }
        groups[label].push_back(log);
    }
    std::vector<ErrorTableRow> rows;
    for (const auto& label : order) {
        const auto& g = groups[label];
        std::size_t days = 0;
        for (const auto& l : g) {
            days += l.steps.size();
        }
        rows.push_back({label, days, error_rates(g)});
    }
    return rows;
}

inline std::string format_error_table_text(const std::vector<ErrorTableRow>& rows) {
    std::size_t width = 5;
    for (const auto& r : rows) {
        width = std::max(width, r.label.size());
    }
    std::string out = fmt::format("{:<{}}  {:>6}  {:>13}  {:>9}\n", "Agent", width, "Days", "Arithmetic(%)",
                                  "Schema(%)");
    for (const auto& r : rows) {
        out += fmt::format("{:<{}}  {:>6}  {:>13.1f}  {:>9.1f}\n", r.label, width, r.days, r.rates.arithmetic,
                           r.rates.schema);
    }
    return out;
}

inline std::string format_error_table_csv(const std::vector<ErrorTableRow>& rows) {
    std::string out = "label,days,arithmetic_pct,schema_pct\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{:.1f},{:.1f}\n", r.label, r.days, r.rates.arithmetic, r.rates.schema);
    }
    return out;
}

inline nlohmann::json error_table_to_json(const std::vector<ErrorTableRow>& rows) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : rows) {
        list.push_back({{"label", r.label},
                        {"days", r.days},
                        {"arithmetic_pct", r.rates.arithmetic},
                        {"schema_pct", r.rates.schema}});
    }
    return {{"schema", "backtrade.error_rates"}, {"schema_version", 1}, {"rows", list}};
}

// Universe-size dispersion table: mean/std/CV of final returns per size.
inline std::string format_scaling_text(const std::string& label, const std::vector<Aggregate>& aggregates) {
    std::string out = fmt::format("{:>6}  {:>7}  {:>7}  {:>6}   ({})\n", "Stocks", "% Mean", "% Std", "CV", label);
    for (const auto& a : aggregates) {
        if (a.dispersion) {
            const auto& d = *a.dispersion;
            out += fmt::format("{:>6}  {:>7.1f}  {:>7.1f}  {:>6}\n", a.universe_size, d.mean * 100.0, d.std * 100.0,
                               d.cv ? fmt::format("{:.1f}", *d.cv) : std::string("n/a"));
        } else {
            out += fmt::format("{:>6}  {:>7.1f}  {:>7}  {:>6}\n", a.universe_size, a.mean_final_return * 100.0, "n/a",
                               "n/a");
        }
    }
    return out;
}

}  // namespace backtrade
