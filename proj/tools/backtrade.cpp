// backtrade: ingest snapshots, run evaluation matrices, build tables.
//
// Exit codes: 0 success, 2 validation/config error, 3 transport abort,
// 4 internal invariant violation.

#include <backtrade/ingest.hpp>
#include <backtrade/report.hpp>
#include <backtrade/synthetic.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace backtrade;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitTransport = 3;
constexpr int kExitInvariant = 4;

std::string slug(const std::string& text) {
    std::string out;
    for (char c : text) {
        out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_';
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = std::string(detail::trim(item));
        if (!t.empty()) {
            out.push_back(t);
        }
    }
    return out;
}

// Flags shared by `run` and `ablate`.
struct RunFlags {
    std::string snapshot;
    std::string agent = "hold_only";
    std::string from;
    std::string to;
    double cash = kDefaultInitialCash;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<std::size_t> universe_sizes;
    bool no_news = false;
    bool no_fundamentals = false;
    double fee_bps = 0.0;
    int max_revisions = kDefaultMaxRevisions;
    std::string out_dir = "runs";
    unsigned jobs = 1;
    std::string label;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool sweep) {
    cmd->add_option("--snapshot", f.snapshot, "Snapshot file (NDJSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--agent", f.agent,
                    "hold_only | passive | news_driven | fault:schema:N | fault:overspend:N | remote:CONFIG.json")
        ->capture_default_str();
    cmd->add_option("--from", f.from, "First trading day (default: first day in the snapshot)");
    cmd->add_option("--to", f.to, "Last trading day (default: last day in the snapshot)");
    cmd->add_option("--cash", f.cash, "Initial cash")->capture_default_str();
    cmd->add_option("--seeds", f.seeds, "Seeds, comma separated")->delimiter(',')->capture_default_str();
    if (sweep) {
        cmd->add_option("--universe-size", f.universe_sizes,
                        "Use the first N snapshot tickers; a comma list runs a sweep")
            ->delimiter(',');
    } else {
        cmd->add_option("--universe-size", f.universe_sizes, "Use the first N snapshot tickers")->expected(1);
    }
    cmd->add_flag("--no-news", f.no_news, "Hide news from the agent");
    cmd->add_flag("--no-fundamentals", f.no_fundamentals, "Hide fundamentals from the agent");
    cmd->add_option("--fee-bps", f.fee_bps, "Transaction fee in basis points")->capture_default_str();
    cmd->add_option("--max-revisions", f.max_revisions, "Revision attempts per day")->capture_default_str();
    cmd->add_option("--out-dir", f.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--jobs", f.jobs, "Episodes run concurrently")->capture_default_str();
    cmd->add_option("--label", f.label, "Display label (default: agent identity)");
}

EpisodeConfig base_config(const MarketSnapshotStore& store, const RunFlags& f, std::size_t universe_size) {
    EpisodeConfig c;
    const auto& all = store.universe();
    if (universe_size == 0 || universe_size > all.size()) {
        if (universe_size > all.size()) {
            throw ConfigError(fmt::format("--universe-size {} exceeds the snapshot's {} tickers", universe_size,
                                          all.size()));
        }
        universe_size = all.size();
    }
    c.universe.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(universe_size));
    const auto days = store.calendar().days();
    c.start_date = f.from.empty() ? days.front() : parse_date(f.from);
    c.end_date = f.to.empty() ? days.back() : parse_date(f.to);
    c.initial_cash = f.cash;
    c.max_revisions = f.max_revisions;
    c.include_news = !f.no_news;
    c.include_fundamentals = !f.no_fundamentals;
    c.fee_bps = f.fee_bps;
    if (f.seeds.empty()) {
        throw ConfigError("--seeds needs at least one seed");
    }
    c.seed = f.seeds.front();
    return c;
}

struct Prepared {
    RunManifest manifest;
    AgentHandle agent;
    std::string label;
};

Prepared prepare(const MarketSnapshotStore& store, const std::string& snapshot_digest, const RunFlags& f,
                 const EpisodeConfig& config) {
    Prepared p;
    p.agent = make_agent(f.agent, config);
    p.manifest.snapshot_path = f.snapshot;
    p.manifest.snapshot_digest = snapshot_digest;
    p.manifest.config = config;
    p.manifest.agent_spec = f.agent;
    p.manifest.agent = p.agent.agent->identity();
    p.manifest.agent_settings = p.agent.settings;
    p.manifest.seeds = f.seeds;
    p.label = f.label.empty() ? p.manifest.agent.label() : f.label;
    validate_config(store, config);
    return p;
}

int exit_for(const std::vector<EpisodeLog>& logs) {
    for (const auto& l : logs) {
        if (l.status == EpisodeStatus::aborted) {
            return kExitTransport;
        }
    }
    return kExitOk;
}

void write_logs(const fs::path& dir, const RunManifest& manifest, const std::vector<EpisodeLog>& logs,
                const Aggregate& aggregate) {
    const auto digest = manifest.digest();
    for (std::size_t i = 0; i < logs.size(); ++i) {
        std::ostringstream out;
        write_episode_log(out, logs[i], digest);
        write_text(dir / fmt::format("seed{}.episode.ndjson", logs[i].config.seed), out.str());
        write_json(dir / fmt::format("seed{}.metrics.json", logs[i].config.seed),
                   metric_report_document(digest, aggregate.runs[i]));
    }
}

// ---------------------------------------------------------------------------

int cmd_synth(const SyntheticSpec& spec, const std::string& out) {
    const auto store = make_synthetic_store(spec);
    std::ostringstream text;
    write_store(text, store);
    write_text(out, text.str());
    std::cout << fmt::format("wrote {} ({} tickers x {} trading days, {} to {})\n", out, store.universe().size(),
                             store.calendar().size(), format_date(store.calendar().days().front()),
                             format_date(store.calendar().days().back()));
    return kExitOk;
}

struct IngestFlags {
    std::vector<std::string> prices, fundamentals, news;
    std::string universe, from, to, out;
    std::string open_time = "09:30";
    std::string timezone = "America/New_York";
};

int cmd_ingest(const IngestFlags& f) {
    IngestOptions options;
    options.universe = split_list(f.universe);
    options.from = parse_date(f.from);
    options.to = parse_date(f.to);
    options.market_open_local_time = f.open_time;
    options.timezone = f.timezone;
    SnapshotIngestor ingestor(options);
    const auto open = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw ConfigError("cannot read " + path);
        }
        return in;
    };
    for (const auto& p : f.prices) {
        auto in = open(p);
        ingestor.add_prices_csv(in, p);
    }
    for (const auto& p : f.fundamentals) {
        auto in = open(p);
        ingestor.add_fundamentals_csv(in, p);
    }
    for (const auto& p : f.news) {
        auto in = open(p);
        ingestor.add_news_json(in, p);
    }
    const auto result = ingestor.finish();
    std::cout << result.completeness_report;
    for (const auto& w : result.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    for (const auto& e : result.errors) {
        std::cerr << "error: " << e << '\n';
    }
    if (!result.ok()) {
        return kExitConfig;
    }
    std::ostringstream text;
    write_store(text, *result.store);
    write_text(f.out, text.str());
    std::cout << "wrote " << f.out << '\n';
    return kExitOk;
}

int cmd_run(const RunFlags& f) {
    const auto bytes = read_file(f.snapshot);
    std::istringstream in(bytes);
    const auto store = load_store(in);
    const auto snapshot_digest = sha256_hex(bytes);
    auto sizes = f.universe_sizes;
    if (sizes.empty()) {
        sizes.push_back(0);
    }

    std::vector<Prepared> prepared;
    std::vector<EpisodeConfig> matrix;
    for (const auto n : sizes) {
        const auto config = base_config(store, f, n);
        prepared.push_back(prepare(store, snapshot_digest, f, config));
        prepared.back().manifest.started_at = utc_now();
        for (const auto& c : with_seeds(config, f.seeds)) {
            matrix.push_back(c);
        }
    }
    const fs::path root(f.out_dir);
    const auto dir_for = [&](const Prepared& p) {
        return root / slug(p.label) / fmt::format("u{}", p.manifest.config.universe.size());
    };
    for (const auto& p : prepared) {
        write_json(dir_for(p) / "manifest.json", p.manifest.to_json());
    }

    const auto logs = run_matrix(store, matrix, *prepared.front().agent.agent, f.jobs);

    std::vector<Aggregate> aggregates;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
        auto& p = prepared[i];
        p.manifest.finished_at = utc_now();
        const std::vector<EpisodeLog> mine(logs.begin() + static_cast<std::ptrdiff_t>(i * f.seeds.size()),
                                           logs.begin() + static_cast<std::ptrdiff_t>((i + 1) * f.seeds.size()));
        auto aggregate = aggregate_runs(p.label, p.manifest, mine);
        const auto dir = dir_for(p);
        write_json(dir / "manifest.json", p.manifest.to_json());
        write_logs(dir, p.manifest, mine, aggregate);
        write_json(dir / "aggregate.json", aggregate_to_json(aggregate));
        for (const auto& r : aggregate.runs) {
            std::cout << fmt::format("{} u={} seed={} {} RT={:.1f}% DDN={:.1f}% Sortino={}\n", p.label,
                                     aggregate.universe_size, r.seed,
                                     r.status == EpisodeStatus::completed ? "completed" : "ABORTED",
                                     r.metrics.final_return * 100.0, r.metrics.max_drawdown * 100.0,
                                     r.metrics.sortino ? fmt::format("{:.4f}", *r.metrics.sortino) : "undefined");
            if (r.status == EpisodeStatus::aborted) {
                std::cerr << "transport abort (seed " << r.seed << "): " << r.abort_reason << '\n';
            }
        }
        std::cout << "aggregate: " << (dir / "aggregate.json").string() << '\n';
        aggregates.push_back(std::move(aggregate));
    }
    if (aggregates.size() > 1) {
        const auto text = format_scaling_text(prepared.front().label, aggregates);
        std::cout << '\n' << text;
        write_text(root / slug(prepared.front().label) / "scaling.txt", text);
    }
    return exit_for(logs);
}

int cmd_ablate(const RunFlags& f) {
    const auto bytes = read_file(f.snapshot);
    std::istringstream in(bytes);
    const auto store = load_store(in);
    const auto snapshot_digest = sha256_hex(bytes);
    const auto base = base_config(store, f, f.universe_sizes.empty() ? 0 : f.universe_sizes.front());

    std::vector<Prepared> prepared;
    std::vector<EpisodeConfig> matrix;
    for (std::size_t v = 0; v < ablation_variants().size(); ++v) {
        const auto config = ablated(base, v);
        prepared.push_back(prepare(store, snapshot_digest, f, config));
        for (const auto& c : with_seeds(config, f.seeds)) {
            matrix.push_back(c);
        }
    }
    const auto logs = run_matrix(store, matrix, *prepared.front().agent.agent, f.jobs);
    const auto label = prepared.front().label;
    const fs::path root = fs::path(f.out_dir) / slug(label) / "ablation";
    std::vector<std::vector<EpisodeLog>> per_variant;
    for (std::size_t v = 0; v < prepared.size(); ++v) {
        std::vector<EpisodeLog> mine(logs.begin() + static_cast<std::ptrdiff_t>(v * f.seeds.size()),
                                     logs.begin() + static_cast<std::ptrdiff_t>((v + 1) * f.seeds.size()));
        auto& p = prepared[v];
        p.manifest.finished_at = utc_now();
        const auto aggregate = aggregate_runs(label, p.manifest, mine);
        const auto dir = root / slug(ablation_variants()[v]);
        write_json(dir / "manifest.json", p.manifest.to_json());
        write_logs(dir, p.manifest, mine, aggregate);
        write_json(dir / "aggregate.json", aggregate_to_json(aggregate));
        per_variant.push_back(std::move(mine));
    }
    const auto rows = ablation_rows(per_variant);
    const auto text = format_ablation_text(label, rows);
    std::cout << text;
    write_text(root / "ablation.txt", text);
    write_text(root / "ablation.csv", format_ablation_csv(label, rows));
    write_json(root / "ablation.json", ablation_to_json(label, rows));
    return exit_for(logs);
}

int cmd_leaderboard(const std::vector<std::string>& files, const std::string& fixture, const std::string& out_dir) {
    Leaderboard board;
    if (!fixture.empty()) {
        std::ifstream in(fixture);
        if (!in) {
            throw ConfigError("cannot read " + fixture);
        }
        std::vector<LeaderboardEntry> entries;
        for (const auto& r : load_leaderboard_fixture(in)) {
            entries.push_back(r.entry);
        }
        board = leaderboard_from_entries(entries);
    } else {
        std::vector<Aggregate> aggregates;
        for (const auto& path : files) {
            try {
                aggregates.push_back(aggregate_from_json(nlohmann::json::parse(read_file(path))));
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(path + ": " + e.what());
            }
        }
        board = build_leaderboard(aggregates);
    }
    for (const auto& w : board.warnings) {
        std::cout << "warning: " << w << '\n';
    }
    std::cout << format_leaderboard_text(board);
    if (!out_dir.empty()) {
        write_text(fs::path(out_dir) / "leaderboard.csv", format_leaderboard_csv(board));
        write_json(fs::path(out_dir) / "leaderboard.json", leaderboard_to_json(board));
    }
    return kExitOk;
}

int cmd_errors(const std::vector<std::string>& files, const std::string& out_dir) {
    std::vector<EpisodeLog> logs;
    for (const auto& path : files) {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("cannot read " + path);
        }
        logs.push_back(read_episode_log(in).log);
    }
    const auto rows = error_table(logs);
    std::cout << format_error_table_text(rows);
    if (!out_dir.empty()) {
        write_text(fs::path(out_dir) / "errors.csv", format_error_table_csv(rows));
        write_json(fs::path(out_dir) / "errors.json", error_table_to_json(rows));
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"backtrade: point-in-time back-trading simulator and agent evaluation harness"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    SyntheticSpec synth;
    std::string synth_out;
    auto* s = app.add_subcommand("synth", "Write a deterministic synthetic snapshot");
    s->add_option("--out", synth_out, "Output snapshot path")->required();
    s->add_option("--tickers", synth.tickers, "Number of tickers")->capture_default_str();
    s->add_option("--days", synth.trading_days, "Number of trading days")->capture_default_str();
    s->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();

    IngestFlags ingest;
    auto* i = app.add_subcommand("ingest", "Normalize vendor exports into a snapshot");
    i->add_option("--prices", ingest.prices, "Prices CSV (date,ticker,open)")->required()->check(CLI::ExistingFile);
    i->add_option("--fundamentals", ingest.fundamentals, "Fundamentals CSV")->check(CLI::ExistingFile);
    i->add_option("--news", ingest.news, "News JSON array")->check(CLI::ExistingFile);
    i->add_option("--universe", ingest.universe, "Tickers, comma separated")->required();
    i->add_option("--from", ingest.from, "First date")->required();
    i->add_option("--to", ingest.to, "Last date")->required();
    i->add_option("--open-time", ingest.open_time, "Exchange-local market open")->capture_default_str();
    i->add_option("--timezone", ingest.timezone, "Exchange timezone")->capture_default_str();
    i->add_option("--out", ingest.out, "Output snapshot path")->required();

    RunFlags run;
    add_run_flags(app.add_subcommand("run", "Run an agent over seeds (and universe sizes)"), run, true);
    RunFlags ablate;
    add_run_flags(app.add_subcommand("ablate", "Run the Full / w/o News / w/o News & Fund. variants"), ablate,
                  false);

    std::vector<std::string> board_files;
    std::string fixture, board_out;
    auto* l = app.add_subcommand("leaderboard", "Rank aggregates by composite z-score");
    l->add_option("aggregates", board_files, "aggregate.json files")->check(CLI::ExistingFile);
    l->add_option("--fixture", fixture, "Published-style CSV fixture instead of aggregates")
        ->check(CLI::ExistingFile);
    l->add_option("--out-dir", board_out, "Write leaderboard.csv and leaderboard.json here");

    std::vector<std::string> log_files;
    std::string errors_out;
    auto* e = app.add_subcommand("errors", "Error-rate table from episode logs");
    e->add_option("logs", log_files, "Episode log files")->required()->check(CLI::ExistingFile);
    e->add_option("--out-dir", errors_out, "Write errors.csv and errors.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (s->parsed()) {
            return cmd_synth(synth, synth_out);
        }
        if (i->parsed()) {
            return cmd_ingest(ingest);
        }
        if (app.got_subcommand("run")) {
            return cmd_run(run);
        }
        if (app.got_subcommand("ablate")) {
            return cmd_ablate(ablate);
        }
        if (l->parsed()) {
            return cmd_leaderboard(board_files, fixture, board_out);
        }
        return cmd_errors(log_files, errors_out);
    } catch (const AgentTransportError& err) {
        std::cerr << "transport error: " << err.what() << '\n';
        return kExitTransport;
    } catch (const InfeasibleExecution& err) {
        std::cerr << "invariant violation: " << err.what() << '\n';
        return kExitInvariant;
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& err) {
        std::cerr << "internal error: " << err.what() << '\n';
        return kExitInvariant;
    }
}
