#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "domino/chain_dsl.hpp"
#include "domino/ingest.hpp"
#include "domino/pipeline.hpp"
#include "domino/stats.hpp"
#include "domino/synth.hpp"

namespace domino::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

/// Bad flag combinations and values that CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unreadable input or unwritable output.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// SpecError rethrown with the file it came from.
struct LocatedSpecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string out;
    bool quiet = false;
};

struct DetectArgs {
    Common common;
    std::string trace_dir, ran, packets, app, meta;
    std::string chains, config;
    double window = 5.0;
    double step = 0.5;
    unsigned threads = 0;  // 0: one per hardware thread
    bool strict = false;
    std::string mode = "dedup";
    std::vector<std::string> priority;
    std::int64_t off_ran = 0, off_packets = 0, off_app_local = 0, off_app_remote = 0;
};

struct SynthArgs {
    Common common;
    std::string scenario;
    std::string injection;
    std::optional<std::uint64_t> seed;
    std::optional<double> noise_ms;
    std::optional<double> duration_s;
};

struct CompileArgs {
    Common common;
    std::string chains;
};

struct StatsArgs {
    Common common;
    std::string matches;
    std::string mode = "dedup";
    std::vector<std::string> priority;
};

std::string read_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read {} '{}'", what, path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Collects output files and writes each one once.
class OutputDir {
public:
    explicit OutputDir(std::string path) : path_(std::move(path)) {
        std::error_code ec;
        fs::create_directories(path_, ec);
        if (ec || !fs::is_directory(path_))
            throw IoError(fmt::format("cannot create output directory '{}'", path_));
    }

    template <typename F>
    void write(const std::string& name, F&& body) {
        const auto p = fs::path(path_) / name;
        std::ofstream f(p, std::ios::binary);
        if (!f) throw IoError(fmt::format("cannot write '{}'", p.string()));
        body(f);
        f.flush();
        if (!f) throw IoError(fmt::format("cannot write '{}'", p.string()));
        files_.push_back(name);
    }

    void write_text(const std::string& name, const std::string& text) {
        write(name, [&](std::ostream& o) { o << text; });
    }

    const std::string& path() const { return path_; }
    const std::vector<std::string>& files() const { return files_; }

private:
    std::string path_;
    std::vector<std::string> files_;
};

ordered_json path_or_null(const std::string& p) { return p.empty() ? ordered_json(nullptr) : ordered_json(p); }

void write_manifest(OutputDir& dir, ordered_json manifest) {
    auto outputs = dir.files();
    outputs.push_back("manifest.json");
    std::sort(outputs.begin(), outputs.end());
    manifest["outputs"] = outputs;
    dir.write("manifest.json", [&](std::ostream& o) { o << manifest.dump(2) << "\n"; });
}

RatioMode parse_mode(const std::string& s) {
    auto m = ratio_mode_from_string(s);
    if (!m) throw UsageError(fmt::format("unknown mode '{}' (expected dedup or per-chain)", s));
    return *m;
}

std::optional<DetectionPlan> load_plan(const std::string& path) {
    if (path.empty()) return std::nullopt;
    const auto text = read_file(path, "chain spec");
    try {
        return compile_source(text);
    } catch (const SpecError& e) {
        throw LocatedSpecError(fmt::format("{}:{}:{}: {}", path, e.loc().line, e.loc().column, e.message()));
    }
}

ordered_json stream_json(const StreamReport& r) {
    ordered_json j{{"read", r.read}, {"kept", r.kept}, {"dropped", r.dropped}, {"malformed", r.malformed}};
    j["first_us"] = r.first ? ordered_json(r.first->micros) : ordered_json(nullptr);
    j["last_us"] = r.last ? ordered_json(r.last->micros) : ordered_json(nullptr);
    return j;
}

ordered_json ingest_json(const IngestReport& r) {
    return ordered_json{{"ran", stream_json(r.ran)},
                        {"packets", stream_json(r.packets)},
                        {"app", stream_json(r.app)},
                        {"overlap_s", r.overlap_s},
                        {"overlap_fraction", r.overlap_fraction},
                        {"warnings", r.warnings}};
}

void write_stats(OutputDir& dir, const StatsBundle& s) {
    dir.write("stats.txt", [&](std::ostream& o) { export_text(o, s); });
    const auto all = s.all_cells();
    dir.write("stats.csv", [&](std::ostream& o) { export_csv(o, all); });
    dir.write("stats.jsonl", [&](std::ostream& o) { export_jsonl(o, all); });
}

int cmd_detect(const DetectArgs& a, std::ostream& out, std::ostream& err) {
    const bool explicit_files = !a.ran.empty() || !a.packets.empty() || !a.app.empty();
    if (!a.trace_dir.empty() && explicit_files)
        throw UsageError("--trace cannot be combined with --ran/--packets/--app");
    if (a.trace_dir.empty() && (a.ran.empty() || a.packets.empty() || a.app.empty()))
        throw UsageError("give --trace DIR or all of --ran, --packets and --app");
    if (!(a.window > 0) || !(a.step > 0)) throw UsageError("--window and --step must be positive");
    const auto mode = parse_mode(a.mode);

    DetectOptions opts;
    opts.window_s = a.window;
    opts.step_s = a.step;
    opts.threads = a.threads ? a.threads : std::max(1u, std::thread::hardware_concurrency());
    opts.strict_order = a.strict;
    opts.plan = load_plan(a.chains);
    if (!a.config.empty()) {
        if (!fs::exists(a.config)) throw IoError(fmt::format("cannot read config file '{}'", a.config));
        try {
            opts.cfg = DetectorConfig::load(a.config);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}: {}", a.config, e.what()), e.line());
        }
    }

    const ClockOffsets offsets{{ClockStream::RAN, a.off_ran},
                               {ClockStream::PACKETS, a.off_packets},
                               {ClockStream::APP_LOCAL, a.off_app_local},
                               {ClockStream::APP_REMOTE, a.off_app_remote}};
    AssembleResult loaded;
    if (!a.trace_dir.empty()) {
        loaded = load_trace(a.trace_dir, offsets);
    } else {
        IngestReport report;
        auto ran = load_ran(a.ran, offsets, report);
        auto packets = load_packets(a.packets, offsets, report);
        auto app = load_app(a.app, offsets, report);
        TraceMeta meta;
        if (!a.meta.empty()) {
            if (!fs::exists(a.meta)) throw IoError(fmt::format("cannot read input file '{}'", a.meta));
            meta = load_meta(a.meta);
        }
        loaded = assemble(std::move(ran), std::move(packets), std::move(app), std::move(meta), std::move(report));
    }
    if (loaded.trace.empty()) throw IngestError("trace is empty", loaded.report);
    if (!a.common.quiet)
        for (const auto& w : loaded.report.warnings) err << "warning: " << w << "\n";

    const auto t0 = std::chrono::steady_clock::now();
    const auto run = run_detection(loaded.trace, opts);
    const auto stats = compute_stats(run, mode, a.priority.empty() ? default_priority() : a.priority);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!a.common.quiet)
        for (const auto& w : run.warnings) err << "warning: " << w << "\n";

    OutputDir dir(a.common.out);
    dir.write("features.csv", [&](std::ostream& o) { write_features_csv(o, run); });
    dir.write("matches.jsonl", [&](std::ostream& o) { write_match_file(o, run); });
    write_stats(dir, stats);
    dir.write("ingest.json", [&](std::ostream& o) { o << ingest_json(loaded.report).dump(2) << "\n"; });

    ordered_json m{{"command", "detect"}, {"version", kVersion}};
    m["inputs"] = ordered_json{{"trace", path_or_null(a.trace_dir)},
                               {"ran", path_or_null(a.ran)},
                               {"packets", path_or_null(a.packets)},
                               {"app", path_or_null(a.app)},
                               {"meta", path_or_null(a.meta)}};
    m["config"] = path_or_null(a.config);
    m["chains"] = path_or_null(a.chains);
    m["window_s"] = a.window;
    m["step_s"] = a.step;
    m["threads"] = opts.threads;
    m["strict"] = a.strict;
    m["mode"] = to_string(mode);
    m["priority"] = a.priority.empty() ? default_priority() : a.priority;
    m["clock_offsets_us"] = ordered_json{{"ran", a.off_ran},
                                         {"packets", a.off_packets},
                                         {"app_local", a.off_app_local},
                                         {"app_remote", a.off_app_remote}};
    m["out"] = a.common.out;
    m["seed"] = nullptr;
    write_manifest(dir, std::move(m));

    if (!a.common.quiet)
        out << fmt::format("{} windows, {} chain matches in {:.2f} s; wrote {}\n", run.windows.size(),
                           run.matches().size(), elapsed, dir.path());
    return EXIT_OK;
}

Scenario build_scenario(const SynthArgs& a, std::size_t& dropped) {
    if (!a.scenario.empty() && !a.injection.empty())
        throw UsageError("--scenario cannot be combined with --injection");
    Scenario s;
    if (!a.scenario.empty()) {
        const auto text = read_file(a.scenario, "scenario file");
        try {
            s = Scenario::parse(text);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}: {}", a.scenario, e.what()), e.line());
        }
    } else if (!a.injection.empty()) {
        const auto colon = a.injection.find(':');
        const auto kind = inject_kind_from_string(a.injection.substr(0, colon));
        if (!kind) throw UsageError(fmt::format("unknown injection kind in '{}'", a.injection));
        if (*kind == InjectKind::NONE) {
            if (colon != std::string::npos) throw UsageError("injection 'none' takes no routing");
            s.name = "none";
        } else {
            if (colon == std::string::npos) throw UsageError("--injection expects KIND:ROUTING");
            const auto routing = routing_from_string(a.injection.substr(colon + 1));
            if (!routing) throw UsageError(fmt::format("unknown routing in '{}'", a.injection));
            s = injection_scenario(*kind, *routing, 1);
        }
    }
    if (a.seed) s.seed = *a.seed;
    if (a.noise_ms) s.delay_noise_ms = *a.noise_ms;
    if (a.duration_s) {
        // A shorter run keeps only the injected events that still fit.
        s.duration_s = *a.duration_s;
        const auto before = s.events.size();
        std::erase_if(s.events, [&](const InjectedEvent& e) {
            return e.start_s + e.active_s(s.cell) > s.duration_s + 1e-9;
        });
        dropped = before - s.events.size();
    }
    s.validate();
    return s;
}

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
    std::size_t dropped = 0;
    const auto scenario = build_scenario(a, dropped);
    if (dropped && !a.common.quiet)
        err << fmt::format("warning: dropped {} injected event(s) past {} s\n", dropped, scenario.duration_s);
    const auto result = generate(scenario);

    OutputDir dir(a.common.out);
    dir.write(TraceFiles::ran, [&](std::ostream& o) { write_ran(o, result.trace.ran); });
    dir.write(TraceFiles::packets, [&](std::ostream& o) { write_packets(o, result.trace.packets); });
    dir.write(TraceFiles::app, [&](std::ostream& o) { write_app(o, result.trace.app); });
    dir.write(TraceFiles::meta, [&](std::ostream& o) { write_meta(o, result.trace.meta); });
    dir.write("ground_truth.json", [&](std::ostream& o) { result.truth.write_json(o); });
    dir.write_text("scenario.txt", scenario.to_text());

    ordered_json m{{"command", "synth"}, {"version", kVersion}};
    m["inputs"] = ordered_json{{"scenario", path_or_null(a.scenario)}, {"injection", path_or_null(a.injection)}};
    m["duration_s"] = scenario.duration_s;
    m["noise_ms"] = scenario.delay_noise_ms;
    m["out"] = a.common.out;
    m["seed"] = scenario.seed;
    write_manifest(dir, std::move(m));

    if (!a.common.quiet)
        out << fmt::format("{}: {} ran, {} packet, {} app records, {} injected events; wrote {}\n", scenario.name,
                           result.trace.ran.size(), result.trace.packets.size(), result.trace.app.size(),
                           result.truth.events.size(), dir.path());
    return EXIT_OK;
}

ordered_json selector_json(const Selector& s) {
    switch (s.kind) {
        case Selector::Kind::SIDE: return to_string(s.side);
        case Selector::Kind::DIR: return to_string(s.dir);
        case Selector::Kind::NONE: break;
    }
    return nullptr;
}

int cmd_compile(const CompileArgs& a, std::ostream& out, std::ostream&) {
    // Without a file the built-ins are compiled as source, so the emitted
    // text covers all of them.
    auto plan = a.chains.empty() ? compile_source(builtin_spec_source()) : *load_plan(a.chains);

    ordered_json slots = ordered_json::array();
    for (std::size_t i = 0; i < plan.layout().size(); ++i) {
        const auto& s = plan.layout()[i];
        slots.push_back({{"index", i}, {"label", s.label()}, {"event", s.event}, {"selector", selector_json(s.selector)}});
    }
    ordered_json events = ordered_json::array();
    for (const auto& e : plan.events())
        events.push_back({{"name", e.def.name},
                          {"stream", e.def.stream},
                          {"first_slot", e.first_slot},
                          {"slot_count", e.slot_count},
                          {"from_source", e.from_source}});
    ordered_json paths = ordered_json::array();
    for (std::size_t i = 0; i < plan.chains().size(); ++i) {
        const auto& c = plan.chains()[i];
        paths.push_back({{"index", i}, {"cause", c.cause()}, {"consequence", c.consequence()}, {"nodes", c.nodes}});
    }
    const ordered_json summary{{"slot_count", plan.slot_count()}, {"path_count", plan.chains().size()},
                               {"slots", slots},                  {"events", events},
                               {"paths", paths}};

    OutputDir dir(a.common.out);
    dir.write_text("plan.chains", emit_pseudocode(plan));
    dir.write("plan.json", [&](std::ostream& o) { o << summary.dump(2) << "\n"; });
    ordered_json m{{"command", "compile"}, {"version", kVersion}};
    m["chains"] = path_or_null(a.chains);
    m["out"] = a.common.out;
    m["seed"] = nullptr;
    write_manifest(dir, std::move(m));

    if (!a.common.quiet) out << fmt::format("{} slots, {} paths\n", plan.slot_count(), plan.chains().size());
    return EXIT_OK;
}

int cmd_stats(const StatsArgs& a, std::ostream& out, std::ostream&) {
    const auto mode = parse_mode(a.mode);
    std::ifstream in(a.matches, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read match file '{}'", a.matches));
    DetectionRun run;
    try {
        run = read_match_file(in);
    } catch (const std::runtime_error& e) {
        throw IoError(fmt::format("{}: {}", a.matches, e.what()));
    }
    const auto stats = compute_stats(run, mode, a.priority.empty() ? default_priority() : a.priority);

    OutputDir dir(a.common.out);
    write_stats(dir, stats);
    ordered_json m{{"command", "stats"}, {"version", kVersion}};
    m["inputs"] = ordered_json{{"matches", a.matches}};
    m["mode"] = to_string(mode);
    m["priority"] = a.priority.empty() ? default_priority() : a.priority;
    m["out"] = a.common.out;
    m["seed"] = nullptr;
    write_manifest(dir, std::move(m));

    if (!a.common.quiet)
        out << fmt::format("{} windows, {} consequence occurrences; wrote {}\n", run.windows.size(),
                           run.occurrences().size(), dir.path());
    return EXIT_OK;
}

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-o,--out", c.out, "Output directory")->required();
    cmd->add_flag("-q,--quiet", c.quiet, "Print nothing but errors");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cross-layer root-cause analysis for 5G video calls", "domino"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    DetectArgs d;
    auto* detect = app.add_subcommand("detect", "Detect events and causal chains in a trace");
    add_common(detect, d.common);
    detect->add_option("--trace", d.trace_dir, "Directory with ran.csv, packets.csv, app.csv [meta.txt]");
    detect->add_option("--ran", d.ran, "RAN record file");
    detect->add_option("--packets", d.packets, "Packet record file");
    detect->add_option("--app", d.app, "Application record file");
    detect->add_option("--meta", d.meta, "Call metadata file");
    detect->add_option("--chains", d.chains, "Chain spec extending the built-ins");
    detect->add_option("--config", d.config, "Detector thresholds (key = value)");
    detect->add_option("--window", d.window, "Window length in seconds")->capture_default_str();
    detect->add_option("--step", d.step, "Window step in seconds")->capture_default_str();
    detect->add_option("--threads", d.threads, "Worker threads (0 = all cores)")->capture_default_str();
    detect->add_flag("--strict", d.strict, "Require cause-to-consequence onset order");
    detect->add_option("--mode", d.mode, "Chain ratio mode: dedup or per-chain")->capture_default_str();
    detect->add_option("--priority", d.priority, "Dedup cause priority, highest first")->delimiter(',');
    detect->add_option("--ran-offset-us", d.off_ran, "Clock correction for RAN records");
    detect->add_option("--packets-offset-us", d.off_packets, "Clock correction for packet records");
    detect->add_option("--app-local-offset-us", d.off_app_local, "Clock correction for the local app log");
    detect->add_option("--app-remote-offset-us", d.off_app_remote, "Clock correction for the remote app log");

    SynthArgs s;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic trace with ground truth");
    add_common(synth, s.common);
    synth->add_option("--scenario", s.scenario, "Scenario file (key = value)");
    synth->add_option("--injection", s.injection, "Stock scenario KIND:ROUTING, or none");
    synth->add_option("--seed", s.seed, "Override the scenario seed");
    synth->add_option("--noise-ms", s.noise_ms, "Override the wired delay noise (ms, std dev)");
    synth->add_option("--duration", s.duration_s, "Override the duration (s)");

    CompileArgs c;
    auto* compile = app.add_subcommand("compile", "Compile a chain spec and emit its plan");
    add_common(compile, c.common);
    compile->add_option("--chains", c.chains, "Chain spec; the built-ins when omitted");

    StatsArgs st;
    auto* stats = app.add_subcommand("stats", "Recompute reports from a saved match file");
    add_common(stats, st.common);
    stats->add_option("--matches", st.matches, "matches.jsonl written by detect")->required();
    stats->add_option("--mode", st.mode, "Chain ratio mode: dedup or per-chain")->capture_default_str();
    stats->add_option("--priority", st.priority, "Dedup cause priority, highest first")->delimiter(',');

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return EXIT_OK;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return EXIT_OK;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return EXIT_OK;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return EXIT_INPUT;
    }

    try {
        if (*detect) return cmd_detect(d, out, err);
        if (*synth) return cmd_synth(s, out, err);
        if (*compile) return cmd_compile(c, out, err);
        if (*stats) return cmd_stats(st, out, err);
        return EXIT_INPUT;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return EXIT_INPUT;
    } catch (const LocatedSpecError& e) {
        err << "spec error: " << e.what() << "\n";
        return EXIT_SPEC;
    } catch (const GraphError& e) {
        err << "spec error: " << e.what() << "\n";
        return EXIT_SPEC;
    } catch (const IngestError& e) {
        err << "input error: " << e.what() << "\n";
        return EXIT_INPUT;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return EXIT_INPUT;
    } catch (const IoError& e) {
        err << "input error: " << e.what() << "\n";
        return EXIT_INPUT;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return EXIT_INTERNAL;
    }
}

}  // namespace domino::cli
