#include "domino/pipeline.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

namespace domino {

using nlohmann::ordered_json;

double DetectionRun::span_s() const {
    if (windows.empty()) return 0;
    return static_cast<double>(windows.back().window.end().micros - windows.front().window.start.micros) * 1e-6;
}

std::vector<ChainMatch> DetectionRun::matches() const {
    std::vector<ChainMatch> out;
    for (const auto& w : windows)
        for (Direction d : {Direction::UL, Direction::DL})
            for (auto c : w.matched[static_cast<int>(d)]) out.push_back({w.window.start, c, chains.at(c), d});
    return out;
}

std::vector<Attribution> DetectionRun::occurrences() const {
    std::vector<Attribution> out;
    for (const auto& w : windows)
        for (const auto& per_dir : w.attributions)
            for (const auto& a : per_dir) out.push_back(a);
    return out;
}

DetectionRun run_detection(const Trace& trace, const DetectOptions& opts) {
    DetectionRun run;
    run.window_s = opts.window_s;
    run.step_s = opts.step_s;

    WindowEvaluator eval;
    std::optional<ChainMatcher> matcher;
    if (opts.plan) {
        const auto& plan = *opts.plan;
        eval = [&plan, cfg = opts.cfg](const WindowView& v) { return plan.evaluate(v, cfg); };
        run.layout = plan.layout();
        matcher.emplace(plan.matcher());
    } else {
        eval = [cfg = opts.cfg](const WindowView& v) { return featurize(v, cfg); };
        run.layout = builtin_layout();
        auto g = default_graph();
        auto chains = enumerate_chains(g);
        matcher.emplace(std::move(g), std::move(chains), builtin_resolver());
    }
    run.chains = matcher->chains();
    for (const auto& n : matcher->graph().nodes()) {
        if (n.kind == NodeKind::CAUSE) run.causes.push_back(n.id);
        if (n.kind == NodeKind::CONSEQUENCE) run.consequences.push_back(n.id);
    }

    auto plan = plan_windows(trace, opts.window_s, opts.step_s);
    run.warnings = plan.warnings;
    auto features = evaluate_windows(trace, plan.windows, eval, opts.threads);

    run.windows.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        WindowResult w{plan.windows[i], std::move(features[i]), {}, {}};
        std::vector<std::optional<Timestamp>> onsets;
        if (opts.strict_order && w.features.count() > 0) onsets = slot_onsets(trace, w.window, eval);
        for (Direction d : {Direction::UL, Direction::DL}) {
            const int k = static_cast<int>(d);
            w.matched[k] = opts.strict_order ? matcher->matching_strict(w.features, onsets, d)
                                             : matcher->matching(w.features, d);
            w.attributions[k] = matcher->attribute(w.features, d, w.matched[k]);
        }
        run.windows.push_back(std::move(w));
    }
    return run;
}

StatsBundle compute_stats(const DetectionRun& run, RatioMode mode, const std::vector<std::string>& priority) {
    StatsBundle s;
    std::vector<FeatureVector> fvs;
    fvs.reserve(run.windows.size());
    for (const auto& w : run.windows) fvs.push_back(w.features);
    const double span = run.span_s();
    s.frequency = span > 0 ? frequency(fvs, run.layout, span) : FrequencyReport{};
    const auto occ = run.occurrences();
    s.conditional = conditional(occ, run.causes, run.consequences);
    s.ratios = chain_ratios(occ, run.causes, run.consequences, mode, priority);
    return s;
}

namespace {

ordered_json selector_json(const Selector& s) {
    switch (s.kind) {
        case Selector::Kind::SIDE: return ordered_json{{"side", to_string(s.side)}};
        case Selector::Kind::DIR: return ordered_json{{"dir", to_string(s.dir)}};
        case Selector::Kind::NONE: break;
    }
    return ordered_json::object();
}

Selector selector_from(const nlohmann::json& j) {
    if (j.contains("side")) return Selector::of(j.at("side").get<std::string>() == "local" ? Side::LOCAL : Side::REMOTE);
    if (j.contains("dir")) return Selector::of(j.at("dir").get<std::string>() == "ul" ? Direction::UL : Direction::DL);
    return Selector::none();
}

Direction dir_from(const std::string& s) {
    if (s == "ul") return Direction::UL;
    if (s == "dl") return Direction::DL;
    throw std::runtime_error(fmt::format("bad direction '{}'", s));
}

}  // namespace

void write_match_file(std::ostream& out, const DetectionRun& run) {
    ordered_json header;
    header["type"] = "header";
    header["window_s"] = run.window_s;
    header["step_s"] = run.step_s;
    auto& layout = header["layout"] = ordered_json::array();
    for (const auto& s : run.layout) {
        ordered_json slot{{"event", s.event}};
        slot.update(selector_json(s.selector));
        layout.push_back(std::move(slot));
    }
    auto& chains = header["chains"] = ordered_json::array();
    for (const auto& c : run.chains) chains.push_back(c.nodes);
    header["causes"] = run.causes;
    header["consequences"] = run.consequences;
    out << header.dump() << '\n';

    for (const auto& w : run.windows) {
        ordered_json j{{"type", "window"},
                       {"start_us", w.window.start.micros},
                       {"length_s", w.window.length_s},
                       {"bits", w.features.to_string()}};
        out << j.dump() << '\n';
        for (Direction d : {Direction::UL, Direction::DL}) {
            const int k = static_cast<int>(d);
            for (auto c : w.matched[k]) {
                const auto& path = run.chains.at(c);
                ordered_json m{{"type", "match"},       {"start_us", w.window.start.micros},
                               {"dir", to_string(d)},   {"chain", c},
                               {"cause", path.cause()}, {"consequence", path.consequence()},
                               {"path", path.nodes}};
                out << m.dump() << '\n';
            }
            for (const auto& a : w.attributions[k]) {
                ordered_json r{{"type", "attribution"},
                               {"start_us", w.window.start.micros},
                               {"dir", to_string(d)},
                               {"consequence", a.consequence_id},
                               {"causes", a.causes}};
                out << r.dump() << '\n';
            }
        }
    }
}

DetectionRun read_match_file(std::istream& in) {
    DetectionRun run;
    std::string line;
    int line_no = 0;
    bool have_header = false;
    try {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            const auto type = j.at("type").get<std::string>();
            if (type == "header") {
                run.window_s = j.at("window_s").get<double>();
                run.step_s = j.at("step_s").get<double>();
                for (const auto& s : j.at("layout")) run.layout.push_back({s.at("event").get<std::string>(), selector_from(s)});
                for (const auto& c : j.at("chains")) run.chains.push_back({c.get<std::vector<std::string>>()});
                run.causes = j.at("causes").get<std::vector<std::string>>();
                run.consequences = j.at("consequences").get<std::vector<std::string>>();
                have_header = true;
                continue;
            }
            if (!have_header) throw std::runtime_error("missing header record");
            const Timestamp start{j.at("start_us").get<std::int64_t>()};
            if (type == "window") {
                auto fv = FeatureVector::from_string(j.at("bits").get<std::string>());
                if (fv.size() != run.layout.size()) throw std::runtime_error("window bits do not match the layout");
                run.windows.push_back({Window(start, j.at("length_s").get<double>()), std::move(fv), {}, {}});
                continue;
            }
            if (run.windows.empty() || run.windows.back().window.start != start)
                throw std::runtime_error("record refers to a window that has not been declared");
            auto& w = run.windows.back();
            const int k = static_cast<int>(dir_from(j.at("dir").get<std::string>()));
            if (type == "match") {
                const auto c = j.at("chain").get<std::size_t>();
                if (c >= run.chains.size()) throw std::runtime_error("chain index out of range");
                w.matched[k].push_back(c);
            } else if (type == "attribution") {
                w.attributions[k].push_back(
                    {j.at("consequence").get<std::string>(), j.at("causes").get<std::vector<std::string>>()});
            } else {
                throw std::runtime_error(fmt::format("unknown record type '{}'", type));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(fmt::format("match file line {}: {}", line_no, e.what()));
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(fmt::format("match file line {}: {}", line_no, e.what()));
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(fmt::format("match file line {}: {}", line_no, e.what()));
    }
    return run;  // an empty file reads as an empty run
}

void write_features_csv(std::ostream& out, const DetectionRun& run) {
    out << "window_start_us";
    for (const auto& s : run.layout) out << ',' << s.label();
    out << '\n';
    for (const auto& w : run.windows) {
        out << w.window.start.micros;
        for (std::size_t i = 0; i < w.features.size(); ++i) out << ',' << (w.features[i] ? '1' : '0');
        out << '\n';
    }
}

}  // namespace domino
