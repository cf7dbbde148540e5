#include "domino/stats.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "domino/kv_config.hpp"

namespace domino {

FrequencyReport frequency(const std::vector<FeatureVector>& windows, const std::vector<SlotInfo>& layout,
                          double span_s) {
    if (!(span_s > 0)) throw std::invalid_argument("analysed span must be positive");
    FrequencyReport r;
    r.minutes = span_s / 60.0;
    for (std::size_t slot = 0; slot < layout.size(); ++slot) {
        FrequencyRow row;
        row.label = layout[slot].label();
        bool prev = false;
        for (const auto& fv : windows) {
            const bool cur = slot < fv.size() && fv[slot];
            if (cur) ++row.window_hits;
            if (cur && !prev) ++row.runs;
            prev = cur;
        }
        row.per_minute = static_cast<double>(row.runs) / r.minutes;
        r.rows.push_back(std::move(row));
    }
    return r;
}

std::optional<double> ConditionalRow::percent(std::size_t cause) const {
    if (occurrences == 0) return std::nullopt;
    return 100.0 * static_cast<double>(cause_counts.at(cause)) / static_cast<double>(occurrences);
}

std::optional<double> ConditionalRow::unknown_percent() const {
    if (occurrences == 0) return std::nullopt;
    return 100.0 * static_cast<double>(unknown) / static_cast<double>(occurrences);
}

ConditionalTable conditional(const std::vector<Attribution>& occurrences, const std::vector<std::string>& causes,
                             const std::vector<std::string>& consequences) {
    ConditionalTable t;
    t.causes = causes;
    for (const auto& c : consequences) t.rows.push_back({c, 0, std::vector<std::size_t>(causes.size(), 0), 0});
    for (const auto& occ : occurrences) {
        auto row = std::find_if(t.rows.begin(), t.rows.end(),
                                [&](const ConditionalRow& r) { return r.consequence == occ.consequence_id; });
        if (row == t.rows.end()) continue;
        ++row->occurrences;
        if (occ.unknown()) {
            ++row->unknown;
            continue;
        }
        for (std::size_t i = 0; i < causes.size(); ++i)
            if (std::find(occ.causes.begin(), occ.causes.end(), causes[i]) != occ.causes.end()) ++row->cause_counts[i];
    }
    return t;
}

const char* to_string(RatioMode m) { return m == RatioMode::DEDUP ? "dedup" : "per-chain"; }

std::optional<RatioMode> ratio_mode_from_string(std::string_view s) {
    if (s == "dedup") return RatioMode::DEDUP;
    if (s == "per-chain") return RatioMode::PER_CHAIN;
    return std::nullopt;
}

const std::vector<std::string>& default_priority() {
    static const std::vector<std::string> order{"rlc_retx",     "rrc_state", "cross_traffic",
                                                "poor_channel", "harq_retx", "ul_scheduling"};
    return order;
}

std::optional<double> ChainRatioTable::percent(std::size_t consequence, std::size_t cause) const {
    if (raw_instances == 0) return std::nullopt;
    return 100.0 * static_cast<double>(counts.at(consequence).at(cause)) / static_cast<double>(raw_instances);
}

std::optional<double> ChainRatioTable::total_percent() const {
    if (raw_instances == 0) return std::nullopt;
    return 100.0 * static_cast<double>(counted) / static_cast<double>(raw_instances);
}

ChainRatioTable chain_ratios(const std::vector<Attribution>& occurrences, const std::vector<std::string>& causes,
                             const std::vector<std::string>& consequences, RatioMode mode,
                             const std::vector<std::string>& priority) {
    ChainRatioTable t;
    t.mode = mode;
    t.causes = causes;
    t.consequences = consequences;
    t.counts.assign(consequences.size(), std::vector<std::size_t>(causes.size(), 0));

    auto rank = [&](const std::string& cause) {
        auto it = std::find(priority.begin(), priority.end(), cause);
        return static_cast<std::size_t>(it - priority.begin());
    };
    auto index_in = [](const std::vector<std::string>& v, const std::string& s) {
        auto it = std::find(v.begin(), v.end(), s);
        return it == v.end() ? std::nullopt : std::optional<std::size_t>(static_cast<std::size_t>(it - v.begin()));
    };

    for (const auto& occ : occurrences) {
        const auto row = index_in(consequences, occ.consequence_id);
        if (!row || occ.unknown()) continue;
        std::vector<std::size_t> cols;
        for (const auto& c : occ.causes)
            if (auto col = index_in(causes, c)) cols.push_back(*col);
        if (cols.empty()) continue;
        t.raw_instances += cols.size();
        if (mode == RatioMode::PER_CHAIN) {
            for (auto col : cols) ++t.counts[*row][col];
            t.counted += cols.size();
            continue;
        }
        const auto best = *std::min_element(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
            const auto ra = rank(causes[a]);
            const auto rb = rank(causes[b]);
            if (ra != rb) return ra < rb;
            return causes[a] < causes[b];
        });
        ++t.counts[*row][best];
        ++t.counted;
    }
    return t;
}

namespace {

std::string pct(std::optional<double> v) { return v ? format_double(*v) : "n/a"; }

std::string pct_text(std::optional<double> v) { return v ? fmt::format("{:.1f}%", *v) : "n/a"; }

}  // namespace

std::vector<ReportCell> cells(const FrequencyReport& r) {
    std::vector<ReportCell> out;
    for (const auto& row : r.rows) {
        out.push_back({"frequency", row.label, "per_minute", format_double(row.per_minute)});
        out.push_back({"frequency", row.label, "runs", std::to_string(row.runs)});
        out.push_back({"frequency", row.label, "window_hits", std::to_string(row.window_hits)});
    }
    return out;
}

std::vector<ReportCell> cells(const ConditionalTable& t) {
    std::vector<ReportCell> out;
    for (const auto& row : t.rows) {
        out.push_back({"conditional", row.consequence, "occurrences", std::to_string(row.occurrences)});
        for (std::size_t i = 0; i < t.causes.size(); ++i)
            out.push_back({"conditional", row.consequence, t.causes[i], pct(row.percent(i))});
        out.push_back({"conditional", row.consequence, "unknown", pct(row.unknown_percent())});
    }
    return out;
}

std::vector<ReportCell> cells(const ChainRatioTable& t) {
    std::vector<ReportCell> out;
    const std::string report = t.mode == RatioMode::DEDUP ? "chain_ratio" : "chain_ratio_per_chain";
    for (std::size_t r = 0; r < t.consequences.size(); ++r)
        for (std::size_t c = 0; c < t.causes.size(); ++c)
            out.push_back({report, t.consequences[r], t.causes[c], pct(t.percent(r, c))});
    out.push_back({report, "total", "instances", std::to_string(t.raw_instances)});
    out.push_back({report, "total", "counted", std::to_string(t.counted)});
    out.push_back({report, "total", "percent", pct(t.total_percent())});
    return out;
}

std::vector<ReportCell> StatsBundle::all_cells() const {
    auto out = cells(frequency);
    for (auto& c : cells(conditional)) out.push_back(std::move(c));
    for (auto& c : cells(ratios)) out.push_back(std::move(c));
    return out;
}

void export_text(std::ostream& out, const StatsBundle& s) {
    std::size_t w = 5;
    for (const auto& row : s.frequency.rows) w = std::max(w, row.label.size());
    out << fmt::format("Event frequency ({:.2f} min analysed)\n", s.frequency.minutes);
    out << fmt::format("{:<{}}  {:>10}  {:>6}  {:>11}\n", "event", w, "per_minute", "runs", "window_hits");
    for (const auto& row : s.frequency.rows)
        out << fmt::format("{:<{}}  {:>10.3f}  {:>6}  {:>11}\n", row.label, w, row.per_minute, row.runs,
                           row.window_hits);

    auto table = [&](const std::string& title, const std::vector<std::string>& rows,
                     const std::vector<std::string>& cols, auto cell) {
        std::size_t rw = 11;
        for (const auto& r : rows) rw = std::max(rw, r.size());
        out << "\n" << title << "\n" << fmt::format("{:<{}}", "consequence", rw);
        for (const auto& c : cols) out << fmt::format("  {:>{}}", c, std::max<std::size_t>(c.size(), 7));
        out << "\n";
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out << fmt::format("{:<{}}", rows[r], rw);
            for (std::size_t c = 0; c < cols.size(); ++c)
                out << fmt::format("  {:>{}}", cell(r, c), std::max<std::size_t>(cols[c].size(), 7));
            out << "\n";
        }
    };

    std::vector<std::string> cond_rows, cond_cols = s.conditional.causes;
    cond_cols.push_back("unknown");
    cond_cols.push_back("n");
    for (const auto& r : s.conditional.rows) cond_rows.push_back(r.consequence);
    table("P(cause | consequence)", cond_rows, cond_cols, [&](std::size_t r, std::size_t c) {
        const auto& row = s.conditional.rows[r];
        if (c < s.conditional.causes.size()) return pct_text(row.percent(c));
        if (c == s.conditional.causes.size()) return pct_text(row.unknown_percent());
        return std::to_string(row.occurrences);
    });

    table(fmt::format("Chain ratios ({})", to_string(s.ratios.mode)), s.ratios.consequences, s.ratios.causes,
          [&](std::size_t r, std::size_t c) { return pct_text(s.ratios.percent(r, c)); });
    out << fmt::format("total {} of {} instances ({})\n", s.ratios.counted, s.ratios.raw_instances,
                       pct_text(s.ratios.total_percent()));
}

void export_csv(std::ostream& out, const std::vector<ReportCell>& cs) {
    out << "report,row,column,value\n";
    for (const auto& c : cs) out << c.report << ',' << c.row << ',' << c.column << ',' << c.value << '\n';
}

void export_jsonl(std::ostream& out, const std::vector<ReportCell>& cs) {
    for (const auto& c : cs) {
        nlohmann::ordered_json j;
        j["report"] = c.report;
        j["row"] = c.row;
        j["column"] = c.column;
        j["value"] = c.value;
        out << j.dump() << '\n';
    }
}

std::vector<ReportCell> read_csv_cells(std::string_view text) {
    std::vector<ReportCell> out;
    bool header = true;
    int line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line == "report,row,column,value") continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 4) throw std::runtime_error(fmt::format("report csv line {}: expected 4 fields", line_no));
        out.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2]), std::string(f[3])});
    }
    return out;
}

}  // namespace domino
