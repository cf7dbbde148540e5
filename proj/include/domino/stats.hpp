#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "domino/causal_graph.hpp"
#include "domino/detector.hpp"

namespace domino {

struct FrequencyRow {
    std::string label;
    std::size_t runs = 0;         // maximal runs of consecutive true windows
    std::size_t window_hits = 0;  // raw count of true windows
    double per_minute = 0;        // runs / minutes
};

struct FrequencyReport {
    double minutes = 0;
    std::vector<FrequencyRow> rows;
};

/// Debounced occurrence rate per slot. `windows` must be ordered by start.
/// Throws std::invalid_argument for a non-positive span.
FrequencyReport frequency(const std::vector<FeatureVector>& windows, const std::vector<SlotInfo>& layout,
                          double span_s);

struct ConditionalRow {
    std::string consequence;
    std::size_t occurrences = 0;
    std::vector<std::size_t> cause_counts;  // parallel to ConditionalTable::causes
    std::size_t unknown = 0;

    /// Percentages; nullopt when the consequence never occurred.
    std::optional<double> percent(std::size_t cause) const;
    std::optional<double> unknown_percent() const;
};

struct ConditionalTable {
    std::vector<std::string> causes;
    std::vector<ConditionalRow> rows;
};

/// One Attribution per fired consequence (window x direction); an empty
/// cause list counts as UNKNOWN.
ConditionalTable conditional(const std::vector<Attribution>& occurrences, const std::vector<std::string>& causes,
                             const std::vector<std::string>& consequences);

enum class RatioMode { DEDUP, PER_CHAIN };

const char* to_string(RatioMode m);
std::optional<RatioMode> ratio_mode_from_string(std::string_view s);

/// rlc_retx > rrc_state > cross_traffic > poor_channel > harq_retx > ul_scheduling
const std::vector<std::string>& default_priority();

struct ChainRatioTable {
    RatioMode mode = RatioMode::DEDUP;
    std::vector<std::string> causes;
    std::vector<std::string> consequences;
    std::vector<std::vector<std::size_t>> counts;  // [consequence][cause], counted instances
    std::size_t raw_instances = 0;                 // every (occurrence, cause) pair
    std::size_t counted = 0;

    /// counts / raw_instances in percent; nullopt when nothing was detected.
    std::optional<double> percent(std::size_t consequence, std::size_t cause) const;
    std::optional<double> total_percent() const;
};

/// A chain instance is one (occurrence, cause) pair. In DEDUP mode an
/// occurrence with several causes contributes one instance, to the cause
/// ranked highest in `priority` (unlisted causes rank last, by name).
ChainRatioTable chain_ratios(const std::vector<Attribution>& occurrences, const std::vector<std::string>& causes,
                             const std::vector<std::string>& consequences, RatioMode mode,
                             const std::vector<std::string>& priority = default_priority());

/// One cell of a report, as written to csv/jsonl.
struct ReportCell {
    std::string report;
    std::string row;
    std::string column;
    std::string value;

    bool operator==(const ReportCell&) const = default;
};

std::vector<ReportCell> cells(const FrequencyReport& r);
std::vector<ReportCell> cells(const ConditionalTable& t);
std::vector<ReportCell> cells(const ChainRatioTable& t);

struct StatsBundle {
    FrequencyReport frequency;
    ConditionalTable conditional;
    ChainRatioTable ratios;

    std::vector<ReportCell> all_cells() const;
};

void export_text(std::ostream& out, const StatsBundle& s);
void export_csv(std::ostream& out, const std::vector<ReportCell>& cells);
void export_jsonl(std::ostream& out, const std::vector<ReportCell>& cells);

/// Reads back export_csv output. Throws std::runtime_error on a malformed
/// line.
std::vector<ReportCell> read_csv_cells(std::string_view text);

}  // namespace domino
