#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "domino/causal_graph.hpp"
#include "domino/chain_dsl.hpp"
#include "domino/detector.hpp"
#include "domino/stats.hpp"

namespace domino {

struct DetectOptions {
    double window_s = 5.0;
    double step_s = 0.5;
    unsigned threads = 1;
    bool strict_order = false;  // require non-decreasing onsets along a chain
    DetectorConfig cfg;
    /// Compiled spec; the hard-coded detector and default graph when empty.
    std::optional<DetectionPlan> plan;
};

struct WindowResult {
    Window window;
    FeatureVector features;
    std::array<std::vector<std::size_t>, 2> matched;  // chain indices, by media direction
    std::array<std::vector<Attribution>, 2> attributions;
};

struct DetectionRun {
    std::vector<SlotInfo> layout;
    std::vector<ChainPath> chains;
    std::vector<std::string> causes;        // graph order
    std::vector<std::string> consequences;  // graph order
    double window_s = 5.0;
    double step_s = 0.5;
    std::vector<WindowResult> windows;
    std::vector<std::string> warnings;

    /// From the first window start to the last window end.
    double span_s() const;
    std::vector<ChainMatch> matches() const;
    /// Every fired consequence over all windows and both directions.
    std::vector<Attribution> occurrences() const;
};

DetectionRun run_detection(const Trace& trace, const DetectOptions& opts);

StatsBundle compute_stats(const DetectionRun& run, RatioMode mode,
                          const std::vector<std::string>& priority = default_priority());

/// Self-contained JSON-lines record of a run: a header with layout and
/// chains, then window, match and attribution records.
void write_match_file(std::ostream& out, const DetectionRun& run);
/// Throws std::runtime_error on malformed input. An empty stream yields an
/// empty run.
DetectionRun read_match_file(std::istream& in);

/// One row per window: start, then one 0/1 column per slot.
void write_features_csv(std::ostream& out, const DetectionRun& run);

}  // namespace domino
