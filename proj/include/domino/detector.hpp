#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "domino/kv_config.hpp"
#include "domino/trace_model.hpp"

namespace domino {

enum class EventId : std::uint8_t {
    A1_IN_FPS_DROP = 1,
    A2_OUT_FPS_DROP,
    A3_OUT_RES_DROP,
    A4_JB_DRAIN,
    A5_TARGET_DROP,
    A6_GCC_OVERUSE,
    A7_PUSHBACK_DROP,
    A8_CWND_FULL,
    A9_OUTSTANDING_UP,
    A10_PUSHBACK_NEQ_TARGET,
    N11_FWD_DELAY_UP,
    N12_REV_DELAY_UP,
    R13_TBS_DROP,
    R14_RATE_GAP,
    R15_CROSS_TRAFFIC,
    R16_CHANNEL_DEGRADED,
    R17_HARQ_RETX,
    R18_RLC_RETX,
    S19_UL_SCHEDULING,
    S20_RRC_CHANGE,
};

inline constexpr int kEventCount = 20;
inline constexpr int kFeatureCount = 36;  // 2*10 + 6*2 + 4

/// Which side or direction an event instance refers to.
struct Selector {
    enum class Kind : std::uint8_t { NONE, SIDE, DIR };
    Kind kind = Kind::NONE;
    Side side = Side::LOCAL;
    Direction dir = Direction::UL;

    static constexpr Selector none() { return {}; }
    static constexpr Selector of(Side s) { return {Kind::SIDE, s, Direction::UL}; }
    static constexpr Selector of(Direction d) { return {Kind::DIR, Side::LOCAL, d}; }

    bool operator==(const Selector&) const = default;
};

std::string to_string(const Selector& s);

constexpr int index_of(EventId id) { return static_cast<int>(id); }
constexpr EventId event_at(int number) { return static_cast<EventId>(number); }

/// App events (A1-A10) take a side, RAN events (R13-R18) a direction, the
/// rest nothing.
Selector::Kind selector_kind(EventId id);

/// Snake-case event name ("jb_drain", "harq_retx", ...).
const char* event_name(EventId id);
std::optional<EventId> event_from_name(std::string_view name);

/// Slot in the 36-bit layout. Throws std::invalid_argument when the selector
/// kind does not fit the event.
int feature_slot(EventId id, Selector sel);

struct SlotInfo {
    std::string event;
    Selector selector;
    std::string label() const;  // "jb_drain.remote", "fwd_delay_up", ...
};

/// Inverse of feature_slot for the built-in layout.
std::vector<SlotInfo> builtin_layout();

struct DetectorConfig {
    double fps_hi = 27;
    double fps_lo = 25;
    double delay_hi_ms = 80;
    double tbs_drop_ratio = 0.8;
    double rate_gap_frac = 0.1;
    double cross_traffic_frac = 0.2;
    double mcs_hi = 20;
    double mcs_lo = 10;
    double mcs_lo_count = 10;
    double mcs_bucket_ms = 50;
    double harq_count = 10;
    double trend_bucket = 10;

    /// Same thresholds with the stricter HARQ count (more than 20).
    static DetectorConfig harq20();

    /// Applies `key = value` overrides. `preset = harq20` selects the
    /// alternate preset first. Unknown keys and non-positive values throw
    /// ConfigError.
    static DetectorConfig from_kv(const KvConfig& kv);
    static DetectorConfig load(const std::filesystem::path& path);

    std::optional<double> get(std::string_view key) const;
    static const std::vector<std::string>& keys();
    void validate() const;
};

class FeatureVector {
public:
    explicit FeatureVector(std::size_t n = kFeatureCount) : bits_(n, 0) {}

    std::size_t size() const { return bits_.size(); }
    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }
    std::size_t count() const;
    /// One character per slot, '1' or '0'.
    std::string to_string() const;
    static FeatureVector from_string(std::string_view bits);

    bool operator==(const FeatureVector&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

/// Evaluates one event condition. Throws std::invalid_argument when the
/// selector kind does not match the event family.
bool detect(const WindowView& view, EventId id, Selector sel, const DetectorConfig& cfg);

FeatureVector featurize(const WindowView& view, const DetectorConfig& cfg);
FeatureVector featurize(const Trace& trace, const Window& window, const DetectorConfig& cfg);

struct WindowPlan {
    std::vector<Window> windows;
    std::vector<std::string> warnings;
};

/// Windows from the trace start, stepped by step_s, while they fit inside the
/// span. A span shorter than length_s yields one window covering the span.
WindowPlan plan_windows(const Trace& trace, double length_s, double step_s);

using WindowEvaluator = std::function<FeatureVector(const WindowView&)>;

/// Evaluates every window, optionally on several threads. Output order
/// follows `windows`.
std::vector<FeatureVector> evaluate_windows(const Trace& trace, const std::vector<Window>& windows,
                                            const WindowEvaluator& eval, unsigned threads = 1);

struct WindowFeatures {
    Window window;
    FeatureVector features;
};

std::vector<WindowFeatures> featurize_all(const Trace& trace, const DetectorConfig& cfg, double length_s = 5.0,
                                          double step_s = 0.5, unsigned threads = 1,
                                          std::vector<std::string>* warnings = nullptr);

/// For each slot, the end of the shortest window prefix (on a `grid_us`
/// grid) in which the slot is already true; nullopt if never.
std::vector<std::optional<Timestamp>> slot_onsets(const Trace& trace, const Window& window,
                                                  const WindowEvaluator& eval, std::int64_t grid_us = 50'000);

// Shared numeric helpers.

/// Nearest-rank percentile of an unsorted sample; NaN for an empty sample.
double percentile_nearest_rank(std::vector<double> values, double p);

/// Index of the first maximum / minimum; -1 for an empty series.
std::ptrdiff_t first_argmax(std::span<const double> v);
std::ptrdiff_t first_argmin(std::span<const double> v);

}  // namespace domino
