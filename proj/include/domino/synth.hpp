#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "domino/causal_graph.hpp"
#include "domino/kv_config.hpp"
#include "domino/trace_model.hpp"

namespace domino {

struct DetectionRun;

// ---------------------------------------------------------------------------
// Congestion control

struct GccParams {
    double beta = 0.85;                    // multiplicative decrease
    double additive_bps_per_s = 25e3;      // 1 Mbps takes 40 s
    int trend_window = 20;                 // packet groups in the slope fit
    double threshold_min = 0.04;           // ms of delay per ms of arrival time
    double threshold_margin = 4.0;
    double threshold_alpha = 0.01;         // EWMA weight of |slope|
    int overuse_samples = 2;               // consecutive samples above threshold
    double reaction_interval_s = 0.3;      // minimum spacing of decreases
    double increase_hold_s = 1.0;          // no increase this soon after a decrease
    bool fast_recovery = false;
    double fast_growth_per_s = 0.8;
    double fast_sustain_s = 0.2;
    double fast_ack_ratio = 0.95;
    double min_rate_bps = 100e3;
    double max_rate_bps = 2.5e6;
    double cwnd_margin_s = 0.15;           // window = target * (min_rtt + margin)
    double pushback_floor = 0.1;
};

/// Arrival of one packet group (a video frame) as reported by feedback.
struct DelaySample {
    double send_ms = 0;
    double arrival_ms = 0;
};

struct GccFeedback {
    std::vector<DelaySample> groups;
    std::int64_t acked_bytes = 0;
    std::optional<double> acked_bps;
    std::optional<double> rtt_ms;
};

class GccModel {
public:
    explicit GccModel(GccParams params = {}, double initial_bps = 2e6);

    /// Advances by dt_s seconds and consumes `fb`. Throws
    /// std::invalid_argument for dt_s <= 0.
    void step(const GccFeedback& fb, double dt_s);
    void on_sent(std::int64_t bytes) { outstanding_ += bytes; }

    GccState state() const { return state_; }
    double target_bps() const { return target_; }
    double pushback_bps() const;
    double cwnd_bytes() const;
    std::int64_t outstanding_bytes() const { return outstanding_; }
    double slope() const { return slope_; }
    double threshold() const { return threshold_; }
    double time_s() const { return now_; }
    const GccParams& params() const { return p_; }

    /// Applies a decrease by `factor` now, as an overuse reaction would.
    void cut(double factor);
    void set_target(double bps);

private:
    void add_sample(const DelaySample& s);

    GccParams p_;
    double now_ = 0;
    double target_;
    GccState state_ = GccState::NORMAL;
    std::deque<DelaySample> samples_;
    double slope_ = 0;
    double avg_abs_slope_ = 0;
    double threshold_;
    int over_count_ = 0;
    double last_decrease_ = -1e9;
    std::int64_t outstanding_ = 0;
    double min_rtt_ms_ = 100;
    bool have_rtt_ = false;
    double acked_bps_ = 0;
    double sustained_since_ = -1;
};

/// Returns (target, pushback) after the step.
std::pair<double, double> gcc_step(GccModel& model, const GccFeedback& fb, double dt_s);

/// Least-squares slope of y over x; 0 for fewer than two distinct x.
double ls_slope(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Jitter buffer

struct JitterBufferParams {
    double frame_ms = 1000.0 / 30.0;
    double base_ms = 40;
    double max_ms = 500;
    double history_ms = 2000;
    double spread_lo_pct = 5;
    double spread_hi_pct = 95;
    double rebuild_speed = 0.9;  // playout speed while below target
    double catchup_speed = 1.05; // playout speed while above target
};

struct FrameArrival {
    double time_ms = 0;
    double delay_ms = 0;
};

struct JitterBuffer {
    JitterBufferParams params;
    double now_ms = 0;
    double level_ms = 0;
    double target_ms = 40;
    bool started = false;
    std::int64_t rendered = 0;  // cumulative frames played out
    std::int64_t freezes = 0;
    std::int64_t discarded = 0;
    double consumed_ms = 0;
    bool frozen = false;
    std::deque<FrameArrival> history;
};

struct PlayoutEvents {
    int rendered = 0;
    int freezes = 0;  // transitions into an empty buffer
};

/// Plays out from now_ms to now_ms + dt_ms, adding `arrivals` (ordered by
/// time) as they land.
PlayoutEvents jitter_buffer_step(JitterBuffer& jb, std::span<const FrameArrival> arrivals, double dt_ms);

// ---------------------------------------------------------------------------
// Scenarios

enum class InjectKind : std::uint8_t { NONE, POOR_CHANNEL, CROSS_TRAFFIC, HARQ_STORM, RLC_RETX, RRC_TRANSITION };
enum class Routing : std::uint8_t { JITTER_BUFFER, TARGET, PUSHBACK };

const char* to_string(InjectKind k);
const char* to_string(Routing r);
std::optional<InjectKind> inject_kind_from_string(std::string_view s);
std::optional<Routing> routing_from_string(std::string_view s);
/// Graph cause id for a kind ("" for NONE).
const char* cause_id(InjectKind k);

struct CellProfile {
    std::string duplexing = "tdd";
    double bandwidth_mhz = 20;
    double slot_ms = 0.5;
    std::string tdd_pattern = "DDDSU";
    int own_prb = 26;
    int mcs_base = 16;
    int mcs_jitter = 1;
    double baseline_bler = 0.0005;
    double ul_sched_min_ms = 5;
    double ul_sched_max_ms = 25;
    double harq_rtt_ms = 10;
    int harq_max_attempts = 4;
    double rlc_penalty_ms = 105;
    double rrc_blackout_ms = 300;
    double rrc_setup_ms = 60;
    bool proactive_grants = false;
    double proactive_gain_ms = 10;
    double background_period_ms = 40;
    int background_prb = 4;
};

struct InjectedEvent {
    InjectKind kind = InjectKind::NONE;
    double start_s = 0;
    double duration_s = 0;
    Direction dir = Direction::UL;
    Routing routing = Routing::JITTER_BUFFER;
    std::map<std::string, double> params;

    double param(const std::string& key, double fallback) const;
    /// RRC transitions last for the blackout plus reconnection signalling.
    double active_s(const CellProfile& cell) const;
};

struct Scenario {
    std::string name = "scenario";
    double duration_s = 60;
    std::uint64_t seed = 1;
    double base_delay_ms = 30;
    double delay_noise_ms = 0;
    double warmup_s = 3;
    double fps = 30;
    int packet_bytes = 400;
    bool audio = true;
    double app_interval_ms = 50;
    double rtcp_interval_ms = 50;
    double start_rate_bps = 2e6;
    CellProfile cell;
    GccParams gcc;
    JitterBufferParams jitter;
    std::vector<InjectedEvent> events;

    /// `key = value` lines; repeated `event = kind=K start=S duration=D
    /// [dir=ul|dl] [routing=jb|target|pushback] [param=value ...]`.
    /// Throws ConfigError.
    static Scenario parse(std::string_view text);
    static Scenario load(const std::filesystem::path& path);
    /// Throws ConfigError (line 0).
    void validate() const;
    std::string to_text() const;
};

// ---------------------------------------------------------------------------
// Ground truth

struct TruthEvent {
    InjectKind kind = InjectKind::NONE;
    double start_s = 0;
    double end_s = 0;
    Direction dir = Direction::UL;
    Routing routing = Routing::JITTER_BUFFER;
    std::vector<std::string> causes;  // cause ids whose bits the event sets
    std::vector<std::string> consequences;
    Direction media_dir = Direction::UL;  // stream direction of the expected chains
    std::vector<ChainPath> chains;
    std::vector<std::string> expected_bits;  // slot labels of the chain nodes
};

struct GroundTruth {
    std::string scenario;
    std::uint64_t seed = 0;
    double duration_s = 0;
    std::vector<TruthEvent> events;

    void write_json(std::ostream& out) const;
    /// Throws std::runtime_error.
    static GroundTruth read_json(std::istream& in);
};

GroundTruth ground_truth(const Scenario& s);

struct SynthResult {
    Trace trace;
    GroundTruth truth;
};

/// Deterministic for a fixed scenario (including seed).
SynthResult generate(const Scenario& scenario);

// ---------------------------------------------------------------------------
// Scoring a detection run against ground truth

struct Score {
    std::size_t events = 0;
    std::size_t recalled = 0;
    std::size_t matches = 0;  // chain matches, UL scheduling chains excluded
    std::size_t true_matches = 0;

    double recall() const;     // 1 when there were no events
    double precision() const;  // 1 when nothing matched
};

/// A match counts as true when its cause is one the ground truth declares
/// for an event whose interval (extended by tail_s) overlaps the window. An
/// event is recalled when one of its expected chains matches, in its media
/// direction, in such a window.
Score score(const DetectionRun& run, const GroundTruth& truth, double tail_s = 1.0);

/// Scenario with four spaced events of one kind, used for the injection
/// suite.
Scenario injection_scenario(InjectKind kind, Routing routing, std::uint64_t seed, double noise_ms = 0);

}  // namespace domino
