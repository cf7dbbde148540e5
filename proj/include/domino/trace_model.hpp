#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace domino {

/// Microseconds since the trace epoch. All streams share one clock domain
/// after ingest.
struct Timestamp {
    std::int64_t micros = 0;

    constexpr Timestamp() = default;
    constexpr explicit Timestamp(std::int64_t us) : micros(us) {}

    static constexpr Timestamp from_seconds(double s) {
        return Timestamp{static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5))};
    }
    constexpr double seconds() const { return static_cast<double>(micros) * 1e-6; }
    constexpr double millis() const { return static_cast<double>(micros) * 1e-3; }

    constexpr auto operator<=>(const Timestamp&) const = default;
};

/// Converts a duration in seconds to whole microseconds (rounded).
constexpr std::int64_t seconds_to_micros(double s) {
    return static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5));
}

enum class Direction : std::uint8_t { UL = 0, DL = 1 };
enum class Side : std::uint8_t { LOCAL = 0, REMOTE = 1 };
enum class PacketKind : std::uint8_t { MEDIA = 0, RTCP = 1 };
enum class GccState : std::uint8_t { NORMAL = 0, OVERUSE = 1, UNDERUSE = 2 };

constexpr Direction opposite(Direction d) { return d == Direction::UL ? Direction::DL : Direction::UL; }
constexpr Side opposite(Side s) { return s == Side::LOCAL ? Side::REMOTE : Side::LOCAL; }

// The LOCAL client sits behind the 5G UE: it sends uplink media and receives
// downlink media. The REMOTE client is on the wired side.
constexpr Side sender_of(Direction d) { return d == Direction::UL ? Side::LOCAL : Side::REMOTE; }
constexpr Side receiver_of(Direction d) { return opposite(sender_of(d)); }

const char* to_string(Direction d);
const char* to_string(Side s);
const char* to_string(PacketKind k);
const char* to_string(GccState s);

struct RanRecord {
    Timestamp ts;
    Direction dir = Direction::UL;
    std::int64_t rnti = 0;
    std::int32_t prb = 0;
    std::int32_t mcs = 0;
    std::int64_t tbs_bits = 0;
    bool is_own_ue = true;
    bool harq_retx = false;
    bool rlc_retx = false;
    bool proactive_grant = false;

    bool operator==(const RanRecord&) const = default;
};

struct PacketRecord {
    Timestamp send_ts;
    Timestamp recv_ts;
    Direction dir = Direction::UL;
    std::int32_t size_bytes = 0;
    PacketKind kind = PacketKind::MEDIA;

    std::int64_t one_way_delay_us() const { return recv_ts.micros - send_ts.micros; }
    double one_way_delay_ms() const { return static_cast<double>(one_way_delay_us()) * 1e-3; }

    bool operator==(const PacketRecord&) const = default;
};

struct AppRecord {
    Timestamp ts;
    Side side = Side::LOCAL;
    double in_fps = 0;
    double out_fps = 0;
    std::int32_t out_res_height = 0;
    double jitter_buffer_ms = 0;
    double target_bitrate_bps = 0;
    double pushback_rate_bps = 0;
    GccState gcc_state = GccState::NORMAL;
    std::int64_t outstanding_bytes = 0;
    std::int64_t cwnd_bytes = 1;
    double app_send_rate_bps = 0;

    bool operator==(const AppRecord&) const = default;
};

struct TraceMeta {
    std::string cell_name;
    std::string duplexing;  // "tdd" / "fdd"
    double bandwidth_mhz = 0;
};

/// A time-aligned bundle of the three telemetry streams for one call. Each
/// stream is sorted by its primary timestamp (packets by send_ts).
struct Trace {
    std::vector<RanRecord> ran;
    std::vector<PacketRecord> packets;
    std::vector<AppRecord> app;
    TraceMeta meta;

    bool empty() const { return ran.empty() && packets.empty() && app.empty(); }
    /// Earliest and latest primary timestamp over all non-empty streams.
    std::pair<Timestamp, Timestamp> span() const;
};

/// Half-open interval [start, start + length).
struct Window {
    Timestamp start;
    double length_s = 5.0;

    Window() = default;
    Window(Timestamp s, double len);

    Timestamp end() const { return Timestamp{start.micros + seconds_to_micros(length_s)}; }
    bool contains(Timestamp t) const { return t >= start && t < end(); }
    bool operator==(const Window&) const = default;
};

/// Per-stream sublists of one window. Views borrow from the Trace.
struct WindowView {
    Window window;
    std::span<const RanRecord> ran;
    std::span<const PacketRecord> packets;
    std::span<const AppRecord> app;
};

WindowView slice(const Trace& trace, const Window& window);

/// Moves the window forward by step_s seconds. Throws std::invalid_argument
/// for a non-positive step.
Window advance(const Window& window, double step_s);

/// Averages consecutive groups of `count` samples; a trailing partial group
/// is dropped.
std::vector<double> bucket_mean(std::span<const double> values, std::size_t count);

/// Averages fixed time bins of `bin_us` starting at `origin`. Empty bins are
/// skipped. `series` must be sorted by timestamp.
std::vector<double> bucket_mean(std::span<const std::pair<Timestamp, double>> series,
                                Timestamp origin, std::int64_t bin_us);

}  // namespace domino
