#pragma once

// Small builders for hand-made traces.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "domino/detector.hpp"
#include "domino/trace_model.hpp"

namespace domino::test {

inline Timestamp ms(double v) { return Timestamp{static_cast<std::int64_t>(v * 1000.0 + 0.5)}; }
inline Timestamp sec(double v) { return Timestamp::from_seconds(v); }

inline AppRecord app_at(double t_s, Side side = Side::LOCAL) {
    AppRecord a;
    a.ts = sec(t_s);
    a.side = side;
    a.in_fps = 30;
    a.out_fps = 30;
    a.out_res_height = 720;
    a.jitter_buffer_ms = 60;
    a.target_bitrate_bps = 2e6;
    a.pushback_rate_bps = 2e6;
    a.outstanding_bytes = 1000;
    a.cwnd_bytes = 50000;
    a.app_send_rate_bps = 1e6;
    return a;
}

inline RanRecord ran_at(double t_s, Direction dir = Direction::DL, bool own = true) {
    RanRecord r;
    r.ts = sec(t_s);
    r.dir = dir;
    r.rnti = 17921;
    r.prb = 26;
    r.mcs = 16;
    r.tbs_bits = 20000;
    r.is_own_ue = own;
    return r;
}

inline PacketRecord pkt_at(double send_s, double delay_ms, Direction dir = Direction::DL,
                           PacketKind kind = PacketKind::MEDIA) {
    PacketRecord p;
    p.send_ts = sec(send_s);
    p.recv_ts = Timestamp{p.send_ts.micros + static_cast<std::int64_t>(delay_ms * 1000.0 + 0.5)};
    p.dir = dir;
    p.size_bytes = 400;
    p.kind = kind;
    return p;
}

/// App records for one side, 50 ms apart from t0, with one field varied.
template <typename F>
std::vector<AppRecord> app_series(const std::vector<double>& values, F set, Side side = Side::LOCAL,
                                  double t0 = 0.1) {
    std::vector<AppRecord> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto a = app_at(t0 + 0.05 * static_cast<double>(i), side);
        set(a, values[i]);
        out.push_back(a);
    }
    return out;
}

/// Own-UE RAN records for one direction, 2.5 ms apart from t0.
template <typename F>
std::vector<RanRecord> ran_series(const std::vector<double>& values, F set, Direction dir = Direction::DL,
                                  double t0 = 0.1) {
    std::vector<RanRecord> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto r = ran_at(t0 + 0.0025 * static_cast<double>(i), dir);
        set(r, values[i]);
        out.push_back(r);
    }
    return out;
}

/// Media (or rtcp) packets with the given delays, 10 ms apart.
inline std::vector<PacketRecord> delay_series(const std::vector<double>& delays, Direction dir = Direction::DL,
                                              PacketKind kind = PacketKind::MEDIA, double t0 = 0.1) {
    std::vector<PacketRecord> out;
    for (std::size_t i = 0; i < delays.size(); ++i)
        out.push_back(pkt_at(t0 + 0.01 * static_cast<double>(i), delays[i], dir, kind));
    return out;
}

/// Sorts streams the way ingest leaves them.
inline Trace sorted(Trace t) {
    std::stable_sort(t.ran.begin(), t.ran.end(), [](auto& a, auto& b) { return a.ts < b.ts; });
    std::stable_sort(t.packets.begin(), t.packets.end(), [](auto& a, auto& b) { return a.send_ts < b.send_ts; });
    std::stable_sort(t.app.begin(), t.app.end(), [](auto& a, auto& b) { return a.ts < b.ts; });
    return t;
}

/// Evaluates one event over the window [0, 5 s).
inline bool fires(const Trace& t, EventId id, Selector sel, const DetectorConfig& cfg = {}) {
    const Trace s = sorted(t);
    return detect(slice(s, Window{Timestamp{0}, 5.0}), id, sel, cfg);
}

/// Random trace with every stream populated and values drawn to sit near
/// the detector thresholds, so that bits flip often.
inline Trace random_trace(std::mt19937_64& rng, double span_s) {
    Trace t;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto pick = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    auto chance = [&](double p) { return u(rng) < p; };

    for (int side = 0; side < 2; ++side) {
        double target = 2e6;
        for (double ts = pick(0, 0.05); ts < span_s; ts += 0.05) {
            auto a = app_at(ts, static_cast<Side>(side));
            a.in_fps = std::round(pick(22, 31));
            a.out_fps = std::round(pick(22, 31));
            a.out_res_height = chance(0.02) ? 360 : 720;
            a.jitter_buffer_ms = chance(0.01) ? 0 : pick(20, 200);
            if (chance(0.02)) target *= 0.85;
            a.target_bitrate_bps = target;
            a.pushback_rate_bps = chance(0.03) ? target * 0.5 : target;
            a.gcc_state = chance(0.01) ? GccState::OVERUSE : GccState::NORMAL;
            a.cwnd_bytes = 50000;
            a.outstanding_bytes = static_cast<std::int64_t>(pick(0, 60000));
            a.app_send_rate_bps = pick(0.5e6, 2.5e6);
            t.app.push_back(a);
        }
    }
    const bool storm = chance(0.5);
    for (double ts = pick(0, 0.003); ts < span_s; ts += 0.0025) {
        const auto dir = chance(0.5) ? Direction::UL : Direction::DL;
        auto r = ran_at(ts, dir, !chance(0.1));
        r.prb = static_cast<std::int32_t>(pick(1, 30));
        r.mcs = static_cast<std::int32_t>(pick(chance(0.3) ? 0 : 10, 28));
        r.tbs_bits = static_cast<std::int64_t>(pick(500, 30000));
        r.harq_retx = chance(storm ? 0.02 : 0.001);
        r.rlc_retx = chance(0.0002);
        r.rnti = chance(0.0003) ? 20000 : 17921;
        t.ran.push_back(r);
    }
    double d[2] = {40, 40};
    for (double ts = pick(0, 0.01); ts < span_s; ts += 0.004) {
        const auto dir = chance(0.5) ? Direction::UL : Direction::DL;
        const auto kind = chance(0.15) ? PacketKind::RTCP : PacketKind::MEDIA;
        auto& level = d[static_cast<int>(dir)];
        level = std::clamp(level + pick(-4, 4.5), 5.0, 200.0);
        t.packets.push_back(pkt_at(ts, level, dir, kind));
    }
    return sorted(std::move(t));
}

}  // namespace domino::test
