#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "domino/detector.hpp"
#include "domino/synth.hpp"

namespace domino {

double ls_slope(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return 0;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0 ? sxy / sxx : 0;
}

GccModel::GccModel(GccParams params, double initial_bps)
    : p_(params), target_(std::clamp(initial_bps, params.min_rate_bps, params.max_rate_bps)),
      threshold_(params.threshold_min) {}

double GccModel::cwnd_bytes() const { return target_ / 8.0 * (min_rtt_ms_ / 1000.0 + p_.cwnd_margin_s); }

double GccModel::pushback_bps() const {
    const double cwnd = cwnd_bytes();
    const auto out = static_cast<double>(outstanding_);
    if (out <= cwnd) return target_;
    return target_ * std::max(p_.pushback_floor, cwnd / out);
}

void GccModel::cut(double factor) {
    target_ = std::clamp(target_ * factor, p_.min_rate_bps, p_.max_rate_bps);
    last_decrease_ = now_;
    sustained_since_ = -1;
}

void GccModel::set_target(double bps) { target_ = std::clamp(bps, p_.min_rate_bps, p_.max_rate_bps); }

void GccModel::add_sample(const DelaySample& s) {
    samples_.push_back(s);
    while (static_cast<int>(samples_.size()) > p_.trend_window) samples_.pop_front();
    if (static_cast<int>(samples_.size()) < p_.trend_window) return;

    std::vector<double> x, y;
    x.reserve(samples_.size());
    y.reserve(samples_.size());
    for (const auto& d : samples_) {
        x.push_back(d.arrival_ms);
        y.push_back(d.arrival_ms - d.send_ms);
    }
    slope_ = ls_slope(x, y);
    threshold_ = std::max(p_.threshold_min, p_.threshold_margin * avg_abs_slope_);
    avg_abs_slope_ += p_.threshold_alpha * (std::abs(slope_) - avg_abs_slope_);

    if (slope_ > threshold_) {
        if (++over_count_ >= p_.overuse_samples) state_ = GccState::OVERUSE;
    } else {
        over_count_ = 0;
        state_ = slope_ < -threshold_ ? GccState::UNDERUSE : GccState::NORMAL;
    }
}

void GccModel::step(const GccFeedback& fb, double dt_s) {
    if (!(dt_s > 0)) throw std::invalid_argument("gcc step needs a positive time delta");
    now_ += dt_s;
    for (const auto& g : fb.groups) add_sample(g);
    outstanding_ = std::max<std::int64_t>(0, outstanding_ - fb.acked_bytes);
    if (fb.rtt_ms) {
        min_rtt_ms_ = have_rtt_ ? std::min(min_rtt_ms_, *fb.rtt_ms) : *fb.rtt_ms;
        have_rtt_ = true;
    }
    if (fb.acked_bps) acked_bps_ = *fb.acked_bps;

    switch (state_) {
        case GccState::OVERUSE:
            if (now_ - last_decrease_ >= p_.reaction_interval_s) cut(p_.beta);
            break;
        case GccState::UNDERUSE:
            break;
        case GccState::NORMAL: {
            if (now_ - last_decrease_ < p_.increase_hold_s) break;
            const bool sustained = acked_bps_ >= p_.fast_ack_ratio * target_;
            if (!sustained) {
                sustained_since_ = -1;
            } else if (sustained_since_ < 0) {
                sustained_since_ = now_;
            }
            if (p_.fast_recovery && sustained && now_ - sustained_since_ >= p_.fast_sustain_s &&
                acked_bps_ > target_) {
                target_ = std::min(target_ * (1 + p_.fast_growth_per_s * dt_s), acked_bps_);
            } else {
                target_ += p_.additive_bps_per_s * dt_s;
            }
            target_ = std::min(target_, p_.max_rate_bps);
            break;
        }
    }
}

std::pair<double, double> gcc_step(GccModel& model, const GccFeedback& fb, double dt_s) {
    model.step(fb, dt_s);
    return {model.target_bps(), model.pushback_bps()};
}

namespace {

void update_target(JitterBuffer& jb) {
    const auto& p = jb.params;
    while (!jb.history.empty() && jb.history.front().time_ms < jb.now_ms - p.history_ms) jb.history.pop_front();
    if (jb.history.empty()) return;
    std::vector<double> d;
    d.reserve(jb.history.size());
    for (const auto& a : jb.history) d.push_back(a.delay_ms);
    const double spread = percentile_nearest_rank(d, p.spread_hi_pct) - percentile_nearest_rank(d, p.spread_lo_pct);
    jb.target_ms = std::clamp(p.base_ms + spread, p.base_ms, p.max_ms);
}

void play_until(JitterBuffer& jb, double t, PlayoutEvents& ev) {
    const auto& p = jb.params;
    while (jb.now_ms < t) {
        if (!jb.started || jb.level_ms <= 0) {
            jb.now_ms = t;
            break;
        }
        // Speed changes at the target and one frame below it; advance
        // piecewise so the level never skips a boundary.
        double speed, boundary;
        if (jb.level_ms > jb.target_ms) {
            speed = p.catchup_speed;
            boundary = jb.target_ms;
        } else if (jb.level_ms >= jb.target_ms - p.frame_ms) {
            speed = 1.0;
            boundary = std::max(0.0, jb.target_ms - p.frame_ms);
        } else {
            speed = p.rebuild_speed;
            boundary = 0;
        }
        double span = t - jb.now_ms;
        double used = span * speed;
        const double room = jb.level_ms - boundary;
        if (used > room) {
            used = room;
            span = room / speed;
        }
        if (span <= 0) {
            // Sitting exactly on a boundary: nudge into the slower regime.
            span = std::min(t - jb.now_ms, 1e-6);
            used = std::min(jb.level_ms, span * speed);
        }
        jb.level_ms -= used;
        jb.consumed_ms += used;
        jb.now_ms += span;
        while (jb.consumed_ms >= p.frame_ms) {
            jb.consumed_ms -= p.frame_ms;
            ++jb.rendered;
            ++ev.rendered;
        }
        if (jb.level_ms <= 1e-9) {
            jb.level_ms = 0;
            if (!jb.frozen) {
                jb.frozen = true;
                ++jb.freezes;
                ++ev.freezes;
            }
        }
    }
}

}  // namespace

PlayoutEvents jitter_buffer_step(JitterBuffer& jb, std::span<const FrameArrival> arrivals, double dt_ms) {
    PlayoutEvents ev;
    const double end = jb.now_ms + dt_ms;
    for (const auto& a : arrivals) {
        play_until(jb, std::clamp(a.time_ms, jb.now_ms, end), ev);
        jb.history.push_back(a);
        update_target(jb);
        jb.started = true;
        jb.frozen = false;
        const double cap = jb.target_ms + jb.params.frame_ms;
        const double next = jb.level_ms + jb.params.frame_ms;
        if (next > cap) {
            ++jb.discarded;
            jb.level_ms = std::max(jb.level_ms, cap);
        } else {
            jb.level_ms = next;
        }
    }
    play_until(jb, end, ev);
    return ev;
}

}  // namespace domino
