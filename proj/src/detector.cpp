#include "domino/detector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace domino {

namespace {

struct EventInfo {
    EventId id;
    const char* name;
    Selector::Kind kind;
};

constexpr std::array<EventInfo, kEventCount> kEvents{{
    {EventId::A1_IN_FPS_DROP, "in_fps_drop", Selector::Kind::SIDE},
    {EventId::A2_OUT_FPS_DROP, "out_fps_drop", Selector::Kind::SIDE},
    {EventId::A3_OUT_RES_DROP, "out_res_drop", Selector::Kind::SIDE},
    {EventId::A4_JB_DRAIN, "jb_drain", Selector::Kind::SIDE},
    {EventId::A5_TARGET_DROP, "target_bitrate_drop", Selector::Kind::SIDE},
    {EventId::A6_GCC_OVERUSE, "gcc_overuse", Selector::Kind::SIDE},
    {EventId::A7_PUSHBACK_DROP, "pushback_rate_drop", Selector::Kind::SIDE},
    {EventId::A8_CWND_FULL, "cwnd_full", Selector::Kind::SIDE},
    {EventId::A9_OUTSTANDING_UP, "outstanding_up", Selector::Kind::SIDE},
    {EventId::A10_PUSHBACK_NEQ_TARGET, "pushback_neq_target", Selector::Kind::SIDE},
    {EventId::N11_FWD_DELAY_UP, "fwd_delay_up", Selector::Kind::NONE},
    {EventId::N12_REV_DELAY_UP, "rev_delay_up", Selector::Kind::NONE},
    {EventId::R13_TBS_DROP, "tbs_drop", Selector::Kind::DIR},
    {EventId::R14_RATE_GAP, "rate_gap", Selector::Kind::DIR},
    {EventId::R15_CROSS_TRAFFIC, "cross_traffic", Selector::Kind::DIR},
    {EventId::R16_CHANNEL_DEGRADED, "poor_channel", Selector::Kind::DIR},
    {EventId::R17_HARQ_RETX, "harq_retx", Selector::Kind::DIR},
    {EventId::R18_RLC_RETX, "rlc_retx", Selector::Kind::DIR},
    {EventId::S19_UL_SCHEDULING, "ul_scheduling", Selector::Kind::NONE},
    {EventId::S20_RRC_CHANGE, "rrc_state", Selector::Kind::NONE},
}};

const EventInfo& info(EventId id) { return kEvents[static_cast<std::size_t>(index_of(id) - 1)]; }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Per-window inputs, filtered once and shared by all conditions.
struct WindowData {
    std::array<std::vector<const AppRecord*>, 2> app;  // by side
    std::array<std::vector<double>, 2> media_delay;    // by dir, send order
    std::array<std::vector<double>, 2> rtcp_delay;
    std::array<std::vector<const RanRecord*>, 2> own;  // by dir
    std::array<std::int64_t, 2> other_prb{0, 0};
    std::vector<const RanRecord*> own_all;  // both dirs, ts order
    Timestamp origin;
};

WindowData prepare(const WindowView& view) {
    WindowData d;
    d.origin = view.window.start;
    for (const auto& a : view.app) d.app[static_cast<int>(a.side)].push_back(&a);
    for (const auto& p : view.packets) {
        auto& target = p.kind == PacketKind::MEDIA ? d.media_delay : d.rtcp_delay;
        target[static_cast<int>(p.dir)].push_back(p.one_way_delay_ms());
    }
    for (const auto& r : view.ran) {
        if (r.is_own_ue) {
            d.own[static_cast<int>(r.dir)].push_back(&r);
            d.own_all.push_back(&r);
        } else {
            d.other_prb[static_cast<int>(r.dir)] += r.prb;
        }
    }
    return d;
}

template <typename F>
std::vector<double> app_series(const std::vector<const AppRecord*>& recs, F field) {
    std::vector<double> out;
    out.reserve(recs.size());
    for (const auto* a : recs) out.push_back(field(*a));
    return out;
}

bool any_adjacent_drop(const std::vector<double>& v) {
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
        if (v[i + 1] < v[i]) return true;
    return false;
}

bool any_adjacent_rise(const std::vector<double>& v) {
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
        if (v[i + 1] > v[i]) return true;
    return false;
}

bool peak_then_trough(const std::vector<double>& v, double hi, double lo) {
    if (v.empty()) return false;
    const auto imax = first_argmax(v);
    const auto imin = first_argmin(v);
    return v[static_cast<std::size_t>(imax)] > hi && v[static_cast<std::size_t>(imin)] < lo && imax < imin;
}

bool delay_up(const std::vector<double>& delays, const DetectorConfig& cfg) {
    if (delays.empty()) return false;
    const double peak = *std::max_element(delays.begin(), delays.end());
    if (!(peak > cfg.delay_hi_ms)) return false;
    const auto means = bucket_mean(delays, static_cast<std::size_t>(cfg.trend_bucket));
    return any_adjacent_rise(means);
}

bool rate_gap(const WindowData& d, Direction dir, const DetectorConfig& cfg) {
    const auto& own = d.own[static_cast<int>(dir)];
    if (own.size() < 2) return false;
    std::vector<double> spacing;
    spacing.reserve(own.size() - 1);
    for (std::size_t i = 1; i < own.size(); ++i)
        spacing.push_back(static_cast<double>(own[i]->ts.micros - own[i - 1]->ts.micros));
    const double spacing_s = percentile_nearest_rank(std::move(spacing), 50) * 1e-6;
    if (!(spacing_s > 0)) return false;

    const auto& app = d.app[static_cast<int>(sender_of(dir))];
    std::size_t next_app = 0;
    double held = kNaN;
    std::size_t defined = 0, positive = 0;
    for (const auto* r : own) {
        while (next_app < app.size() && app[next_app]->ts <= r->ts) held = app[next_app++]->app_send_rate_bps;
        if (std::isnan(held)) continue;
        const double tbs_rate = static_cast<double>(r->tbs_bits) / spacing_s;
        ++defined;
        if (held - tbs_rate > 0) ++positive;
    }
    if (defined == 0) return false;
    return static_cast<double>(positive) / static_cast<double>(defined) > cfg.rate_gap_frac;
}

bool channel_degraded(const WindowData& d, Direction dir, const DetectorConfig& cfg) {
    const auto& own = d.own[static_cast<int>(dir)];
    if (own.empty()) return false;
    const std::int64_t bin = seconds_to_micros(cfg.mcs_bucket_ms * 1e-3);
    double max_p90 = -std::numeric_limits<double>::infinity();
    std::size_t low_buckets = 0;
    std::size_t i = 0;
    std::vector<double> bucket;
    while (i < own.size()) {
        const std::int64_t k = (own[i]->ts.micros - d.origin.micros) / bin;
        const std::int64_t end = d.origin.micros + (k + 1) * bin;
        bucket.clear();
        while (i < own.size() && own[i]->ts.micros < end) bucket.push_back(own[i++]->mcs);
        max_p90 = std::max(max_p90, percentile_nearest_rank(bucket, 90));
        if (percentile_nearest_rank(bucket, 50) < cfg.mcs_lo) ++low_buckets;
    }
    return max_p90 < cfg.mcs_hi && static_cast<double>(low_buckets) > cfg.mcs_lo_count;
}

bool eval(const WindowData& d, EventId id, Selector sel, const DetectorConfig& cfg) {
    if (sel.kind != selector_kind(id))
        throw std::invalid_argument(
            fmt::format("event {} does not take selector '{}'", event_name(id), to_string(sel)));

    const int side = static_cast<int>(sel.side);
    const int dir = static_cast<int>(sel.dir);
    switch (id) {
        case EventId::A1_IN_FPS_DROP:
            return peak_then_trough(app_series(d.app[side], [](const AppRecord& a) { return a.in_fps; }),
                                    cfg.fps_hi, cfg.fps_lo);
        case EventId::A2_OUT_FPS_DROP:
            return peak_then_trough(app_series(d.app[side], [](const AppRecord& a) { return a.out_fps; }),
                                    cfg.fps_hi, cfg.fps_lo);
        case EventId::A3_OUT_RES_DROP:
            return any_adjacent_drop(app_series(
                d.app[side], [](const AppRecord& a) { return static_cast<double>(a.out_res_height); }));
        case EventId::A4_JB_DRAIN:
            return std::any_of(d.app[side].begin(), d.app[side].end(),
                               [](const AppRecord* a) { return a->jitter_buffer_ms == 0; });
        case EventId::A5_TARGET_DROP:
            return any_adjacent_drop(
                app_series(d.app[side], [](const AppRecord& a) { return a.target_bitrate_bps; }));
        case EventId::A6_GCC_OVERUSE:
            return std::any_of(d.app[side].begin(), d.app[side].end(),
                               [](const AppRecord* a) { return a->gcc_state == GccState::OVERUSE; });
        case EventId::A7_PUSHBACK_DROP:
            return any_adjacent_drop(
                app_series(d.app[side], [](const AppRecord& a) { return a.pushback_rate_bps; }));
        case EventId::A8_CWND_FULL:
            return std::any_of(d.app[side].begin(), d.app[side].end(), [](const AppRecord* a) {
                return static_cast<double>(a->outstanding_bytes) / static_cast<double>(a->cwnd_bytes) > 1;
            });
        case EventId::A9_OUTSTANDING_UP:
            return any_adjacent_rise(bucket_mean(
                app_series(d.app[side], [](const AppRecord& a) { return static_cast<double>(a.outstanding_bytes); }),
                static_cast<std::size_t>(cfg.trend_bucket)));
        case EventId::A10_PUSHBACK_NEQ_TARGET:
            return std::any_of(d.app[side].begin(), d.app[side].end(),
                               [](const AppRecord* a) { return a->target_bitrate_bps != a->pushback_rate_bps; });
        case EventId::N11_FWD_DELAY_UP:
            return delay_up(d.media_delay[0], cfg) || delay_up(d.media_delay[1], cfg);
        case EventId::N12_REV_DELAY_UP:
            return delay_up(d.rtcp_delay[0], cfg) || delay_up(d.rtcp_delay[1], cfg);
        case EventId::R13_TBS_DROP: {
            std::vector<double> tbs;
            tbs.reserve(d.own[dir].size());
            for (const auto* r : d.own[dir]) tbs.push_back(static_cast<double>(r->tbs_bits));
            if (tbs.empty()) return false;
            const auto imax = first_argmax(tbs);
            const auto imin = first_argmin(tbs);
            return cfg.tbs_drop_ratio * tbs[static_cast<std::size_t>(imax)] > tbs[static_cast<std::size_t>(imin)] &&
                   imax < imin;
        }
        case EventId::R14_RATE_GAP:
            return rate_gap(d, sel.dir, cfg);
        case EventId::R15_CROSS_TRAFFIC: {
            std::int64_t own_prb = 0;
            for (const auto* r : d.own[dir]) own_prb += r->prb;
            return static_cast<double>(d.other_prb[dir]) > cfg.cross_traffic_frac * static_cast<double>(own_prb);
        }
        case EventId::R16_CHANNEL_DEGRADED:
            return channel_degraded(d, sel.dir, cfg);
        case EventId::R17_HARQ_RETX: {
            const auto n = std::count_if(d.own[dir].begin(), d.own[dir].end(),
                                         [](const RanRecord* r) { return r->harq_retx; });
            return static_cast<double>(n) > cfg.harq_count;
        }
        case EventId::R18_RLC_RETX:
            return std::any_of(d.own[dir].begin(), d.own[dir].end(), [](const RanRecord* r) { return r->rlc_retx; });
        case EventId::S19_UL_SCHEDULING:
            return !d.own[static_cast<int>(Direction::UL)].empty();
        case EventId::S20_RRC_CHANGE:
            for (std::size_t i = 0; i + 1 < d.own_all.size(); ++i)
                if (d.own_all[i + 1]->rnti != d.own_all[i]->rnti) return true;
            return false;
    }
    return false;
}

}  // namespace

std::string to_string(const Selector& s) {
    switch (s.kind) {
        case Selector::Kind::SIDE: return domino::to_string(s.side);
        case Selector::Kind::DIR: return domino::to_string(s.dir);
        case Selector::Kind::NONE: break;
    }
    return "";
}

Selector::Kind selector_kind(EventId id) { return info(id).kind; }
const char* event_name(EventId id) { return info(id).name; }

std::optional<EventId> event_from_name(std::string_view name) {
    for (const auto& e : kEvents)
        if (name == e.name) return e.id;
    return std::nullopt;
}

int feature_slot(EventId id, Selector sel) {
    const int n = index_of(id);
    if (sel.kind != selector_kind(id))
        throw std::invalid_argument(
            fmt::format("event {} does not take selector '{}'", event_name(id), to_string(sel)));
    if (n <= 10) return 2 * (n - 1) + static_cast<int>(sel.side);
    if (n <= 12) return 20 + (n - 11);
    if (n <= 18) return 22 + 2 * (n - 13) + static_cast<int>(sel.dir);
    return 34 + (n - 19);
}

std::string SlotInfo::label() const {
    if (selector.kind == Selector::Kind::NONE) return event;
    return event + "." + to_string(selector);
}

std::vector<SlotInfo> builtin_layout() {
    std::vector<SlotInfo> out(kFeatureCount);
    for (const auto& e : kEvents) {
        switch (e.kind) {
            case Selector::Kind::SIDE:
                for (Side s : {Side::LOCAL, Side::REMOTE})
                    out[static_cast<std::size_t>(feature_slot(e.id, Selector::of(s)))] = {e.name, Selector::of(s)};
                break;
            case Selector::Kind::DIR:
                for (Direction d : {Direction::UL, Direction::DL})
                    out[static_cast<std::size_t>(feature_slot(e.id, Selector::of(d)))] = {e.name, Selector::of(d)};
                break;
            case Selector::Kind::NONE:
                out[static_cast<std::size_t>(feature_slot(e.id, Selector::none()))] = {e.name, Selector::none()};
                break;
        }
    }
    return out;
}

// ---- config ----

namespace {

struct ConfigField {
    const char* key;
    double DetectorConfig::*member;
};

constexpr std::array<ConfigField, 12> kConfigFields{{
    {"fps_hi", &DetectorConfig::fps_hi},
    {"fps_lo", &DetectorConfig::fps_lo},
    {"delay_hi_ms", &DetectorConfig::delay_hi_ms},
    {"tbs_drop_ratio", &DetectorConfig::tbs_drop_ratio},
    {"rate_gap_frac", &DetectorConfig::rate_gap_frac},
    {"cross_traffic_frac", &DetectorConfig::cross_traffic_frac},
    {"mcs_hi", &DetectorConfig::mcs_hi},
    {"mcs_lo", &DetectorConfig::mcs_lo},
    {"mcs_lo_count", &DetectorConfig::mcs_lo_count},
    {"mcs_bucket_ms", &DetectorConfig::mcs_bucket_ms},
    {"harq_count", &DetectorConfig::harq_count},
    {"trend_bucket", &DetectorConfig::trend_bucket},
}};

}  // namespace

DetectorConfig DetectorConfig::harq20() {
    DetectorConfig cfg;
    cfg.harq_count = 20;
    return cfg;
}

DetectorConfig DetectorConfig::from_kv(const KvConfig& kv) {
    DetectorConfig cfg;
    if (auto preset = kv.get("preset")) {
        if (*preset == "harq20") cfg = harq20();
        else if (*preset != "default") throw ConfigError(fmt::format("unknown preset '{}'", *preset), 0);
    }
    for (const auto& e : kv.entries()) {
        if (e.key == "preset") continue;
        auto it = std::find_if(kConfigFields.begin(), kConfigFields.end(),
                               [&](const ConfigField& f) { return e.key == f.key; });
        if (it == kConfigFields.end())
            throw ConfigError(fmt::format("line {}: unknown detector setting '{}'", e.line, e.key), e.line);
        cfg.*(it->member) = parse_double(e.value, e.key, e.line);
    }
    cfg.validate();
    return cfg;
}

DetectorConfig DetectorConfig::load(const std::filesystem::path& path) { return from_kv(KvConfig::load(path)); }

std::optional<double> DetectorConfig::get(std::string_view key) const {
    for (const auto& f : kConfigFields)
        if (key == f.key) return this->*(f.member);
    return std::nullopt;
}

const std::vector<std::string>& DetectorConfig::keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& f : kConfigFields) v.emplace_back(f.key);
        return v;
    }();
    return names;
}

void DetectorConfig::validate() const {
    for (const auto& f : kConfigFields)
        if (!(this->*(f.member) > 0) || !std::isfinite(this->*(f.member)))
            throw ConfigError(fmt::format("detector setting {} must be positive", f.key), 0);
    if (trend_bucket != std::floor(trend_bucket)) throw ConfigError("trend_bucket must be an integer", 0);
}

// ---- feature vectors ----

std::size_t FeatureVector::count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }

std::string FeatureVector::to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i]) s[i] = '1';
    return s;
}

FeatureVector FeatureVector::from_string(std::string_view bits) {
    FeatureVector fv(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] != '0' && bits[i] != '1') throw std::invalid_argument("feature string must be 0/1");
        fv.set(i, bits[i] == '1');
    }
    return fv;
}

bool detect(const WindowView& view, EventId id, Selector sel, const DetectorConfig& cfg) {
    return eval(prepare(view), id, sel, cfg);
}

FeatureVector featurize(const WindowView& view, const DetectorConfig& cfg) {
    const auto d = prepare(view);
    FeatureVector fv;
    for (const auto& e : kEvents) {
        switch (e.kind) {
            case Selector::Kind::SIDE:
                for (Side s : {Side::LOCAL, Side::REMOTE})
                    fv.set(static_cast<std::size_t>(feature_slot(e.id, Selector::of(s))),
                           eval(d, e.id, Selector::of(s), cfg));
                break;
            case Selector::Kind::DIR:
                for (Direction dir : {Direction::UL, Direction::DL})
                    fv.set(static_cast<std::size_t>(feature_slot(e.id, Selector::of(dir))),
                           eval(d, e.id, Selector::of(dir), cfg));
                break;
            case Selector::Kind::NONE:
                fv.set(static_cast<std::size_t>(feature_slot(e.id, Selector::none())),
                       eval(d, e.id, Selector::none(), cfg));
                break;
        }
    }
    return fv;
}

FeatureVector featurize(const Trace& trace, const Window& window, const DetectorConfig& cfg) {
    return featurize(slice(trace, window), cfg);
}

WindowPlan plan_windows(const Trace& trace, double length_s, double step_s) {
    if (!(length_s > 0)) throw std::invalid_argument("window length must be positive");
    if (!(step_s > 0)) throw std::invalid_argument("step must be positive");
    if (trace.empty()) throw std::invalid_argument("trace has no records");
    WindowPlan plan;
    const auto [first, last] = trace.span();
    const std::int64_t span_us = last.micros - first.micros;
    const std::int64_t len_us = seconds_to_micros(length_s);
    const std::int64_t step_us = seconds_to_micros(step_s);
    if (span_us < len_us) {
        plan.warnings.push_back(fmt::format("trace spans {:.3f} s, shorter than the {:.3f} s window; using one "
                                            "short window",
                                            static_cast<double>(span_us) * 1e-6, length_s));
        plan.windows.emplace_back(first, static_cast<double>(span_us + 1) * 1e-6);
        return plan;
    }
    const std::int64_t count = (span_us - len_us) / step_us + 1;
    plan.windows.reserve(static_cast<std::size_t>(count));
    for (std::int64_t k = 0; k < count; ++k) plan.windows.emplace_back(Timestamp{first.micros + k * step_us}, length_s);
    return plan;
}

std::vector<FeatureVector> evaluate_windows(const Trace& trace, const std::vector<Window>& windows,
                                            const WindowEvaluator& eval_fn, unsigned threads) {
    std::vector<FeatureVector> out(windows.size());
    auto run = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) out[i] = eval_fn(slice(trace, windows[i]));
    };
    threads = std::max(1u, threads);
    if (threads == 1 || windows.size() < 2) {
        run(0, windows.size());
        return out;
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, windows.size()));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (windows.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(windows.size(), lo + chunk);
        pool.emplace_back([&, t, lo, hi] {
            try {
                run(lo, hi);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::vector<WindowFeatures> featurize_all(const Trace& trace, const DetectorConfig& cfg, double length_s,
                                          double step_s, unsigned threads, std::vector<std::string>* warnings) {
    auto plan = plan_windows(trace, length_s, step_s);
    if (warnings) warnings->insert(warnings->end(), plan.warnings.begin(), plan.warnings.end());
    auto fvs = evaluate_windows(trace, plan.windows, [&](const WindowView& v) { return featurize(v, cfg); }, threads);
    std::vector<WindowFeatures> out;
    out.reserve(fvs.size());
    for (std::size_t i = 0; i < fvs.size(); ++i) out.push_back({plan.windows[i], std::move(fvs[i])});
    return out;
}

std::vector<std::optional<Timestamp>> slot_onsets(const Trace& trace, const Window& window,
                                                  const WindowEvaluator& eval_fn, std::int64_t grid_us) {
    if (grid_us <= 0) throw std::invalid_argument("onset grid must be positive");
    std::vector<std::optional<Timestamp>> onsets;
    const std::int64_t len_us = window.end().micros - window.start.micros;
    std::size_t pending = 0;
    for (std::int64_t prefix = grid_us;; prefix += grid_us) {
        const std::int64_t cut = std::min(prefix, len_us);
        const Window w(window.start, static_cast<double>(cut) * 1e-6);
        const auto fv = eval_fn(slice(trace, w));
        if (onsets.empty()) {
            onsets.resize(fv.size());
            pending = fv.size();
        }
        for (std::size_t i = 0; i < fv.size() && i < onsets.size(); ++i) {
            if (fv[i] && !onsets[i]) {
                onsets[i] = Timestamp{window.start.micros + cut};
                --pending;
            }
        }
        if (cut >= len_us || pending == 0) break;
    }
    return onsets;
}

double percentile_nearest_rank(std::vector<double> values, double p) {
    if (values.empty()) return kNaN;
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
    return values[rank - 1];
}

std::ptrdiff_t first_argmax(std::span<const double> v) {
    if (v.empty()) return -1;
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return static_cast<std::ptrdiff_t>(best);
}

std::ptrdiff_t first_argmin(std::span<const double> v) {
    if (v.empty()) return -1;
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[best]) best = i;
    return static_cast<std::ptrdiff_t>(best);
}

}  // namespace domino
