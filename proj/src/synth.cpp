#include "domino/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "domino/detector.hpp"
#include "domino/pipeline.hpp"

namespace domino {

const char* to_string(InjectKind k) {
    switch (k) {
        case InjectKind::NONE: return "none";
        case InjectKind::POOR_CHANNEL: return "poor_channel";
        case InjectKind::CROSS_TRAFFIC: return "cross_traffic";
        case InjectKind::HARQ_STORM: return "harq_storm";
        case InjectKind::RLC_RETX: return "rlc_retx";
        case InjectKind::RRC_TRANSITION: return "rrc_transition";
    }
    return "?";
}

const char* to_string(Routing r) {
    switch (r) {
        case Routing::JITTER_BUFFER: return "jb";
        case Routing::TARGET: return "target";
        case Routing::PUSHBACK: return "pushback";
    }
    return "?";
}

std::optional<InjectKind> inject_kind_from_string(std::string_view s) {
    for (auto k : {InjectKind::NONE, InjectKind::POOR_CHANNEL, InjectKind::CROSS_TRAFFIC, InjectKind::HARQ_STORM,
                   InjectKind::RLC_RETX, InjectKind::RRC_TRANSITION})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

std::optional<Routing> routing_from_string(std::string_view s) {
    for (auto r : {Routing::JITTER_BUFFER, Routing::TARGET, Routing::PUSHBACK})
        if (s == to_string(r)) return r;
    return std::nullopt;
}

const char* cause_id(InjectKind k) {
    switch (k) {
        case InjectKind::NONE: return "";
        case InjectKind::POOR_CHANNEL: return "poor_channel";
        case InjectKind::CROSS_TRAFFIC: return "cross_traffic";
        case InjectKind::HARQ_STORM: return "harq_retx";
        case InjectKind::RLC_RETX: return "rlc_retx";
        case InjectKind::RRC_TRANSITION: return "rrc_state";
    }
    return "";
}

double InjectedEvent::param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

double InjectedEvent::active_s(const CellProfile& cell) const {
    if (kind == InjectKind::RRC_TRANSITION) return (cell.rrc_blackout_ms + cell.rrc_setup_ms) / 1000.0;
    return duration_s;
}

// ---------------------------------------------------------------------------
// Scenario text

namespace {

const std::map<std::string, std::vector<std::string>>& kind_params() {
    static const std::map<std::string, std::vector<std::string>> m{
        {"none", {}},
        {"poor_channel", {"mcs_start", "mcs_end", "ramp_s", "prb"}},
        {"cross_traffic", {"other_prb", "own_prb"}},
        {"harq_storm", {"bler", "max_rounds"}},
        {"rlc_retx", {"interval_ms"}},
        {"rrc_transition", {}},
    };
    return m;
}

InjectedEvent parse_event(std::string_view text, int line) {
    InjectedEvent ev;
    bool have_kind = false, have_start = false, have_duration = false;
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError(fmt::format("line {}: expected key=value in event, got '{}'", line, tok), line);
        const auto key = tok.substr(0, eq);
        const auto val = tok.substr(eq + 1);
        if (key == "kind") {
            auto k = inject_kind_from_string(val);
            if (!k) throw ConfigError(fmt::format("line {}: unknown event kind '{}'", line, val), line);
            ev.kind = *k;
            have_kind = true;
        } else if (key == "start") {
            ev.start_s = parse_double(val, "start", line);
            have_start = true;
        } else if (key == "duration") {
            ev.duration_s = parse_double(val, "duration", line);
            have_duration = true;
        } else if (key == "dir") {
            if (val == "ul") ev.dir = Direction::UL;
            else if (val == "dl") ev.dir = Direction::DL;
            else throw ConfigError(fmt::format("line {}: dir must be ul or dl", line), line);
        } else if (key == "routing") {
            auto r = routing_from_string(val);
            if (!r) throw ConfigError(fmt::format("line {}: routing must be jb, target or pushback", line), line);
            ev.routing = *r;
        } else {
            ev.params[key] = parse_double(val, key, line);
        }
    }
    if (!have_kind) throw ConfigError(fmt::format("line {}: event needs kind=", line), line);
    if (!have_start) throw ConfigError(fmt::format("line {}: event needs start=", line), line);
    if (!have_duration && ev.kind != InjectKind::RRC_TRANSITION)
        throw ConfigError(fmt::format("line {}: event needs duration=", line), line);
    const auto& allowed = kind_params().at(to_string(ev.kind));
    for (const auto& [k, v] : ev.params)
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw ConfigError(fmt::format("line {}: {} takes no parameter '{}'", line, to_string(ev.kind), k), line);
    return ev;
}

}  // namespace

Scenario Scenario::parse(std::string_view text) {
    Scenario s;
    const auto cfg = KvConfig::parse(text);
    for (const auto& e : cfg.entries()) {
        const auto& k = e.key;
        const auto& v = e.value;
        const int ln = e.line;
        auto num = [&] { return parse_double(v, k, ln); };
        auto integer = [&] { return static_cast<int>(parse_int(v, k, ln)); };
        auto flag = [&] { return parse_bool(v, k, ln); };
        if (k == "event") s.events.push_back(parse_event(v, ln));
        else if (k == "name") s.name = v;
        else if (k == "duration_s") s.duration_s = num();
        else if (k == "seed") s.seed = static_cast<std::uint64_t>(parse_int(v, k, ln));
        else if (k == "base_delay_ms") s.base_delay_ms = num();
        else if (k == "delay_noise_ms") s.delay_noise_ms = num();
        else if (k == "warmup_s") s.warmup_s = num();
        else if (k == "fps") s.fps = num();
        else if (k == "packet_bytes") s.packet_bytes = integer();
        else if (k == "audio") s.audio = flag();
        else if (k == "app_interval_ms") s.app_interval_ms = num();
        else if (k == "rtcp_interval_ms") s.rtcp_interval_ms = num();
        else if (k == "start_rate_kbps") s.start_rate_bps = num() * 1e3;
        else if (k == "max_rate_kbps") s.gcc.max_rate_bps = num() * 1e3;
        else if (k == "min_rate_kbps") s.gcc.min_rate_bps = num() * 1e3;
        else if (k == "beta") s.gcc.beta = num();
        else if (k == "additive_kbps_per_s") s.gcc.additive_bps_per_s = num() * 1e3;
        else if (k == "fast_recovery") s.gcc.fast_recovery = flag();
        else if (k == "duplexing") s.cell.duplexing = v;
        else if (k == "bandwidth_mhz") s.cell.bandwidth_mhz = num();
        else if (k == "slot_ms") s.cell.slot_ms = num();
        else if (k == "tdd_pattern") s.cell.tdd_pattern = v;
        else if (k == "own_prb") s.cell.own_prb = integer();
        else if (k == "mcs_base") s.cell.mcs_base = integer();
        else if (k == "mcs_jitter") s.cell.mcs_jitter = integer();
        else if (k == "baseline_bler") s.cell.baseline_bler = num();
        else if (k == "ul_sched_min_ms") s.cell.ul_sched_min_ms = num();
        else if (k == "ul_sched_max_ms") s.cell.ul_sched_max_ms = num();
        else if (k == "harq_rtt_ms") s.cell.harq_rtt_ms = num();
        else if (k == "harq_max_attempts") s.cell.harq_max_attempts = integer();
        else if (k == "rlc_penalty_ms") s.cell.rlc_penalty_ms = num();
        else if (k == "rrc_blackout_ms") s.cell.rrc_blackout_ms = num();
        else if (k == "rrc_setup_ms") s.cell.rrc_setup_ms = num();
        else if (k == "proactive_grants") s.cell.proactive_grants = flag();
        else if (k == "proactive_gain_ms") s.cell.proactive_gain_ms = num();
        else if (k == "background_period_ms") s.cell.background_period_ms = num();
        else if (k == "background_prb") s.cell.background_prb = integer();
        else throw ConfigError(fmt::format("line {}: unknown scenario key '{}'", ln, k), ln);
    }
    s.validate();
    return s;
}

Scenario Scenario::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open scenario '{}'", path.string()), 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void Scenario::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("invalid scenario: " + m, 0); };
    if (!(duration_s > 0)) fail("duration_s must be positive");
    if (!(base_delay_ms >= 1)) fail("base_delay_ms must be at least 1");
    if (!(delay_noise_ms >= 0)) fail("delay_noise_ms must be non-negative");
    if (!(warmup_s >= 0)) fail("warmup_s must be non-negative");
    if (!(fps > 0 && fps <= 120)) fail("fps must be in (0, 120]");
    if (packet_bytes < 50) fail("packet_bytes must be at least 50");
    if (!(app_interval_ms > 0) || !(rtcp_interval_ms > 0)) fail("intervals must be positive");
    if (!(gcc.min_rate_bps > 0 && gcc.min_rate_bps <= gcc.max_rate_bps)) fail("rate bounds are inconsistent");
    if (!(gcc.beta > 0 && gcc.beta < 1)) fail("beta must be in (0, 1)");
    const auto& c = cell;
    if (c.duplexing != "tdd" && c.duplexing != "fdd") fail("duplexing must be tdd or fdd");
    if (!(c.slot_ms > 0)) fail("slot_ms must be positive");
    if (c.tdd_pattern.empty() || c.tdd_pattern.find_first_not_of("DSU") != std::string::npos)
        fail("tdd_pattern may contain only D, S and U");
    if (c.tdd_pattern.find('U') == std::string::npos || c.tdd_pattern.find('D') == std::string::npos)
        fail("tdd_pattern needs at least one D and one U slot");
    const double period = c.slot_ms * static_cast<double>(c.tdd_pattern.size());
    auto multiple = [&](double v) { return std::abs(v / period - std::round(v / period)) < 1e-9; };
    if (!(c.harq_rtt_ms > 0) || !multiple(c.harq_rtt_ms)) fail("harq_rtt_ms must be a positive multiple of the pattern period");
    if (!(c.rlc_penalty_ms > 0) || !multiple(c.rlc_penalty_ms)) fail("rlc_penalty_ms must be a positive multiple of the pattern period");
    if (!(c.rrc_blackout_ms > 0) || !multiple(c.rrc_blackout_ms)) fail("rrc_blackout_ms must be a positive multiple of the pattern period");
    if (!(c.rrc_setup_ms >= 0)) fail("rrc_setup_ms must be non-negative");
    if (c.harq_max_attempts < 2) fail("harq_max_attempts must be at least 2");
    if (!(c.ul_sched_min_ms >= 0 && c.ul_sched_max_ms - period >= c.ul_sched_min_ms))
        fail("ul scheduling range must be at least one pattern period wide");
    if (c.own_prb < 1 || c.mcs_base < 0 || c.mcs_base > 28 || c.mcs_jitter < 0) fail("bad own_prb or mcs");
    if (!(c.baseline_bler >= 0 && c.baseline_bler < 1)) fail("baseline_bler must be in [0, 1)");
    if (!(c.background_period_ms > 0) || c.background_prb < 0) fail("bad background traffic");
    for (const auto& e : events) {
        if (!(e.start_s >= 0)) fail("event start must be non-negative");
        if (e.kind != InjectKind::RRC_TRANSITION && !(e.duration_s > 0)) fail("event duration must be positive");
        if (e.start_s + e.active_s(cell) > duration_s + 1e-9)
            fail(fmt::format("{} event at {} s runs past the end", to_string(e.kind), e.start_s));
        if (e.kind == InjectKind::HARQ_STORM) {
            const double bler = e.param("bler", 0.75);
            if (!(bler >= 0 && bler < 1)) fail("bler must be in [0, 1)");
            const double rounds = e.param("max_rounds", c.harq_max_attempts - 1);
            if (rounds < 1 || rounds > c.harq_max_attempts - 1) fail("max_rounds must be below harq_max_attempts");
        }
        if (e.kind == InjectKind::RLC_RETX && !(e.param("interval_ms", 400) > 0)) fail("interval_ms must be positive");
        if (e.kind == InjectKind::POOR_CHANNEL) {
            const double a = e.param("mcs_start", 9), b = e.param("mcs_end", 6);
            if (a < 0 || a > 28 || b < 0 || b > 28) fail("mcs_start and mcs_end must be in [0, 28]");
            if (e.param("prb", 20) < 1) fail("prb must be positive");
        }
        if (e.kind == InjectKind::CROSS_TRAFFIC && (e.param("own_prb", 4) < 1 || e.param("other_prb", 30) < 0))
            fail("bad cross traffic prb");
    }
}

std::string Scenario::to_text() const {
    std::string out;
    auto kv = [&](std::string_view k, const std::string& v) { out += fmt::format("{} = {}\n", k, v); };
    auto d = [](double v) { return format_double(v); };
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    kv("name", name);
    kv("duration_s", d(duration_s));
    kv("seed", std::to_string(seed));
    kv("base_delay_ms", d(base_delay_ms));
    kv("delay_noise_ms", d(delay_noise_ms));
    kv("warmup_s", d(warmup_s));
    kv("fps", d(fps));
    kv("packet_bytes", std::to_string(packet_bytes));
    kv("audio", b(audio));
    kv("app_interval_ms", d(app_interval_ms));
    kv("rtcp_interval_ms", d(rtcp_interval_ms));
    kv("start_rate_kbps", d(start_rate_bps / 1e3));
    kv("max_rate_kbps", d(gcc.max_rate_bps / 1e3));
    kv("min_rate_kbps", d(gcc.min_rate_bps / 1e3));
    kv("beta", d(gcc.beta));
    kv("additive_kbps_per_s", d(gcc.additive_bps_per_s / 1e3));
    kv("fast_recovery", b(gcc.fast_recovery));
    kv("duplexing", cell.duplexing);
    kv("bandwidth_mhz", d(cell.bandwidth_mhz));
    kv("slot_ms", d(cell.slot_ms));
    kv("tdd_pattern", cell.tdd_pattern);
    kv("own_prb", std::to_string(cell.own_prb));
    kv("mcs_base", std::to_string(cell.mcs_base));
    kv("mcs_jitter", std::to_string(cell.mcs_jitter));
    kv("baseline_bler", d(cell.baseline_bler));
    kv("ul_sched_min_ms", d(cell.ul_sched_min_ms));
    kv("ul_sched_max_ms", d(cell.ul_sched_max_ms));
    kv("harq_rtt_ms", d(cell.harq_rtt_ms));
    kv("harq_max_attempts", std::to_string(cell.harq_max_attempts));
    kv("rlc_penalty_ms", d(cell.rlc_penalty_ms));
    kv("rrc_blackout_ms", d(cell.rrc_blackout_ms));
    kv("rrc_setup_ms", d(cell.rrc_setup_ms));
    kv("proactive_grants", b(cell.proactive_grants));
    kv("proactive_gain_ms", d(cell.proactive_gain_ms));
    kv("background_period_ms", d(cell.background_period_ms));
    kv("background_prb", std::to_string(cell.background_prb));
    for (const auto& e : events) {
        std::string line = fmt::format("kind={} start={}", to_string(e.kind), d(e.start_s));
        if (e.kind != InjectKind::RRC_TRANSITION) line += fmt::format(" duration={}", d(e.duration_s));
        line += fmt::format(" dir={} routing={}", to_string(e.dir), to_string(e.routing));
        for (const auto& [k, v] : e.params) line += fmt::format(" {}={}", k, d(v));
        kv("event", line);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ground truth

GroundTruth ground_truth(const Scenario& s) {
    GroundTruth gt;
    gt.scenario = s.name;
    gt.seed = s.seed;
    gt.duration_s = s.duration_s;
    const auto layout = builtin_layout();
    for (const auto& e : s.events) {
        if (e.kind == InjectKind::NONE) continue;
        TruthEvent t;
        t.kind = e.kind;
        t.start_s = e.start_s;
        t.end_s = e.start_s + e.active_s(s.cell);
        t.dir = e.dir;
        t.routing = e.routing;
        t.causes.push_back(cause_id(e.kind));
        // An RLC retransmission follows exhausted HARQ rounds, so the HARQ
        // bit fires alongside it.
        if (e.kind == InjectKind::RLC_RETX) t.causes.push_back("harq_retx");
        std::vector<std::string> path{cause_id(e.kind)};
        if (e.kind == InjectKind::POOR_CHANNEL || e.kind == InjectKind::CROSS_TRAFFIC) {
            path.push_back("tbs_drop");
            path.push_back("rate_gap");
        }
        switch (e.routing) {
            case Routing::JITTER_BUFFER:
                path.insert(path.end(), {"fwd_delay_up", "jb_drain"});
                t.media_dir = e.dir;
                break;
            case Routing::TARGET:
                path.insert(path.end(), {"fwd_delay_up", "gcc_overuse", "target_bitrate_drop"});
                t.media_dir = e.dir;
                break;
            case Routing::PUSHBACK:
                path.insert(path.end(), {"rev_delay_up", "outstanding_up", "cwnd_full", "pushback_rate_drop"});
                t.media_dir = opposite(e.dir);
                break;
        }
        t.consequences.push_back(path.back());
        t.chains.push_back({path});
        ChainMatcher m(default_graph(), t.chains, builtin_resolver());
        for (int slot : m.slots(0, t.media_dir)) t.expected_bits.push_back(layout.at(slot).label());
        gt.events.push_back(std::move(t));
    }
    return gt;
}

void GroundTruth::write_json(std::ostream& out) const {
    nlohmann::ordered_json j;
    j["scenario"] = scenario;
    j["seed"] = seed;
    j["duration_s"] = duration_s;
    auto& evs = j["events"] = nlohmann::ordered_json::array();
    for (const auto& e : events) {
        nlohmann::ordered_json r;
        r["kind"] = to_string(e.kind);
        r["start_s"] = e.start_s;
        r["end_s"] = e.end_s;
        r["dir"] = to_string(e.dir);
        r["routing"] = to_string(e.routing);
        r["causes"] = e.causes;
        r["consequences"] = e.consequences;
        r["media_dir"] = to_string(e.media_dir);
        auto& ch = r["chains"] = nlohmann::ordered_json::array();
        for (const auto& c : e.chains) ch.push_back(c.nodes);
        r["expected_bits"] = e.expected_bits;
        evs.push_back(std::move(r));
    }
    out << j.dump(2) << '\n';
}

GroundTruth GroundTruth::read_json(std::istream& in) {
    try {
        const auto j = nlohmann::json::parse(in);
        GroundTruth gt;
        gt.scenario = j.at("scenario").get<std::string>();
        gt.seed = j.at("seed").get<std::uint64_t>();
        gt.duration_s = j.at("duration_s").get<double>();
        auto dir = [](const std::string& s) {
            if (s == "ul") return Direction::UL;
            if (s == "dl") return Direction::DL;
            throw std::runtime_error("bad direction '" + s + "'");
        };
        for (const auto& r : j.at("events")) {
            TruthEvent e;
            auto k = inject_kind_from_string(r.at("kind").get<std::string>());
            auto rt = routing_from_string(r.at("routing").get<std::string>());
            if (!k || !rt) throw std::runtime_error("bad kind or routing");
            e.kind = *k;
            e.routing = *rt;
            e.start_s = r.at("start_s").get<double>();
            e.end_s = r.at("end_s").get<double>();
            e.dir = dir(r.at("dir").get<std::string>());
            e.media_dir = dir(r.at("media_dir").get<std::string>());
            e.causes = r.at("causes").get<std::vector<std::string>>();
            e.consequences = r.at("consequences").get<std::vector<std::string>>();
            for (const auto& c : r.at("chains")) e.chains.push_back({c.get<std::vector<std::string>>()});
            e.expected_bits = r.at("expected_bits").get<std::vector<std::string>>();
            gt.events.push_back(std::move(e));
        }
        return gt;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("ground truth: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

// 38.214 Table 5.1.3.1-1: modulation order and target code rate x 1024.
constexpr int kMcs[29][2] = {{2, 120}, {2, 157}, {2, 193}, {2, 251}, {2, 308}, {2, 379}, {2, 449}, {2, 526},
                             {2, 602}, {2, 679}, {4, 340}, {4, 378}, {4, 434}, {4, 490}, {4, 553}, {4, 616},
                             {4, 658}, {6, 438}, {6, 466}, {6, 517}, {6, 567}, {6, 616}, {6, 666}, {6, 719},
                             {6, 772}, {6, 822}, {6, 873}, {6, 910}, {6, 948}};

std::int64_t tbs_bits(int prb, int mcs) {
    mcs = std::clamp(mcs, 0, 28);
    const double bits = static_cast<double>(prb) * 144.0 * kMcs[mcs][0] * kMcs[mcs][1] / 1024.0;
    return static_cast<std::int64_t>(bits / 8.0) * 8;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : g_(seed) {}
    double uniform() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u = uniform();
        while (u <= 0) u = uniform();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        spare_ = r * std::sin(2 * std::numbers::pi * v);
        have_spare_ = true;
        return r * std::cos(2 * std::numbers::pi * v);
    }

private:
    std::mt19937_64 g_;
    bool have_spare_ = false;
    double spare_ = 0;
};

constexpr std::int32_t kAudio = -1;
constexpr std::int32_t kRtcp = -2;

struct QEntry {
    std::int32_t id;
    std::int32_t remaining;
    std::int64_t done_max;
};

struct Link {
    Direction dir;
    std::deque<QEntry> queue;
    bool grant_active = false;
    std::int64_t grant_ready = 0;
    bool proactive_next = false;
    std::unordered_map<std::int64_t, RanRecord> reserved;  // slot index -> retransmission
    std::int64_t barrier = 0;
    std::int64_t last_background = -1'000'000'000;
};

struct FrameInfo {
    std::int64_t send_us;
    std::int32_t packets;
    std::int32_t delivered = 0;
    std::int32_t reported = 0;
    std::int64_t max_recv = 0;
};

struct Sender {
    explicit Sender(GccModel m) : gcc(std::move(m)) {}
    GccModel gcc;
    std::int64_t frame_index = 0;
    std::int64_t audio_index = 0;
    bool last_skipped = false;
    std::vector<FrameInfo> frames;
    std::deque<std::pair<std::int64_t, std::int64_t>> sent;   // (time, bytes) over the last second
    std::int64_t sent_bytes = 0;
    std::deque<std::pair<std::int64_t, std::int64_t>> acked;  // (time, bytes)
    std::int64_t acked_bytes = 0;
    std::deque<std::int64_t> frame_times;
    double last_step_us = 0;
    bool overuse_seen = false;
    int res_height = 720;
};

struct Receiver {
    JitterBuffer jb;
    std::vector<FrameArrival> pending;
    std::vector<std::int32_t> unreported;
    std::deque<std::int64_t> rendered_hist;  // cumulative rendered at each app tick
};

struct ActiveEvent {
    const InjectedEvent* ev;
    std::int64_t start;
    std::int64_t end;
    std::int64_t blackout_end = 0;  // RRC only
    std::int64_t next_rlc = 0;      // RLC only, per event
};

int res_for(double bps, int current) {
    static const std::pair<double, int> ladder[] = {{1.5e6, 720}, {0.8e6, 540}, {0.4e6, 360}, {0, 270}};
    int target = 270;
    for (const auto& [thr, h] : ladder)
        if (bps >= thr) {
            target = h;
            break;
        }
    if (target >= current) {
        // Step up only with headroom.
        for (const auto& [thr, h] : ladder)
            if (h > current && h <= target && bps >= thr * 1.15) return h;
        return current;
    }
    return target;
}

class Simulator {
public:
    explicit Simulator(const Scenario& s)
        : s_(s), rng_(s.seed * 0x9E3779B97F4A7C15ull + 0x632BE59BD9B4E019ull),
          senders_{Sender(GccModel(s.gcc, s.start_rate_bps)), Sender(GccModel(s.gcc, s.start_rate_bps))} {
        for (auto& r : receivers_) r.jb.params = s.jitter;
        for (auto& r : receivers_) r.jb.target_ms = s.jitter.base_ms;
        links_[0].dir = Direction::UL;
        links_[1].dir = Direction::DL;
        slot_us_ = seconds_to_micros(s.cell.slot_ms / 1000.0);
        pattern_ = s.cell.tdd_pattern;
        period_us_ = slot_us_ * static_cast<std::int64_t>(pattern_.size());
        dl_own_ = static_cast<int>(pattern_.find('D'));
        ul_own_ = static_cast<int>(pattern_.find('U'));
        dl_bg_ = dl_own_;
        for (int i = 0; i < static_cast<int>(pattern_.size()); ++i)
            if (i != dl_own_ && pattern_[i] != 'U') {
                dl_bg_ = i;
                break;
            }
        warmup_us_ = seconds_to_micros(s.warmup_s);
        end_us_ = warmup_us_ + seconds_to_micros(s.duration_s);
        rnti_ = 0x4601 + rng_.integer(0, 0x0fff);
        for (const auto& e : s.events) {
            if (e.kind == InjectKind::NONE) continue;
            ActiveEvent a{&e, warmup_us_ + seconds_to_micros(e.start_s), 0};
            if (e.kind == InjectKind::RRC_TRANSITION) {
                // Align the release to an own downlink slot so the blackout
                // spans whole pattern periods.
                const std::int64_t off = dl_own_ * slot_us_;
                a.start = ((a.start - off + period_us_ - 1) / period_us_) * period_us_ + off;
                a.blackout_end = a.start + seconds_to_micros(s.cell.rrc_blackout_ms / 1000.0);
                a.end = a.blackout_end + seconds_to_micros(s.cell.rrc_setup_ms / 1000.0);
            } else {
                a.end = a.start + seconds_to_micros(e.duration_s);
            }
            a.next_rlc = a.start;
            events_.push_back(a);
        }
    }

    Trace run() {
        const std::int64_t drain_us = 3'000'000;
        const double frame_us = 1e6 / s_.fps;
        const auto app_us = seconds_to_micros(s_.app_interval_ms / 1000.0);
        const auto rtcp_us = seconds_to_micros(s_.rtcp_interval_ms / 1000.0);
        std::int64_t next_app = 0, next_rtcp = 0;
        for (std::int64_t n = 0;; ++n) {
            const std::int64_t t = n * slot_us_;
            if (t >= end_us_ + drain_us) break;
            const bool live = t < end_us_;
            deliver_until(t);
            if (live) {
                for (int side = 0; side < 2; ++side) {
                    auto& snd = senders_[side];
                    while (true) {
                        const auto ft = static_cast<std::int64_t>(std::llround(snd.frame_index * frame_us));
                        if (ft > t) break;
                        send_frame(static_cast<Side>(side), ft);
                        ++snd.frame_index;
                    }
                    while (s_.audio && snd.audio_index * 20'000 <= t) {
                        send_packet(static_cast<Side>(side), PacketKind::MEDIA, 100, kAudio, snd.audio_index * 20'000);
                        ++snd.audio_index;
                    }
                }
                while (next_rtcp <= t) {
                    for (int side = 0; side < 2; ++side) send_rtcp(static_cast<Side>(side), next_rtcp);
                    next_rtcp += rtcp_us;
                }
                while (next_app <= t) {
                    for (int side = 0; side < 2; ++side) app_tick(static_cast<Side>(side), next_app);
                    next_app += app_us;
                }
            }
            while (!dl_pending_.empty() && dl_pending_.top().first <= t) {
                const auto id = dl_pending_.top().second;
                dl_pending_.pop();
                enqueue(links_[1], id, dl_arrival_[id]);
            }
            radio_slot(n, t, live);
        }
        return finish();
    }

private:
    // -- packet plumbing ----------------------------------------------------

    double wired_us() {
        double ms = s_.base_delay_ms;
        if (s_.delay_noise_ms > 0) ms += s_.delay_noise_ms * rng_.normal();
        ms = std::max(ms, 1.0);
        return ms * 1000.0;
    }

    std::int32_t send_packet(Side side, PacketKind kind, std::int32_t size, std::int32_t meta, std::int64_t ts) {
        const auto id = static_cast<std::int32_t>(packets_.size());
        const Direction dir = side == Side::LOCAL ? Direction::UL : Direction::DL;
        packets_.push_back(PacketRecord{Timestamp{ts}, Timestamp{0}, dir, size, kind});
        meta_.push_back(meta);
        if (kind == PacketKind::MEDIA) {
            auto& snd = senders_[static_cast<int>(side)];
            snd.gcc.on_sent(size);
            snd.sent.emplace_back(ts, size);
            snd.sent_bytes += size;
        }
        if (dir == Direction::UL) {
            enqueue(links_[0], id, ts);
        } else {
            const auto arrival = ts + static_cast<std::int64_t>(std::llround(wired_us()));
            if (dl_arrival_.size() <= static_cast<std::size_t>(id)) dl_arrival_.resize(id + 1024);
            dl_arrival_[id] = arrival;
            dl_pending_.emplace(arrival, id);
        }
        return id;
    }

    void send_frame(Side side, std::int64_t ts) {
        auto& snd = senders_[static_cast<int>(side)];
        if (static_cast<double>(snd.gcc.outstanding_bytes()) > snd.gcc.cwnd_bytes() && !snd.last_skipped) {
            snd.last_skipped = true;
            return;
        }
        snd.last_skipped = false;
        const auto bytes = std::max<std::int64_t>(200, std::llround(snd.gcc.pushback_bps() / 8.0 / s_.fps));
        const auto count = static_cast<std::int32_t>((bytes + s_.packet_bytes - 1) / s_.packet_bytes);
        const auto frame = static_cast<std::int32_t>(snd.frames.size());
        snd.frames.push_back(FrameInfo{ts, count});
        snd.frame_times.push_back(ts);
        std::int64_t left = bytes;
        for (std::int32_t i = 0; i < count; ++i) {
            const auto size = static_cast<std::int32_t>(std::min<std::int64_t>(left, s_.packet_bytes));
            left -= size;
            send_packet(side, PacketKind::MEDIA, size, frame, ts);
        }
    }

    void send_rtcp(Side side, std::int64_t ts) {
        auto& rx = receivers_[static_cast<int>(side)];
        const auto size = static_cast<std::int32_t>(40 + 4 * rx.unreported.size());
        const auto id = send_packet(side, PacketKind::RTCP, size, kRtcp, ts);
        rtcp_payload_[id] = std::move(rx.unreported);
        rx.unreported.clear();
    }

    void enqueue(Link& link, std::int32_t id, std::int64_t t) {
        if (link.dir == Direction::UL && link.queue.empty() && !link.grant_active) {
            // Scheduling request, answered after the gNB's grant latency.
            const double period_ms = static_cast<double>(period_us_) / 1000.0;
            double wait_ms = rng_.uniform(s_.cell.ul_sched_min_ms, s_.cell.ul_sched_max_ms - period_ms);
            if (s_.cell.proactive_grants) wait_ms = std::max(0.0, wait_ms - s_.cell.proactive_gain_ms);
            link.grant_ready = t + static_cast<std::int64_t>(std::llround(wait_ms * 1000.0));
            link.grant_active = true;
            link.proactive_next = s_.cell.proactive_grants;
        }
        link.queue.push_back(QEntry{id, packets_[id].size_bytes, 0});
    }

    void complete(const Link& link, std::int32_t id, std::int64_t done) {
        auto& p = packets_[id];
        const auto recv = link.dir == Direction::UL ? done + static_cast<std::int64_t>(std::llround(wired_us())) : done;
        p.recv_ts = Timestamp{recv};
        arrivals_.emplace(recv, id);
    }

    // -- radio ----------------------------------------------------------------

    const ActiveEvent* active(InjectKind k, Direction d, std::int64_t t) {
        for (auto& a : events_)
            if (a.ev->kind == k && t >= a.start && t < a.end && (k == InjectKind::RRC_TRANSITION || a.ev->dir == d))
                return &a;
        return nullptr;
    }

    void emit(const RanRecord& r) {
        if (r.ts.micros >= warmup_us_ && r.ts.micros < end_us_) ran_.push_back(r);
    }

    RanRecord own_record(std::int64_t t, Direction d, int prb, int mcs) const {
        RanRecord r;
        r.ts = Timestamp{t};
        r.dir = d;
        r.rnti = rnti_;
        r.prb = prb;
        r.mcs = mcs;
        r.tbs_bits = tbs_bits(prb, mcs);
        r.is_own_ue = true;
        return r;
    }

    void background(Link& link, std::int64_t t, int prb) {
        RanRecord r;
        r.ts = Timestamp{t};
        r.dir = link.dir;
        r.rnti = 0x1000 + rng_.integer(0, 0x0fff);
        r.prb = prb;
        r.mcs = std::clamp(s_.cell.mcs_base + rng_.integer(-4, 4), 0, 28);
        r.tbs_bits = tbs_bits(prb, r.mcs);
        r.is_own_ue = false;
        emit(r);
    }

    void radio_slot(std::int64_t n, std::int64_t t, bool live) {
        const int pos = static_cast<int>(n % static_cast<std::int64_t>(pattern_.size()));
        if (live && pos == dl_bg_ && t - links_[1].last_background >= bg_period()) {
            background(links_[1], t, s_.cell.background_prb);
            links_[1].last_background = t;
        }
        if (pos == dl_own_) own_slot(links_[1], n, t, live);
        if (pos == ul_own_) {
            if (live && t - links_[0].last_background >= bg_period()) {
                background(links_[0], t, s_.cell.background_prb);
                links_[0].last_background = t;
            }
            own_slot(links_[0], n, t, live);
        }
    }

    std::int64_t bg_period() const { return seconds_to_micros(s_.cell.background_period_ms / 1000.0); }

    void own_slot(Link& link, std::int64_t n, std::int64_t t, bool live) {
        const Direction d = link.dir;
        if (const auto* rrc = active(InjectKind::RRC_TRANSITION, d, t)) {
            if (t == rrc->start && d == Direction::DL) emit(own_record(t, d, 2, 4));  // release
            if (t >= rrc->blackout_end) {
                if (t < rrc->blackout_end + period_us_ && rrc_rnti_switched_ != rrc->start) {
                    rnti_ = 0x4601 + ((rnti_ - 0x4601 + 1 + rng_.integer(0, 0x0ffe)) % 0x1000);
                    rrc_rnti_switched_ = rrc->start;
                }
                emit(own_record(t, d, 2, 4));  // reconnection signalling
            }
            // Retransmissions due during the outage are lost to it; the
            // data was already accounted for.
            link.reserved.erase(n);
            if (d == Direction::UL && link.grant_active) link.grant_ready = std::max(link.grant_ready, rrc->end);
            return;
        }
        if (auto it = link.reserved.find(n); it != link.reserved.end()) {
            emit(it->second);
            link.reserved.erase(it);
            return;
        }
        if (!live && link.queue.empty()) return;

        int prb = s_.cell.own_prb;
        int mcs = std::clamp(s_.cell.mcs_base + rng_.integer(-s_.cell.mcs_jitter, s_.cell.mcs_jitter), 0, 28);
        if (const auto* ct = active(InjectKind::CROSS_TRAFFIC, d, t)) {
            prb = static_cast<int>(ct->ev->param("own_prb", 4));
            if (live) background(link, t, static_cast<int>(ct->ev->param("other_prb", 30)));
        }
        if (const auto* pc = active(InjectKind::POOR_CHANNEL, d, t)) {
            const double a = pc->ev->param("mcs_start", 9), b = pc->ev->param("mcs_end", 6);
            const double ramp = pc->ev->param("ramp_s", 0.75 * pc->ev->duration_s);
            const double f = ramp > 0 ? std::min(1.0, static_cast<double>(t - pc->start) / (ramp * 1e6)) : 1.0;
            mcs = static_cast<int>(std::lround(a + (b - a) * f));
            prb = static_cast<int>(pc->ev->param("prb", 20));
        }

        if (link.queue.empty()) return;
        if (d == Direction::UL && (!link.grant_active || link.grant_ready > t)) return;

        auto rec = own_record(t, d, prb, mcs);
        if (d == Direction::UL && link.proactive_next) {
            rec.proactive_grant = true;
            link.proactive_next = false;
        }

        // HARQ fate of this transport block.
        const int max_attempts = s_.cell.harq_max_attempts;
        double bler = s_.cell.baseline_bler;
        int max_rounds = max_attempts - 1;
        if (const auto* hs = active(InjectKind::HARQ_STORM, d, t)) {
            bler = hs->ev->param("bler", 0.75);
            max_rounds = static_cast<int>(hs->ev->param("max_rounds", max_attempts - 1));
        }
        int rounds = 0;
        while (rounds < max_rounds && rng_.uniform() < bler) ++rounds;
        bool rlc = false;
        for (auto& a : events_)
            if (a.ev->kind == InjectKind::RLC_RETX && a.ev->dir == d && t >= a.start && t < a.end && t >= a.next_rlc) {
                rlc = true;
                a.next_rlc += seconds_to_micros(a.ev->param("interval_ms", 400) / 1000.0);
            }
        if (rlc) rounds = max_attempts - 1;

        const auto rtt_us = seconds_to_micros(s_.cell.harq_rtt_ms / 1000.0);
        const auto rtt_slots = rtt_us / slot_us_;
        for (int k = 1; k <= rounds; ++k) {
            auto retx = rec;
            retx.ts = Timestamp{t + k * rtt_us};
            retx.harq_retx = true;
            retx.proactive_grant = false;
            link.reserved.emplace(n + k * rtt_slots, retx);
        }
        std::int64_t deliver = t + slot_us_ + rounds * rtt_us;
        if (rlc) {
            const auto penalty = seconds_to_micros(s_.cell.rlc_penalty_ms / 1000.0);
            auto r = rec;
            r.ts = Timestamp{t + penalty};
            r.rlc_retx = true;
            r.proactive_grant = false;
            emit(r);
            deliver = t + slot_us_ + penalty;
            link.barrier = std::max(link.barrier, deliver);
        }
        emit(rec);

        auto bytes = rec.tbs_bits / 8;
        while (bytes > 0 && !link.queue.empty()) {
            auto& e = link.queue.front();
            const auto take = std::min<std::int64_t>(bytes, e.remaining);
            e.remaining -= static_cast<std::int32_t>(take);
            bytes -= take;
            e.done_max = std::max(e.done_max, deliver);
            if (e.remaining == 0) {
                // In-order delivery holds everything behind an RLC recovery.
                complete(link, e.id, std::max(e.done_max, link.barrier));
                link.queue.pop_front();
            }
        }
        if (link.queue.empty()) link.grant_active = false;
    }

    // -- endpoints -----------------------------------------------------------

    void deliver_until(std::int64_t t) {
        while (!arrivals_.empty() && arrivals_.top().first <= t) {
            const auto [recv, id] = arrivals_.top();
            arrivals_.pop();
            const auto& p = packets_[id];
            const Side receiver = p.dir == Direction::UL ? Side::REMOTE : Side::LOCAL;
            if (p.kind == PacketKind::MEDIA) {
                auto& rx = receivers_[static_cast<int>(receiver)];
                rx.unreported.push_back(id);
                const auto meta = meta_[id];
                if (meta >= 0) {
                    auto& f = senders_[static_cast<int>(opposite(receiver))].frames[meta];
                    ++f.delivered;
                    f.max_recv = std::max(f.max_recv, recv);
                    if (f.delivered == f.packets)
                        rx.pending.push_back({static_cast<double>(f.max_recv) / 1000.0,
                                              static_cast<double>(f.max_recv - f.send_us) / 1000.0});
                }
            } else {
                on_feedback(receiver, id, recv);
            }
        }
    }

    void on_feedback(Side side, std::int32_t rtcp_id, std::int64_t now) {
        auto& snd = senders_[static_cast<int>(side)];
        auto it = rtcp_payload_.find(rtcp_id);
        GccFeedback fb;
        if (it != rtcp_payload_.end()) {
            std::int64_t newest = -1;
            for (auto id : it->second) {
                const auto& p = packets_[id];
                fb.acked_bytes += p.size_bytes;
                newest = std::max(newest, p.send_ts.micros);
                const auto meta = meta_[id];
                if (meta >= 0) {
                    auto& f = snd.frames[meta];
                    if (++f.reported == f.packets)
                        fb.groups.push_back({static_cast<double>(f.send_us) / 1000.0,
                                             static_cast<double>(f.max_recv) / 1000.0});
                }
            }
            if (newest >= 0) fb.rtt_ms = static_cast<double>(now - newest) / 1000.0;
            rtcp_payload_.erase(it);
        }
        std::sort(fb.groups.begin(), fb.groups.end(),
                  [](const DelaySample& a, const DelaySample& b) { return a.arrival_ms < b.arrival_ms; });
        snd.acked.emplace_back(now, fb.acked_bytes);
        snd.acked_bytes += fb.acked_bytes;
        while (!snd.acked.empty() && snd.acked.front().first <= now - 1'000'000) {
            snd.acked_bytes -= snd.acked.front().second;
            snd.acked.pop_front();
        }
        fb.acked_bps = static_cast<double>(snd.acked_bytes) * 8.0;
        step_gcc(snd, fb, now);
    }

    void step_gcc(Sender& snd, const GccFeedback& fb, std::int64_t now) {
        const double dt = std::max(1e-6, static_cast<double>(now - snd.last_step_us) / 1e6);
        snd.last_step_us = static_cast<double>(std::max<std::int64_t>(now, static_cast<std::int64_t>(snd.last_step_us)));
        snd.gcc.step(fb, dt);
        if (snd.gcc.state() == GccState::OVERUSE) snd.overuse_seen = true;
    }

    void app_tick(Side side, std::int64_t t) {
        const int si = static_cast<int>(side);
        auto& snd = senders_[si];
        auto& rx = receivers_[si];
        step_gcc(snd, GccFeedback{}, t);

        const double now_ms = static_cast<double>(t) / 1000.0;
        if (now_ms > rx.jb.now_ms) jitter_buffer_step(rx.jb, rx.pending, now_ms - rx.jb.now_ms);
        rx.pending.clear();

        rx.rendered_hist.push_back(rx.jb.rendered);
        const auto per_s = static_cast<std::size_t>(std::llround(1000.0 / s_.app_interval_ms));
        while (rx.rendered_hist.size() > per_s + 1) rx.rendered_hist.pop_front();
        const double in_fps = rx.rendered_hist.size() > per_s
                                  ? static_cast<double>(rx.rendered_hist.back() - rx.rendered_hist.front())
                                  : s_.fps;

        while (!snd.frame_times.empty() && snd.frame_times.front() <= t - 1'000'000) snd.frame_times.pop_front();
        while (!snd.sent.empty() && snd.sent.front().first <= t - 1'000'000) {
            snd.sent_bytes -= snd.sent.front().second;
            snd.sent.pop_front();
        }
        const bool warm = t >= 1'000'000;

        AppRecord a;
        a.ts = Timestamp{t};
        a.side = side;
        a.in_fps = in_fps;
        a.out_fps = warm ? static_cast<double>(snd.frame_times.size()) : s_.fps;
        snd.res_height = res_for(snd.gcc.pushback_bps(), snd.res_height);
        a.out_res_height = snd.res_height;
        a.jitter_buffer_ms = rx.jb.level_ms;
        a.target_bitrate_bps = std::round(snd.gcc.target_bps());
        a.pushback_rate_bps = std::round(snd.gcc.pushback_bps());
        a.gcc_state = snd.overuse_seen ? GccState::OVERUSE : snd.gcc.state();
        snd.overuse_seen = false;
        a.outstanding_bytes = snd.gcc.outstanding_bytes();
        a.cwnd_bytes = std::max<std::int64_t>(1, std::llround(snd.gcc.cwnd_bytes()));
        a.app_send_rate_bps = warm ? static_cast<double>(snd.sent_bytes) * 8.0 : snd.gcc.target_bps();
        if (t >= warmup_us_ && t < end_us_) app_.push_back(a);
    }

    Trace finish() {
        Trace tr;
        tr.meta.cell_name = "synthetic";
        tr.meta.duplexing = s_.cell.duplexing;
        tr.meta.bandwidth_mhz = s_.cell.bandwidth_mhz;
        const auto shift = [&](Timestamp ts) { return Timestamp{ts.micros - warmup_us_}; };
        tr.ran.reserve(ran_.size());
        for (auto r : ran_) {
            r.ts = shift(r.ts);
            tr.ran.push_back(r);
        }
        std::stable_sort(tr.ran.begin(), tr.ran.end(),
                         [](const RanRecord& a, const RanRecord& b) { return a.ts < b.ts; });
        for (const auto& p : packets_) {
            if (p.send_ts.micros < warmup_us_ || p.send_ts.micros >= end_us_) continue;
            if (p.recv_ts.micros == 0) continue;  // still queued when the simulation stopped
            auto q = p;
            q.send_ts = shift(q.send_ts);
            q.recv_ts = shift(q.recv_ts);
            tr.packets.push_back(q);
        }
        std::stable_sort(tr.packets.begin(), tr.packets.end(),
                         [](const PacketRecord& a, const PacketRecord& b) { return a.send_ts < b.send_ts; });
        for (auto a : app_) {
            a.ts = shift(a.ts);
            tr.app.push_back(a);
        }
        return tr;
    }

    const Scenario& s_;
    Rng rng_;
    std::array<Sender, 2> senders_;  // by Side
    std::array<Receiver, 2> receivers_;
    std::array<Link, 2> links_;      // by Direction
    std::vector<ActiveEvent> events_;
    std::int64_t slot_us_ = 500;
    std::int64_t period_us_ = 2500;
    std::string pattern_;
    int dl_own_ = 0, ul_own_ = 4, dl_bg_ = 1;
    std::int64_t warmup_us_ = 0;
    std::int64_t end_us_ = 0;
    std::int64_t rnti_ = 0x4601;
    std::int64_t rrc_rnti_switched_ = -1;

    std::vector<PacketRecord> packets_;
    std::vector<std::int32_t> meta_;
    std::vector<std::int64_t> dl_arrival_;
    std::unordered_map<std::int32_t, std::vector<std::int32_t>> rtcp_payload_;
    using Arrival = std::pair<std::int64_t, std::int32_t>;
    std::priority_queue<Arrival, std::vector<Arrival>, std::greater<>> arrivals_;
    std::priority_queue<Arrival, std::vector<Arrival>, std::greater<>> dl_pending_;
    std::vector<RanRecord> ran_;
    std::vector<AppRecord> app_;
};

}  // namespace

SynthResult generate(const Scenario& scenario) {
    scenario.validate();
    Simulator sim(scenario);
    SynthResult r;
    r.trace = sim.run();
    r.truth = ground_truth(scenario);
    return r;
}

// ---------------------------------------------------------------------------
// Scoring

double Score::recall() const {
    return events == 0 ? 1.0 : static_cast<double>(recalled) / static_cast<double>(events);
}

double Score::precision() const {
    return matches == 0 ? 1.0 : static_cast<double>(true_matches) / static_cast<double>(matches);
}

Score score(const DetectionRun& run, const GroundTruth& truth, double tail_s) {
    Score sc;
    sc.events = truth.events.size();
    auto overlaps = [&](const Window& w, const TruthEvent& e) {
        const double ws = w.start.seconds();
        const double we = w.end().seconds();
        return ws < e.end_s + tail_s && we > e.start_s;
    };
    std::vector<bool> recalled(truth.events.size(), false);
    for (const auto& w : run.windows) {
        for (Direction d : {Direction::UL, Direction::DL}) {
            for (auto c : w.matched[static_cast<int>(d)]) {
                const auto& path = run.chains.at(c);
                for (std::size_t i = 0; i < truth.events.size(); ++i) {
                    const auto& e = truth.events[i];
                    if (e.media_dir != d || !overlaps(w.window, e)) continue;
                    if (std::find(e.chains.begin(), e.chains.end(), path) != e.chains.end()) recalled[i] = true;
                }
                if (path.cause() == "ul_scheduling") continue;
                ++sc.matches;
                for (const auto& e : truth.events)
                    if (overlaps(w.window, e) && std::find(e.causes.begin(), e.causes.end(), path.cause()) != e.causes.end()) {
                        ++sc.true_matches;
                        break;
                    }
            }
        }
    }
    sc.recalled = static_cast<std::size_t>(std::count(recalled.begin(), recalled.end(), true));
    return sc;
}

Scenario injection_scenario(InjectKind kind, Routing routing, std::uint64_t seed, double noise_ms) {
    Scenario s;
    s.name = fmt::format("{}_{}", to_string(kind), to_string(routing));
    s.seed = seed;
    s.delay_noise_ms = noise_ms;
    s.duration_s = 175;
    double duration = 5;
    switch (kind) {
        case InjectKind::POOR_CHANNEL: duration = 8; break;
        case InjectKind::CROSS_TRAFFIC: duration = 6; break;
        case InjectKind::HARQ_STORM: duration = 5; break;
        case InjectKind::RLC_RETX: duration = 3; break;
        default: break;
    }
    if (kind == InjectKind::NONE) return s;
    for (int i = 0; i < 4; ++i) {
        InjectedEvent e;
        e.kind = kind;
        e.start_s = 15 + 40.0 * i;
        e.duration_s = kind == InjectKind::RRC_TRANSITION ? 0 : duration;
        e.dir = i % 2 == 0 ? Direction::UL : Direction::DL;
        e.routing = routing;
        s.events.push_back(e);
    }
    return s;
}

}  // namespace domino
